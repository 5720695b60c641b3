//! Structured P1 meshes of the unit square.
//!
//! Nodes sit on a uniform lattice with spacing `h = 1/n`, numbered row-major
//! (`index = j * side + i`). Every square cell `(i, j)` is split along the
//! diagonal from `(i, j)` to `(i + 1, j + 1)`: triangle `2c` has vertices
//! `[(i,j), (i+1,j), (i+1,j+1)]` and triangle `2c + 1` has vertices
//! `[(i,j), (i+1,j+1), (i,j+1)]`, where `c = j * n + i`.
//!
//! On this mesh the P1 stiffness matrix of the Laplacian is exactly the
//! five-point stencil, which [`crate::laplace`] exploits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// The torus `Y`: opposite edges identified, `n^2` nodes.
    Periodic,
    /// The closed square `Omega` with `(n+1)^2` nodes and boundary values.
    Dirichlet,
}

/// `h * grad(phi_v)` on the two reference triangles, in local vertex order.
const LOCAL_GRAD: [[Vec2; 3]; 2] = [
    [[-1.0, 0.0], [1.0, -1.0], [0.0, 1.0]],
    [[0.0, -1.0], [1.0, 0.0], [-1.0, 1.0]],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mesh {
    n: usize,
    flavor: Flavor,
}

impl Mesh {
    pub fn new(n: usize, flavor: Flavor) -> Result<Self> {
        if n < 4 {
            return Err(Error::invalid(format!("mesh needs n >= 4, got {n}")));
        }
        if flavor == Flavor::Periodic && n % 2 != 0 {
            return Err(Error::invalid(format!("periodic mesh needs even n, got {n}")));
        }
        Ok(Self { n, flavor })
    }

    pub fn periodic(n: usize) -> Result<Self> {
        Self::new(n, Flavor::Periodic)
    }

    pub fn dirichlet(n: usize) -> Result<Self> {
        Self::new(n, Flavor::Dirichlet)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Nodes per lattice row.
    #[inline]
    pub fn side(&self) -> usize {
        match self.flavor {
            Flavor::Periodic => self.n,
            Flavor::Dirichlet => self.n + 1,
        }
    }

    #[inline]
    pub fn n_nodes(&self) -> usize {
        self.side() * self.side()
    }

    #[inline]
    pub fn n_triangles(&self) -> usize {
        2 * self.n * self.n
    }

    #[inline]
    pub fn triangle_area(&self) -> f64 {
        let h = self.h();
        0.5 * h * h
    }

    /// Node index of lattice point `(i, j)`, `0 <= i, j <= n`. Periodic
    /// meshes wrap `n` to `0`.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        match self.flavor {
            Flavor::Periodic => (j % self.n) * self.n + (i % self.n),
            Flavor::Dirichlet => j * (self.n + 1) + i,
        }
    }

    #[inline]
    pub fn node_ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.side(), idx / self.side())
    }

    #[inline]
    pub fn coord(&self, idx: usize) -> Vec2 {
        let (i, j) = self.node_ij(idx);
        let h = self.h();
        [i as f64 * h, j as f64 * h]
    }

    pub fn coords(&self) -> impl Iterator<Item = Vec2> + '_ {
        (0..self.n_nodes()).map(|k| self.coord(k))
    }

    #[inline]
    pub fn triangle_vertices(&self, t: usize) -> [usize; 3] {
        let c = t / 2;
        let (i, j) = (c % self.n, c / self.n);
        if t % 2 == 0 {
            [self.node(i, j), self.node(i + 1, j), self.node(i + 1, j + 1)]
        } else {
            [self.node(i, j), self.node(i + 1, j + 1), self.node(i, j + 1)]
        }
    }

    #[inline]
    pub fn barycenter(&self, t: usize) -> Vec2 {
        let c = t / 2;
        let (i, j) = ((c % self.n) as f64, (c / self.n) as f64);
        let h = self.h();
        if t % 2 == 0 {
            [(i + 2.0 / 3.0) * h, (j + 1.0 / 3.0) * h]
        } else {
            [(i + 1.0 / 3.0) * h, (j + 2.0 / 3.0) * h]
        }
    }

    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        if self.flavor == Flavor::Periodic {
            return false;
        }
        let (i, j) = self.node_ij(idx);
        i == 0 || j == 0 || i == self.n || j == self.n
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&k| self.is_boundary(k)).collect()
    }

    /// Diagonal of the lumped mass matrix (`sum |T|/3` over adjacent triangles).
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_nodes()];
        let w = self.triangle_area() / 3.0;
        for t in 0..self.n_triangles() {
            for v in self.triangle_vertices(t) {
                m[v] += w;
            }
        }
        m
    }

    /// Samples `f` at the nodes.
    pub fn interpolate(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        self.coords().map(f).collect()
    }

    pub(crate) fn check_nodal<T>(&self, u: &[T], what: &str) -> Result<()> {
        if u.len() != self.n_nodes() {
            return Err(Error::invalid(format!(
                "{what}: field has {} values, mesh has {} nodes",
                u.len(),
                self.n_nodes()
            )));
        }
        Ok(())
    }

    pub(crate) fn check_cells<T>(&self, q: &[T], what: &str) -> Result<()> {
        if q.len() != self.n_triangles() {
            return Err(Error::invalid(format!(
                "{what}: field has {} values, mesh has {} triangles",
                q.len(),
                self.n_triangles()
            )));
        }
        Ok(())
    }
}

/// Distance to the boundary of the unit square.
#[inline]
pub fn dist_to_boundary(p: Vec2) -> f64 {
    p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1])
}

#[inline]
fn grad_on(mesh: &Mesh, u: &[f64], t: usize) -> Vec2 {
    let inv_h = mesh.n as f64;
    let vs = mesh.triangle_vertices(t);
    let g = &LOCAL_GRAD[t % 2];
    let mut out = [0.0; 2];
    for (v, gv) in vs.iter().zip(g) {
        out[0] += u[*v] * gv[0];
        out[1] += u[*v] * gv[1];
    }
    [out[0] * inv_h, out[1] * inv_h]
}

/// Per-triangle gradient of the P1 interpolant of `u`.
pub fn gradient(mesh: &Mesh, u: &[f64]) -> Result<Vec<Vec2>> {
    mesh.check_nodal(u, "gradient")?;
    Ok((0..mesh.n_triangles()).map(|t| grad_on(mesh, u, t)).collect())
}

/// Discrete weak residual `R_i = sum_T |T| q_T . grad phi_i - (M F)_i`.
///
/// The returned vector has one entry per node; entries at constrained
/// (Dirichlet boundary) nodes are zero.
pub fn weak_residual(mesh: &Mesh, q: &[Vec2], source: &[f64]) -> Result<Vec<f64>> {
    mesh.check_cells(q, "weak_residual")?;
    mesh.check_nodal(source, "weak_residual source")?;
    let mut r = vec![0.0; mesh.n_nodes()];
    accumulate_flux(mesh, q, &mut r);
    let mass = mesh.lumped_mass();
    for ((ri, mi), fi) in r.iter_mut().zip(&mass).zip(source) {
        *ri -= mi * fi;
    }
    zero_constrained(mesh, &mut r);
    Ok(r)
}

/// Residual of a flux field alone (no source), boundary rows zeroed.
pub fn flux_residual(mesh: &Mesh, q: &[Vec2]) -> Result<Vec<f64>> {
    mesh.check_cells(q, "flux_residual")?;
    let mut r = vec![0.0; mesh.n_nodes()];
    accumulate_flux(mesh, q, &mut r);
    zero_constrained(mesh, &mut r);
    Ok(r)
}

pub(crate) fn accumulate_flux(mesh: &Mesh, q: &[Vec2], r: &mut [f64]) {
    let half_h = 0.5 * mesh.h();
    for (t, qt) in q.iter().enumerate() {
        let vs = mesh.triangle_vertices(t);
        for (v, g) in vs.iter().zip(&LOCAL_GRAD[t % 2]) {
            r[*v] += half_h * (qt[0] * g[0] + qt[1] * g[1]);
        }
    }
}

pub(crate) fn zero_constrained(mesh: &Mesh, r: &mut [f64]) {
    if mesh.flavor == Flavor::Dirichlet {
        let n = mesh.n;
        let side = n + 1;
        for k in 0..side {
            r[k] = 0.0;
            r[n * side + k] = 0.0;
            r[k * side] = 0.0;
            r[k * side + n] = 0.0;
        }
    }
}

/// Exact load vector `int q phi_i` of a per-triangle constant scalar.
pub fn cell_load(mesh: &Mesh, q: &[f64]) -> Result<Vec<f64>> {
    mesh.check_cells(q, "cell_load")?;
    let w = mesh.triangle_area() / 3.0;
    let mut r = vec![0.0; mesh.n_nodes()];
    for (t, qt) in q.iter().enumerate() {
        for v in mesh.triangle_vertices(t) {
            r[v] += w * qt;
        }
    }
    Ok(r)
}

/// Area-weighted average of per-triangle values onto nodes.
pub fn cells_to_nodes<const K: usize>(mesh: &Mesh, q: &[[f64; K]]) -> Result<Vec<[f64; K]>> {
    mesh.check_cells(q, "cells_to_nodes")?;
    let mut acc = vec![[0.0; K]; mesh.n_nodes()];
    let mut cnt = vec![0u32; mesh.n_nodes()];
    for (t, qt) in q.iter().enumerate() {
        for v in mesh.triangle_vertices(t) {
            for c in 0..K {
                acc[v][c] += qt[c];
            }
            cnt[v] += 1;
        }
    }
    for (a, c) in acc.iter_mut().zip(&cnt) {
        let inv = 1.0 / *c as f64;
        for x in a.iter_mut() {
            *x *= inv;
        }
    }
    Ok(acc)
}

/// Per-triangle selection of a region.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    sel: Vec<bool>,
}

impl RegionMask {
    pub fn all(mesh: &Mesh) -> Self {
        Self {
            sel: vec![true; mesh.n_triangles()],
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(Vec2) -> bool) -> Self {
        Self {
            sel: (0..mesh.n_triangles())
                .map(|t| f(mesh.barycenter(t)))
                .collect(),
        }
    }

    /// `Sigma_r = {x : dist(x, boundary) > r}`, by barycenter.
    pub fn colayer(mesh: &Mesh, r: f64) -> Self {
        Self::from_fn(mesh, |p| dist_to_boundary(p) > r)
    }

    /// The boundary layer `Omega \ Sigma_r`.
    pub fn layer(mesh: &Mesh, r: f64) -> Self {
        Self::colayer(mesh, r).complement()
    }

    /// Triangles whose barycenter lies in the open ball `B(center, r)`.
    pub fn ball(mesh: &Mesh, center: Vec2, r: f64) -> Self {
        Self::from_fn(mesh, |p| {
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            dx * dx + dy * dy < r * r
        })
    }

    pub fn complement(mut self) -> Self {
        for s in &mut self.sel {
            *s = !*s;
        }
        self
    }

    pub fn len(&self) -> usize {
        self.sel.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sel.is_empty()
    }

    pub fn count(&self) -> usize {
        self.sel.iter().filter(|s| **s).count()
    }

    #[inline]
    pub fn contains(&self, t: usize) -> bool {
        self.sel[t]
    }

    pub fn triangles(&self) -> impl Iterator<Item = usize> + '_ {
        self.sel
            .iter()
            .enumerate()
            .filter_map(|(t, s)| s.then_some(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    L2,
    Lp(f64),
    /// `L2` norm of the gradient of a nodal field.
    H1Semi,
}

#[derive(Debug, Clone, Copy)]
pub enum FieldRef<'a> {
    Nodal(&'a [f64]),
    Cells(&'a [Vec2]),
}

/// Norm of a field over the triangles selected by `mask` (all by default).
///
/// Nodal fields use vertex quadrature per triangle, per-triangle vector
/// fields use the barycenter value.
pub fn norm(mesh: &Mesh, field: FieldRef<'_>, kind: NormKind, mask: Option<&RegionMask>) -> Result<f64> {
    if let Some(m) = mask {
        if m.len() != mesh.n_triangles() {
            return Err(Error::invalid("mask length does not match triangle count"));
        }
    }
    let p = match kind {
        NormKind::L2 | NormKind::H1Semi => 2.0,
        NormKind::Lp(p) if p >= 1.0 => p,
        NormKind::Lp(p) => return Err(Error::invalid(format!("Lp norm needs p >= 1, got {p}"))),
    };
    let selected = |t: usize| mask.map_or(true, |m| m.contains(t));
    let area = mesh.triangle_area();
    let pow = |x: f64| if p == 2.0 { x * x } else { x.abs().powf(p) };
    let sum = match (field, kind) {
        (FieldRef::Nodal(u), NormKind::H1Semi) => {
            let g = gradient(mesh, u)?;
            return norm(mesh, FieldRef::Cells(&g), NormKind::L2, mask);
        }
        (FieldRef::Nodal(u), _) => {
            mesh.check_nodal(u, "norm")?;
            (0..mesh.n_triangles())
                .filter(|&t| selected(t))
                .map(|t| {
                    let s: f64 = mesh.triangle_vertices(t).iter().map(|&v| pow(u[v])).sum();
                    area / 3.0 * s
                })
                .sum::<f64>()
        }
        (FieldRef::Cells(_), NormKind::H1Semi) => {
            return Err(Error::invalid("H1 seminorm needs a nodal field"));
        }
        (FieldRef::Cells(q), _) => {
            mesh.check_cells(q, "norm")?;
            q.iter()
                .enumerate()
                .filter(|(t, _)| selected(*t))
                .map(|(_, v)| area * pow((v[0] * v[0] + v[1] * v[1]).sqrt()))
                .sum::<f64>()
        }
    };
    Ok(sum.powf(1.0 / p))
}

/// Convenience: `L2` norm of a nodal field over the whole mesh.
pub fn l2(mesh: &Mesh, u: &[f64]) -> Result<f64> {
    norm(mesh, FieldRef::Nodal(u), NormKind::L2, None)
}

/// Convenience: `H1` seminorm of a nodal field over the whole mesh.
pub fn h1_semi(mesh: &Mesh, u: &[f64]) -> Result<f64> {
    norm(mesh, FieldRef::Nodal(u), NormKind::H1Semi, None)
}

/// Discrete mollifier kernel: lattice offsets and weights summing to one.
#[derive(Debug, Clone)]
pub struct MollifierKernel {
    pub offsets: Vec<(isize, isize)>,
    pub weights: Vec<f64>,
}

impl MollifierKernel {
    /// The bump `exp(-1 / (1 - 4|x/eps|^2))` supported in `|x| < eps/2`,
    /// sampled on the lattice and renormalised to unit sum.
    pub fn new(mesh: &Mesh, eps: f64) -> Result<Self> {
        let h = mesh.h();
        if !(eps.is_finite() && eps >= 2.0 * h * (1.0 - 1e-12)) {
            return Err(Error::Resolution(format!(
                "mollifier scale eps = {eps} below 2h = {}",
                2.0 * h
            )));
        }
        let reach = (0.5 * eps / h).ceil() as isize;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for dj in -reach..=reach {
            for di in -reach..=reach {
                let rho = h * ((di * di + dj * dj) as f64).sqrt() / eps;
                if rho < 0.5 {
                    offsets.push((di, dj));
                    weights.push((-1.0 / (1.0 - 4.0 * rho * rho)).exp());
                }
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { offsets, weights })
    }
}

/// Convolution with the discrete mollifier at scale `eps`.
///
/// Periodic meshes wrap around; Dirichlet meshes extend `f` by zero.
pub fn mollify(mesh: &Mesh, f: &[f64], eps: f64) -> Result<Vec<f64>> {
    mesh.check_nodal(f, "mollify")?;
    let kernel = MollifierKernel::new(mesh, eps)?;
    Ok(convolve(mesh, f, &kernel))
}

/// Componentwise [`mollify`] of a nodal vector field.
pub fn mollify_vec(mesh: &Mesh, f: &[Vec2], eps: f64) -> Result<Vec<Vec2>> {
    mesh.check_nodal(f, "mollify")?;
    let kernel = MollifierKernel::new(mesh, eps)?;
    let a: Vec<f64> = f.iter().map(|v| v[0]).collect();
    let b: Vec<f64> = f.iter().map(|v| v[1]).collect();
    let a = convolve(mesh, &a, &kernel);
    let b = convolve(mesh, &b, &kernel);
    Ok(a.into_iter().zip(b).map(|(x, y)| [x, y]).collect())
}

fn convolve(mesh: &Mesh, f: &[f64], kernel: &MollifierKernel) -> Vec<f64> {
    use rayon::prelude::*;
    let side = mesh.side() as isize;
    let periodic = mesh.flavor() == Flavor::Periodic;
    (0..mesh.n_nodes())
        .into_par_iter()
        .map(|k| {
            let i = (k as isize) % side;
            let j = (k as isize) / side;
            let mut acc = 0.0;
            for (&(di, dj), &w) in kernel.offsets.iter().zip(&kernel.weights) {
                // f(x - y) zeta(y): the kernel is even, so the sign is immaterial
                let (mut ii, mut jj) = (i + di, j + dj);
                if periodic {
                    ii = ii.rem_euclid(side);
                    jj = jj.rem_euclid(side);
                } else if ii < 0 || jj < 0 || ii >= side || jj >= side {
                    continue;
                }
                acc += w * f[(jj * side + ii) as usize];
            }
            acc
        })
        .collect()
}

/// Boundary cut-off `psi_r = clamp((dist(x) - r) / r, 0, 1)`: one on
/// `Sigma_{2r}`, zero off `Sigma_r`, Lipschitz constant `1/r`.
pub fn cutoff(mesh: &Mesh, r: f64) -> Result<Vec<f64>> {
    if mesh.flavor() != Flavor::Dirichlet {
        return Err(Error::invalid("cut-off needs a Dirichlet mesh"));
    }
    if !(r > 0.0 && r < 0.25) {
        return Err(Error::invalid(format!("cut-off radius must lie in (0, 1/4), got {r}")));
    }
    Ok(mesh.interpolate(|p| ramp(dist_to_boundary(p), r)))
}

#[inline]
pub(crate) fn ramp(d: f64, r: f64) -> f64 {
    ((d - r) / r).clamp(0.0, 1.0)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes `x,y,value` rows in node order with 17 significant digits.
pub fn write_scalar_csv(mesh: &Mesh, u: &[f64], path: &Path) -> Result<()> {
    mesh.check_nodal(u, "write_scalar_csv")?;
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "x,y,value").map_err(io)?;
    for (k, v) in u.iter().enumerate() {
        let p = mesh.coord(k);
        writeln!(w, "{:.16e},{:.16e},{:.16e}", p[0], p[1], v).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Writes `x,y,vx,vy` rows in node order with 17 significant digits.
pub fn write_vector_csv(mesh: &Mesh, u: &[Vec2], path: &Path) -> Result<()> {
    mesh.check_nodal(u, "write_vector_csv")?;
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "x,y,vx,vy").map_err(io)?;
    for (k, v) in u.iter().enumerate() {
        let p = mesh.coord(k);
        writeln!(w, "{:.16e},{:.16e},{:.16e},{:.16e}", p[0], p[1], v[0], v[1]).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads a scalar field written by [`write_scalar_csv`], checking that the
/// node coordinates match `mesh`.
pub fn read_scalar_csv(mesh: &Mesh, path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |msg: String| Error::Config(format!("{}: {msg}", path.display()));
    match lines.next() {
        Some(Ok(h)) if h.trim() == "x,y,value" => {}
        _ => return Err(bad("expected header 'x,y,value'".into())),
    }
    let tol = 1e-9 * mesh.h();
    let mut out = Vec::with_capacity(mesh.n_nodes());
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("line {}: {e}", k + 2)))?;
        if cols.len() != 3 {
            return Err(bad(format!("line {}: expected 3 columns", k + 2)));
        }
        let idx = out.len();
        if idx >= mesh.n_nodes() {
            return Err(bad("more rows than mesh nodes".into()));
        }
        let p = mesh.coord(idx);
        if (p[0] - cols[0]).abs() > tol || (p[1] - cols[1]).abs() > tol {
            return Err(bad(format!("row {idx} is not at node ({}, {})", p[0], p[1])));
        }
        out.push(cols[2]);
    }
    mesh.check_nodal(&out, &path.display().to_string())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn build_counts() {
        let d = Mesh::dirichlet(4).unwrap();
        assert_eq!(d.n_nodes(), 25);
        assert_eq!(d.n_triangles(), 32);
        assert_eq!(d.boundary_nodes().len(), 16);
        let p = Mesh::periodic(4).unwrap();
        assert_eq!(p.n_nodes(), 16);
        assert_eq!(p.n_triangles(), 32);
        assert!(Mesh::dirichlet(3).is_err());
        assert!(Mesh::periodic(3).is_err());
        assert!(Mesh::periodic(6).is_ok());
        assert!(Mesh::periodic(5).is_err());
    }

    #[test]
    fn areas_and_mass() {
        for m in [Mesh::dirichlet(8).unwrap(), Mesh::periodic(8).unwrap()] {
            let total: f64 = m.lumped_mass().iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
            assert!((m.triangle_area() * m.n_triangles() as f64 - 1.0).abs() < 1e-14);
        }
        let m = Mesh::dirichlet(8).unwrap();
        let mass = m.lumped_mass();
        let h2 = m.h() * m.h();
        assert!((mass[m.node(3, 4)] - h2).abs() < 1e-16);
    }

    #[test]
    fn gradient_reproduces_affine() {
        for m in [Mesh::dirichlet(6).unwrap(), Mesh::periodic(6).unwrap()] {
            let c = vec![2.5; m.n_nodes()];
            assert!(gradient(&m, &c).unwrap().iter().all(|g| g[0] == 0.0 && g[1] == 0.0));
        }
        let m = Mesh::dirichlet(7).unwrap();
        let u = m.interpolate(|p| 3.0 * p[0] + 2.0 * p[1] - 1.0);
        for g in gradient(&m, &u).unwrap() {
            assert!((g[0] - 3.0).abs() < 1e-12 && (g[1] - 2.0).abs() < 1e-12);
        }
        let u = m.interpolate(|p| p[0]);
        for g in gradient(&m, &u).unwrap() {
            assert!((g[0] - 1.0).abs() < 1e-12 && g[1].abs() < 1e-12);
        }
        assert!(gradient(&m, &[0.0; 3]).is_err());
    }

    #[test]
    fn residual_of_constant_flux_vanishes() {
        // grad x1 = (1, 0) on every triangle
        let m = Mesh::periodic(8).unwrap();
        let q = vec![[1.0, 0.0]; m.n_triangles()];
        let r = weak_residual(&m, &q, &vec![0.0; m.n_nodes()]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn residual_of_unit_source_is_minus_mass() {
        let m = Mesh::dirichlet(8).unwrap();
        let q = vec![[0.0, 0.0]; m.n_triangles()];
        let r = weak_residual(&m, &q, &vec![1.0; m.n_nodes()]).unwrap();
        let h2 = m.h() * m.h();
        for k in 0..m.n_nodes() {
            if m.is_boundary(k) {
                assert_eq!(r[k], 0.0);
            } else {
                assert!((r[k] + h2).abs() < 1e-16);
            }
        }
    }

    #[test]
    fn laminate_flux_residual_nonzero() {
        let m = Mesh::dirichlet(8).unwrap();
        let q: Vec<Vec2> = (0..m.n_triangles())
            .map(|t| [2.0 + (2.0 * PI * m.barycenter(t)[0]).sin(), 0.0])
            .collect();
        let r = weak_residual(&m, &q, &vec![0.0; m.n_nodes()]).unwrap();
        let max = r.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        assert!(max > 1e-3);
    }

    #[test]
    fn norms() {
        let m = Mesh::dirichlet(16).unwrap();
        let one = vec![1.0; m.n_nodes()];
        assert!((l2(&m, &one).unwrap() - 1.0).abs() < 1e-14);
        let x = m.interpolate(|p| p[0]);
        assert!((h1_semi(&m, &x).unwrap() - 1.0).abs() < 1e-14);
        // affine: vertex quadrature of x^2 is not exact, but x itself in L1 is
        let l1 = norm(&m, FieldRef::Nodal(&x), NormKind::Lp(1.0), None).unwrap();
        assert!((l1 - 0.5).abs() < 1e-14);
        assert!(norm(&m, FieldRef::Nodal(&x), NormKind::Lp(0.5), None).is_err());
        let fine = Mesh::dirichlet(256).unwrap();
        let s = fine.interpolate(|p| (2.0 * PI * p[0]).sin());
        assert!((l2(&fine, &s).unwrap() - 0.5_f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn masks() {
        let m = Mesh::dirichlet(16).unwrap();
        let co = RegionMask::colayer(&m, 0.25);
        let layer = RegionMask::layer(&m, 0.25);
        assert_eq!(co.count() + layer.count(), m.n_triangles());
        let ball = RegionMask::ball(&m, [0.5, 0.5], 0.1);
        assert!(ball.count() > 0 && ball.triangles().all(|t| co.contains(t)));
    }

    #[test]
    fn mollify_constants_and_linear() {
        let m = Mesh::periodic(64).unwrap();
        let c = vec![3.25; m.n_nodes()];
        for v in mollify(&m, &c, 1.0 / 8.0).unwrap() {
            assert!((v - 3.25).abs() < 1e-14);
        }
        let eps = 1.0 / 8.0;
        let x = m.interpolate(|p| p[0]);
        let s = mollify(&m, &x, eps).unwrap();
        for (k, p) in m.coords().enumerate() {
            if p[0] > eps / 2.0 + 1e-12 && p[0] < 1.0 - eps / 2.0 - 1e-12 {
                assert!((s[k] - p[0]).abs() < 1e-13);
            }
        }
        assert!(matches!(mollify(&m, &x, 1.0 / 64.0), Err(Error::Resolution(_))));
    }

    #[test]
    fn mollify_dirichlet_extends_by_zero() {
        let m = Mesh::dirichlet(32).unwrap();
        let one = vec![1.0; m.n_nodes()];
        let s = mollify(&m, &one, 0.25).unwrap();
        assert!(s[m.node(0, 0)] < 0.5);
        assert!((s[m.node(16, 16)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cutoff_profile() {
        let m = Mesh::dirichlet(40).unwrap();
        let r = 0.1;
        let psi = cutoff(&m, r).unwrap();
        // node x = 0.3 on the mid row: distance 0.3 = 3r
        assert_eq!(psi[m.node(12, 20)], 1.0);
        // distance 0.05 = r/2
        assert_eq!(psi[m.node(2, 20)], 0.0);
        // distance 0.15 = 1.5r
        assert!((psi[m.node(6, 20)] - 0.5).abs() < 1e-12);
        assert!(psi.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(cutoff(&Mesh::periodic(8).unwrap(), 0.1).is_err());
        assert!(cutoff(&m, 0.3).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = Mesh::dirichlet(5).unwrap();
        let u = m.interpolate(|p| (p[0] * 7.1).sin() + p[1] / 3.0);
        let path = dir.path().join("u.csv");
        write_scalar_csv(&m, &u, &path).unwrap();
        let back = read_scalar_csv(&m, &path).unwrap();
        assert_eq!(u, back);
        assert!(read_scalar_csv(&Mesh::dirichlet(6).unwrap(), &path).is_err());
    }
}
