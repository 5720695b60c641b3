//! Periodic cell problems.
//!
//! For a slope `xi` the corrector `N(., xi)` is the zero-mean periodic
//! solution of `div A(y, xi + grad N) = 0`. From it we derive the effective
//! flux `A_eff(xi)` (the cell average of `A(y, xi + grad N)`), the flux
//! mismatch `b = A(y, xi + grad N) - A_eff(xi)` and an antisymmetric flux
//! corrector `E` with `b_i = d_j E_ji`. Tables of `A_eff` and `N` over a
//! grid of slopes feed the homogenized solver and the expansion.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{CoefficientModel, ModelKind};
use crate::error::{Error, Result};
use crate::laplace::{LaplaceMethod, LaplaceSolver};
use crate::linalg::dot;
use crate::mesh::{
    cell_load, cells_to_nodes, flux_residual, gradient, read_scalar_csv, write_scalar_csv, Mesh,
    Vec2,
};
use crate::solver::{eval_fluxes, solve_monotone, SolveOptions, SolveReport, TriangleFlux};

/// `A^xi(y, z) = A(y, xi + z)`.
#[derive(Debug, Clone, Copy)]
struct CellFlux {
    model: CoefficientModel,
    xi: Vec2,
}

impl TriangleFlux for CellFlux {
    #[inline]
    fn eval(&self, y: Vec2, grad: Vec2) -> Result<Vec2> {
        Ok(self.model.flux(y, [self.xi[0] + grad[0], self.xi[1] + grad[1]]))
    }

    fn constants(&self) -> (f64, f64) {
        (self.model.mu0, self.model.mu2)
    }
}

#[derive(Debug, Clone)]
pub struct CorrectorSolution {
    pub xi: Vec2,
    pub model: CoefficientModel,
    pub mesh: Mesh,
    /// Nodal values of `N(., xi)`, zero nodal mean.
    pub corrector: Vec<f64>,
    pub a_eff: Vec2,
    /// Per-triangle flux mismatch `A(y_T, xi + grad N) - A_eff`.
    pub mismatch: Vec<Vec2>,
    /// Per-triangle total flux `A(y_T, xi + grad N)`.
    pub flux: Vec<Vec2>,
    pub report: SolveReport,
}

impl CorrectorSolution {
    /// `(mean |N|^2, mean |grad N|^2)` over the unit cell.
    pub fn energies(&self) -> (f64, f64) {
        let n2 = self.corrector.iter().map(|v| v * v).sum::<f64>() / self.corrector.len() as f64;
        let g = gradient(&self.mesh, &self.corrector).expect("corrector matches its mesh");
        let g2 = g.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>() / g.len() as f64;
        (n2, g2)
    }

    pub fn grad_corrector(&self) -> Vec<Vec2> {
        gradient(&self.mesh, &self.corrector).expect("corrector matches its mesh")
    }

    /// Weak divergence of the mismatch tested against all P1 functions, in
    /// the dual energy norm, relative to the L2 norm of the total flux.
    pub fn divergence_residual(&self) -> Result<f64> {
        let r = flux_residual(&self.mesh, &self.mismatch)?;
        let scale = l2_cells(&self.mesh, &self.flux);
        Ok(relative_dual(&self.mesh, &r, scale)?)
    }

    /// Cell average of the mismatch.
    pub fn mismatch_mean(&self) -> Vec2 {
        let k = self.mismatch.len() as f64;
        let s = self
            .mismatch
            .iter()
            .fold([0.0, 0.0], |a, v| [a[0] + v[0], a[1] + v[1]]);
        [s[0] / k, s[1] / k]
    }
}

fn l2_cells(mesh: &Mesh, q: &[Vec2]) -> f64 {
    (mesh.triangle_area() * q.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>()).sqrt()
}

/// `sqrt(r . K^{-1} r) / scale`, zero when both vanish.
fn relative_dual(mesh: &Mesh, r: &[f64], scale: f64) -> Result<f64> {
    let d = LaplaceSolver::new(*mesh, LaplaceMethod::Spectral, 1e-12).solve(r)?;
    let num = dot(&d, r).max(0.0).sqrt();
    if num == 0.0 {
        return Ok(0.0);
    }
    Ok(num / scale)
}

/// Solves the cell problem for slope `xi` on an `n x n` periodic mesh.
pub fn solve_corrector(
    model: &CoefficientModel,
    xi: Vec2,
    n: usize,
    opts: &SolveOptions,
) -> Result<CorrectorSolution> {
    if n < 16 || n % 2 != 0 {
        return Err(Error::invalid(format!("cell mesh needs even n >= 16, got {n}")));
    }
    if !(xi[0].is_finite() && xi[1].is_finite()) {
        return Err(Error::invalid(format!("non-finite slope {xi:?}")));
    }
    let mesh = Mesh::periodic(n)?;
    let cell = CellFlux { model: *model, xi };
    let zero = vec![0.0; mesh.n_nodes()];
    let (corrector, report) = solve_monotone(&mesh, &cell, &zero, None, None, opts)?;
    let grads = gradient(&mesh, &corrector)?;
    let flux = eval_fluxes(&mesh, &cell, &grads)?;
    let a_eff = average(&flux);
    let mismatch = flux.iter().map(|q| [q[0] - a_eff[0], q[1] - a_eff[1]]).collect();
    Ok(CorrectorSolution {
        xi,
        model: *model,
        mesh,
        corrector,
        a_eff,
        mismatch,
        flux,
        report,
    })
}

fn average(q: &[Vec2]) -> Vec2 {
    // equal triangle areas: barycenter quadrature is the plain mean
    let s = q.iter().fold([0.0, 0.0], |a, v| [a[0] + v[0], a[1] + v[1]]);
    [s[0] / q.len() as f64, s[1] / q.len() as f64]
}

/// Barycenter-quadrature average of `A(y_T, xi + grad N|_T)`.
pub fn effective_flux(sol: &CorrectorSolution) -> Vec2 {
    average(&sol.flux)
}

/// Flux corrector of a cell solution.
#[derive(Debug, Clone)]
pub struct FluxCorrector {
    /// Zero-mean potentials with `Lap f_i = b_i`.
    pub f1: Vec<f64>,
    pub f2: Vec<f64>,
    /// Nodal `E_12` (`E_21 = -E_12`, diagonal zero), the Galerkin stream
    /// function of the mismatch: `K E_12 = int (b_2 d1 phi - b_1 d2 phi)`.
    pub e12: Vec<f64>,
    /// Nodal `d1 f_2 - d2 f_1`, area-averaged from triangles.
    pub e12_potential: Vec<f64>,
}

impl FluxCorrector {
    /// Weak reconstruction residual of `b_i - d_j E_ji` tested against
    /// every rotated P1 gradient, dual energy norm over `||b||_L2`.
    pub fn reconstruction_residual(&self, sol: &CorrectorSolution, e12: &[f64]) -> Result<f64> {
        let mesh = &sol.mesh;
        let mut r = stream_load(mesh, &sol.mismatch)?;
        let ke = crate::laplace::apply_laplacian(mesh, e12);
        for (ri, ki) in r.iter_mut().zip(&ke) {
            *ri -= ki;
        }
        relative_dual(mesh, &r, l2_cells(mesh, &sol.mismatch))
    }
}

/// `int (b_2 d1 phi_i - b_1 d2 phi_i)` for every node.
fn stream_load(mesh: &Mesh, b: &[Vec2]) -> Result<Vec<f64>> {
    let rotated: Vec<Vec2> = b.iter().map(|v| [v[1], -v[0]]).collect();
    flux_residual(mesh, &rotated)
}

/// Builds the flux corrector of a converged cell solution.
pub fn flux_corrector(sol: &CorrectorSolution) -> Result<FluxCorrector> {
    let mesh = &sol.mesh;
    let laplace = LaplaceSolver::new(*mesh, LaplaceMethod::Spectral, 1e-12);
    // Lap f = b  <=>  K f = -int b phi
    let b1: Vec<f64> = sol.mismatch.iter().map(|v| -v[0]).collect();
    let b2: Vec<f64> = sol.mismatch.iter().map(|v| -v[1]).collect();
    let f1 = laplace.solve(&cell_load(mesh, &b1)?)?;
    let f2 = laplace.solve(&cell_load(mesh, &b2)?)?;
    let g1 = gradient(mesh, &f1)?;
    let g2 = gradient(mesh, &f2)?;
    let e_cells: Vec<[f64; 1]> = g1.iter().zip(&g2).map(|(a, b)| [b[0] - a[1]]).collect();
    let mut e12_potential: Vec<f64> = cells_to_nodes(mesh, &e_cells)?.into_iter().map(|v| v[0]).collect();
    crate::laplace::remove_mean(&mut e12_potential);
    let e12 = laplace.solve(&stream_load(mesh, &sol.mismatch)?)?;
    Ok(FluxCorrector {
        f1,
        f2,
        e12,
        e12_potential,
    })
}

/// Uniform grid of slopes over `[-g_max, g_max]^2` with `m` points per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiGrid {
    pub g_max: f64,
    pub m: usize,
}

impl XiGrid {
    pub fn new(g_max: f64, m: usize) -> Result<Self> {
        if !(g_max > 0.0 && g_max.is_finite()) {
            return Err(Error::invalid(format!("g_max must be positive, got {g_max}")));
        }
        if m < 3 || m % 2 == 0 {
            return Err(Error::invalid(format!("xi grid needs odd m >= 3, got {m}")));
        }
        Ok(Self { g_max, m })
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.g_max / (self.m - 1) as f64
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major node `(i, j)`: `xi = (-g + i d, -g + j d)`.
    #[inline]
    pub fn node(&self, idx: usize) -> Vec2 {
        let d = self.spacing();
        let (i, j) = (idx % self.m, idx / self.m);
        [-self.g_max + i as f64 * d, -self.g_max + j as f64 * d]
    }

    pub fn zero_index(&self) -> usize {
        let c = (self.m - 1) / 2;
        c * self.m + c
    }

    fn locate_axis(&self, x: f64) -> Option<(usize, f64)> {
        let mut t = (x + self.g_max) / self.spacing();
        let r = t.round();
        if (t - r).abs() < 1e-12 {
            t = r;
        }
        if !(t >= 0.0 && t <= (self.m - 1) as f64) {
            return None;
        }
        let i = (t.floor() as usize).min(self.m - 2);
        Some((i, t - i as f64))
    }

    /// Bilinear stencil `[(node, weight); 4]`, or a range error.
    pub fn stencil(&self, xi: Vec2) -> Result<[(usize, f64); 4]> {
        match (self.locate_axis(xi[0]), self.locate_axis(xi[1])) {
            (Some((i, fx)), Some((j, fy))) => {
                let m = self.m;
                Ok([
                    (j * m + i, (1.0 - fx) * (1.0 - fy)),
                    (j * m + i + 1, fx * (1.0 - fy)),
                    ((j + 1) * m + i, (1.0 - fx) * fy),
                    ((j + 1) * m + i + 1, fx * fy),
                ])
            }
            _ => Err(Error::Range(format!(
                "slope ({}, {}) outside the table box [-{g}, {g}]^2",
                xi[0],
                xi[1],
                g = self.g_max
            ))),
        }
    }
}

/// Tabulated effective flux with bilinear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveTable {
    pub g_max: f64,
    pub m: usize,
    pub n: usize,
    pub model: ModelKind,
    #[serde(rename = "A_eff")]
    pub a_eff: Vec<Vec2>,
}

/// Tabulated correctors on the shared slope grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorTable {
    pub grid: XiGrid,
    pub n: usize,
    pub model: ModelKind,
    /// One nodal field on the `n x n` periodic cell mesh per slope node.
    pub fields: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableCertificate {
    /// `min <dA, dxi> / |dxi|^2` over the sampled pairs.
    pub monotonicity: f64,
    /// `max |dA| / |dxi|` over the sampled pairs.
    pub lipschitz: f64,
}

impl EffectiveTable {
    pub fn grid(&self) -> XiGrid {
        XiGrid {
            g_max: self.g_max,
            m: self.m,
        }
    }

    /// Componentwise bilinear interpolation; exact at grid nodes.
    pub fn eval(&self, xi: Vec2) -> Result<Vec2> {
        let st = self.grid().stencil(xi)?;
        let mut out = [0.0; 2];
        for (k, w) in st {
            if w != 0.0 {
                out[0] += w * self.a_eff[k][0];
                out[1] += w * self.a_eff[k][1];
            }
        }
        Ok(out)
    }

    /// Samples `pairs` random pairs of distinct grid nodes.
    pub fn certify(&self, pairs: usize, seed: u64) -> TableCertificate {
        let grid = self.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut monotonicity = f64::INFINITY;
        let mut lipschitz: f64 = 0.0;
        let mut taken = 0;
        while taken < pairs {
            let a = rng.gen_range(0..grid.len());
            let b = rng.gen_range(0..grid.len());
            if a == b {
                continue;
            }
            let (xa, xb) = (grid.node(a), grid.node(b));
            let dx = [xa[0] - xb[0], xa[1] - xb[1]];
            let da = [self.a_eff[a][0] - self.a_eff[b][0], self.a_eff[a][1] - self.a_eff[b][1]];
            let dx2 = dx[0] * dx[0] + dx[1] * dx[1];
            monotonicity = monotonicity.min((da[0] * dx[0] + da[1] * dx[1]) / dx2);
            lipschitz = lipschitz.max(((da[0] * da[0] + da[1] * da[1]) / dx2).sqrt());
            taken += 1;
        }
        TableCertificate {
            monotonicity,
            lipschitz,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s)?;
        XiGrid::new(t.g_max, t.m)?;
        if t.a_eff.len() != t.m * t.m {
            return Err(Error::Config(format!(
                "table has {} entries, expected {}",
                t.a_eff.len(),
                t.m * t.m
            )));
        }
        Ok(t)
    }
}

#[derive(Serialize, Deserialize)]
struct CorrectorTableFile {
    g_max: f64,
    m: usize,
    n: usize,
    model: ModelKind,
    #[serde(rename = "A_eff")]
    a_eff: Vec<Vec2>,
    fields: Vec<String>,
}

impl CorrectorTable {
    pub fn cell_mesh(&self) -> Mesh {
        Mesh::periodic(self.n).expect("table cell mesh is valid")
    }

    /// `N(y, xi)`, bilinear in the cell variable and in the slope.
    pub fn eval(&self, y: Vec2, xi: Vec2) -> Result<f64> {
        let st = self.grid.stencil(xi)?;
        let cell = self.cell_stencil(y);
        let mut out = 0.0;
        for (k, w) in st {
            if w != 0.0 {
                let f = &self.fields[k];
                out += w * cell.iter().map(|(v, c)| c * f[*v]).sum::<f64>();
            }
        }
        Ok(out)
    }

    fn cell_stencil(&self, y: Vec2) -> [(usize, f64); 4] {
        let n = self.n;
        let axis = |t: f64| {
            let mut s = (t - t.floor()) * n as f64;
            let r = s.round();
            if (s - r).abs() < 1e-9 {
                s = r;
            }
            let i = s.floor() as usize;
            (i % n, (i + 1) % n, s - i as f64)
        };
        let (i0, i1, fx) = axis(y[0]);
        let (j0, j1, fy) = axis(y[1]);
        [
            (j0 * n + i0, (1.0 - fx) * (1.0 - fy)),
            (j0 * n + i1, fx * (1.0 - fy)),
            (j1 * n + i0, (1.0 - fx) * fy),
            (j1 * n + i1, fx * fy),
        ]
    }

    /// Writes `table.json` plus one `N_<k>.csv` per slope node into `dir`.
    pub fn save(&self, effective: &EffectiveTable, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mesh = self.cell_mesh();
        let mut names = Vec::with_capacity(self.fields.len());
        for (k, f) in self.fields.iter().enumerate() {
            let name = format!("N_{k:04}.csv");
            write_scalar_csv(&mesh, f, &dir.join(&name))?;
            names.push(name);
        }
        let file = CorrectorTableFile {
            g_max: self.grid.g_max,
            m: self.grid.m,
            n: self.n,
            model: self.model,
            a_eff: effective.a_eff.clone(),
            fields: names,
        };
        let path = dir.join("table.json");
        fs::write(&path, serde_json::to_string_pretty(&file)?).map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<(EffectiveTable, CorrectorTable)> {
        let path = dir.join("table.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let file: CorrectorTableFile = serde_json::from_str(&text)?;
        let grid = XiGrid::new(file.g_max, file.m)?;
        if file.fields.len() != grid.len() || file.a_eff.len() != grid.len() {
            return Err(Error::Config(format!("{}: inconsistent table sizes", path.display())));
        }
        let mesh = Mesh::periodic(file.n)?;
        let fields = file
            .fields
            .iter()
            .map(|name| read_scalar_csv(&mesh, &dir.join(name)))
            .collect::<Result<Vec<_>>>()?;
        Ok((
            EffectiveTable {
                g_max: file.g_max,
                m: file.m,
                n: file.n,
                model: file.model,
                a_eff: file.a_eff,
            },
            CorrectorTable {
                grid,
                n: file.n,
                model: file.model,
                fields,
            },
        ))
    }
}

/// Solves the cell problem at every node of the slope grid.
pub fn build_effective_table(
    model: &CoefficientModel,
    g_max: f64,
    m: usize,
    n: usize,
    opts: &SolveOptions,
) -> Result<(EffectiveTable, CorrectorTable)> {
    let grid = XiGrid::new(g_max, m)?;
    let sols: Vec<Result<CorrectorSolution>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let xi = grid.node(k);
            solve_corrector(model, xi, n, opts).map_err(|e| Error::CellSolve {
                xi,
                source: Box::new(e),
            })
        })
        .collect();
    let mut a_eff = Vec::with_capacity(grid.len());
    let mut fields = Vec::with_capacity(grid.len());
    for s in sols {
        let s = s?;
        a_eff.push(s.a_eff);
        fields.push(s.corrector);
    }
    Ok((
        EffectiveTable {
            g_max,
            m,
            n,
            model: model.kind,
            a_eff,
        },
        CorrectorTable {
            grid,
            n,
            model: model.kind,
            fields,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{norm, FieldRef, NormKind};
    use std::f64::consts::PI;

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn identity_corrector_vanishes() {
        let sol = solve_corrector(&CoefficientModel::identity(), [3.0, -1.0], 32, &opts()).unwrap();
        assert!(sol.corrector.iter().all(|v| *v == 0.0));
        assert!(sol.mismatch.iter().all(|v| v[0] == 0.0 && v[1] == 0.0));
        assert_eq!(effective_flux(&sol), [3.0, -1.0]);
        let fc = flux_corrector(&sol).unwrap();
        assert!(fc.f1.iter().chain(&fc.f2).chain(&fc.e12).all(|v| *v == 0.0));
    }

    #[test]
    fn zero_slope_gives_zero_corrector() {
        for k in ModelKind::ALL {
            let sol = solve_corrector(&CoefficientModel::new(k), [0.0, 0.0], 16, &opts()).unwrap();
            assert!(sol.corrector.iter().all(|v| *v == 0.0));
            assert_eq!(sol.a_eff, [0.0, 0.0]);
        }
    }

    #[test]
    fn rejects_bad_cell_mesh() {
        let m = CoefficientModel::laminate();
        assert!(solve_corrector(&m, [1.0, 0.0], 8, &opts()).is_err());
        assert!(solve_corrector(&m, [1.0, 0.0], 17, &opts()).is_err());
    }

    #[test]
    fn laminate_harmonic_and_arithmetic_means() {
        let lam = CoefficientModel::laminate();
        let s1 = solve_corrector(&lam, [1.0, 0.0], 256, &opts()).unwrap();
        assert!((s1.a_eff[0] - 3f64.sqrt()).abs() < 1e-3, "{:?}", s1.a_eff);
        assert!(s1.a_eff[1].abs() < 1e-3);
        let (_, g2) = s1.energies();
        assert!((g2 - (2.0 / 3f64.sqrt() - 1.0)).abs() < 1e-3, "{g2}");
        // d1 N = sqrt(3) / a(y1) - 1, pointwise on triangles
        let gn = s1.grad_corrector();
        for (t, g) in gn.iter().enumerate() {
            let y = s1.mesh.barycenter(t);
            let exact = 3f64.sqrt() / crate::coefficients::laminate_profile(y[0]) - 1.0;
            assert!((g[0] - exact).abs() < 1e-2);
        }
        let s2 = solve_corrector(&lam, [0.0, 1.0], 256, &opts()).unwrap();
        assert!(s2.a_eff[0].abs() < 1e-4 && (s2.a_eff[1] - 2.0).abs() < 1e-4, "{:?}", s2.a_eff);
    }

    #[test]
    fn mismatch_properties() {
        for k in [ModelKind::Smooth2d, ModelKind::Nonlinear, ModelKind::Laminate] {
            let xi = [0.7, -1.3];
            let sol = solve_corrector(&CoefficientModel::new(k), xi, 64, &opts()).unwrap();
            let mean = sol.mismatch_mean();
            let xn = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            assert!(mean[0].abs() < 1e-10 * xn && mean[1].abs() < 1e-10 * xn);
            assert!(sol.divergence_residual().unwrap() <= 1e-8);
            assert!(sol.corrector.iter().sum::<f64>().abs() / (sol.corrector.len() as f64) < 1e-12);
            let (n2, g2) = sol.energies();
            assert!(n2 + g2 <= 10.0 * xn * xn);
        }
    }

    #[test]
    fn laminate_flux_corrector_fourier_oracle() {
        let lam = CoefficientModel::laminate();
        let sol = solve_corrector(&lam, [0.0, 1.0], 128, &opts()).unwrap();
        let fc = flux_corrector(&sol).unwrap();
        let e_exact = sol.mesh.interpolate(|p| -(2.0 * PI * p[0]).cos() / (2.0 * PI));
        let nrm = |v: &[f64]| norm(&sol.mesh, FieldRef::Nodal(v), NormKind::L2, None).unwrap();
        let target = 1.0 / (2.0 * PI * 2f64.sqrt());
        assert!((nrm(&fc.e12) - target).abs() < 1e-3);
        assert!((nrm(&fc.e12_potential) - target).abs() < 1e-3);
        let diff: Vec<f64> = fc.e12.iter().zip(&e_exact).map(|(a, b)| a - b).collect();
        assert!(nrm(&diff) < 1e-3);
        // both constructions agree up to discretisation error
        let diff: Vec<f64> = fc.e12.iter().zip(&fc.e12_potential).map(|(a, b)| a - b).collect();
        assert!(nrm(&diff) < 1e-3 * target);
        assert!(fc.reconstruction_residual(&sol, &fc.e12).unwrap() <= 1e-6);
    }

    #[test]
    fn table_interpolation() {
        let lam = CoefficientModel::laminate();
        let (eff, cor) = build_effective_table(&lam, 4.0, 9, 64, &opts()).unwrap();
        let z = eff.a_eff[eff.grid().zero_index()];
        assert_eq!(z, [0.0, 0.0]);
        for k in [0, 17, 40, 80] {
            assert_eq!(eff.eval(eff.grid().node(k)).unwrap(), eff.a_eff[k]);
        }
        // linear model: the table is linear in xi, so interpolation is exact
        let a1 = eff.a_eff[eff.grid().zero_index() + 1][0];
        let v = eff.eval([0.5, 0.5]).unwrap();
        assert!((v[0] - 0.5 * a1).abs() < 1e-10);
        assert!((v[0] - 3f64.sqrt() / 2.0).abs() < 2e-3 && (v[1] - 1.0).abs() < 1e-3, "{v:?}");
        assert!(matches!(eff.eval([4.5, 0.0]), Err(Error::Range(_))));
        assert!(eff.eval([4.0, -4.0]).is_ok());
        let cert = eff.certify(200, 5);
        assert!(cert.monotonicity >= lam.mu0 - 1e-3 && cert.lipschitz <= lam.mu2 + 1e-3);
        // corrector table: node values and N(., 0) = 0
        let y = [0.3, 0.7];
        assert_eq!(cor.eval(y, [0.0, 0.0]).unwrap(), 0.0);
        let back = EffectiveTable::from_json(&eff.to_json()).unwrap();
        assert_eq!(back, eff);
    }

    #[test]
    fn identity_table_and_roundtrip_files() {
        let (eff, cor) = build_effective_table(&CoefficientModel::identity(), 1.0, 3, 16, &opts()).unwrap();
        for k in 0..9 {
            assert_eq!(eff.a_eff[k], eff.grid().node(k));
        }
        let v = eff.eval([0.3, 0.7]).unwrap();
        assert!((v[0] - 0.3).abs() < 1e-15 && (v[1] - 0.7).abs() < 1e-15);
        let dir = tempfile::tempdir().unwrap();
        cor.save(&eff, dir.path()).unwrap();
        let (e2, c2) = CorrectorTable::load(dir.path()).unwrap();
        assert_eq!(e2, eff);
        assert_eq!(c2, cor);
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("table.json")).unwrap()).unwrap();
        for key in ["g_max", "m", "n", "model", "A_eff", "fields"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn corrector_lipschitz_in_slope() {
        let model = CoefficientModel::nonlinear();
        let (_, cor) = build_effective_table(&model, 2.0, 5, 32, &opts()).unwrap();
        let mesh = cor.cell_mesh();
        let grid = cor.grid;
        for j in 0..grid.m {
            for i in 0..grid.m - 1 {
                let (a, b) = (j * grid.m + i, j * grid.m + i + 1);
                let d: Vec<f64> = cor.fields[a].iter().zip(&cor.fields[b]).map(|(x, y)| x - y).collect();
                let h1 = norm(&mesh, FieldRef::Nodal(&d), NormKind::H1Semi, None).unwrap();
                assert!(h1 <= 10.0 * grid.spacing());
            }
        }
    }
}
