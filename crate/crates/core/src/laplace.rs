//! Discrete Laplace solves `K u = rhs` for the P1 stiffness matrix `K`.
//!
//! `K` is the unscaled five-point stencil on the structured mesh, so it is
//! diagonalised by the discrete sine transform (Dirichlet) and the discrete
//! Fourier transform (periodic). [`LaplaceMethod::Spectral`] solves exactly
//! with those transforms; [`LaplaceMethod::Cg`] runs matrix-free conjugate
//! gradients on the same operator.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::mesh::{zero_constrained, Flavor, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaplaceMethod {
    #[default]
    Spectral,
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// Periodic problem, solution with zero nodal mean.
    ZeroMean,
    /// Dirichlet problem, solution zero on the boundary.
    ZeroBoundary,
}

/// `K u` for a nodal field. Rows of Dirichlet boundary nodes are zero; the
/// boundary values of `u` enter the interior rows.
pub fn apply_laplacian(mesh: &Mesh, u: &[f64]) -> Vec<f64> {
    let n = mesh.n();
    let side = mesh.side();
    let mut out = vec![0.0; mesh.n_nodes()];
    match mesh.flavor() {
        Flavor::Periodic => {
            for j in 0..n {
                let jp = (j + 1) % n;
                let jm = (j + n - 1) % n;
                for i in 0..n {
                    let ip = (i + 1) % n;
                    let im = (i + n - 1) % n;
                    out[j * n + i] = 4.0 * u[j * n + i]
                        - u[j * n + ip]
                        - u[j * n + im]
                        - u[jp * n + i]
                        - u[jm * n + i];
                }
            }
        }
        Flavor::Dirichlet => {
            for j in 1..n {
                for i in 1..n {
                    let k = j * side + i;
                    out[k] = 4.0 * u[k] - u[k + 1] - u[k - 1] - u[k + side] - u[k - side];
                }
            }
        }
    }
    out
}

/// Reusable Laplace solver for one mesh.
pub struct LaplaceSolver {
    mesh: Mesh,
    method: LaplaceMethod,
    cg_tol: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    eig: Vec<f64>,
}

impl std::fmt::Debug for LaplaceSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LaplaceSolver")
            .field("mesh", &self.mesh)
            .field("method", &self.method)
            .field("cg_tol", &self.cg_tol)
            .finish()
    }
}

impl LaplaceSolver {
    pub fn new(mesh: Mesh, method: LaplaceMethod, cg_tol: f64) -> Self {
        let n = mesh.n();
        let mut planner = FftPlanner::new();
        let (fwd, inv, eig) = match mesh.flavor() {
            // odd extension of length 2n
            Flavor::Dirichlet => {
                let f = planner.plan_fft_forward(2 * n);
                let eig = (0..n)
                    .map(|p| 2.0 - 2.0 * (PI * p as f64 / n as f64).cos())
                    .collect();
                (f.clone(), f, eig)
            }
            Flavor::Periodic => {
                let eig = (0..n)
                    .map(|p| 2.0 - 2.0 * (2.0 * PI * p as f64 / n as f64).cos())
                    .collect();
                (planner.plan_fft_forward(n), planner.plan_fft_inverse(n), eig)
            }
        };
        Self {
            mesh,
            method,
            cg_tol,
            fwd,
            inv,
            eig,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Solves `K u = rhs` on the free nodes. Periodic right-hand sides are
    /// projected onto mean zero first; Dirichlet boundary rows are ignored.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.mesh.check_nodal(rhs, "laplace solve")?;
        let mut b = rhs.to_vec();
        zero_constrained(&self.mesh, &mut b);
        if self.mesh.flavor() == Flavor::Periodic {
            remove_mean(&mut b);
        }
        let mut u = match self.method {
            LaplaceMethod::Spectral => match self.mesh.flavor() {
                Flavor::Dirichlet => self.solve_dst(&b),
                Flavor::Periodic => self.solve_fft(&b),
            },
            LaplaceMethod::Cg => self.solve_cg(&b)?,
        };
        if self.mesh.flavor() == Flavor::Periodic {
            remove_mean(&mut u);
        }
        Ok(u)
    }

    fn solve_dst(&self, b: &[f64]) -> Vec<f64> {
        let n = self.mesh.n();
        let m = n - 1;
        let side = n + 1;
        let mut grid = vec![0.0; m * m];
        for j in 0..m {
            for i in 0..m {
                grid[j * m + i] = b[(j + 1) * side + i + 1];
            }
        }
        self.dst_rows(&mut grid, m);
        transpose(&mut grid, m);
        self.dst_rows(&mut grid, m);
        for q in 0..m {
            for p in 0..m {
                grid[q * m + p] /= self.eig[p + 1] + self.eig[q + 1];
            }
        }
        self.dst_rows(&mut grid, m);
        transpose(&mut grid, m);
        self.dst_rows(&mut grid, m);
        let scale = (2.0 / n as f64).powi(2);
        let mut u = vec![0.0; self.mesh.n_nodes()];
        for j in 0..m {
            for i in 0..m {
                u[(j + 1) * side + i + 1] = scale * grid[j * m + i];
            }
        }
        u
    }

    /// Unnormalised DST-I (`sum_k x_k sin(pi p k / n)`) of every row, two
    /// rows per complex FFT.
    fn dst_rows(&self, grid: &mut [f64], m: usize) {
        let n = m + 1;
        let mut buf = vec![Complex64::new(0.0, 0.0); 2 * n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fwd.get_inplace_scratch_len()];
        let mut r = 0;
        while r < m {
            let second = r + 1 < m;
            buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            for k in 0..m {
                let a = grid[r * m + k];
                let b = if second { grid[(r + 1) * m + k] } else { 0.0 };
                buf[k + 1] = Complex64::new(a, b);
                buf[2 * n - k - 1] = Complex64::new(-a, -b);
            }
            self.fwd.process_with_scratch(&mut buf, &mut scratch);
            for p in 0..m {
                let z = buf[p + 1];
                grid[r * m + p] = -0.5 * z.im;
                if second {
                    grid[(r + 1) * m + p] = 0.5 * z.re;
                }
            }
            r += 2;
        }
    }

    fn solve_fft(&self, b: &[f64]) -> Vec<f64> {
        let n = self.mesh.n();
        let mut grid: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len())];
        for row in grid.chunks_mut(n) {
            self.fwd.process_with_scratch(row, &mut scratch);
        }
        transpose(&mut grid, n);
        for row in grid.chunks_mut(n) {
            self.fwd.process_with_scratch(row, &mut scratch);
        }
        for p in 0..n {
            for q in 0..n {
                let lam = self.eig[p] + self.eig[q];
                grid[p * n + q] = if p == 0 && q == 0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    grid[p * n + q] / lam
                };
            }
        }
        for row in grid.chunks_mut(n) {
            self.inv.process_with_scratch(row, &mut scratch);
        }
        transpose(&mut grid, n);
        for row in grid.chunks_mut(n) {
            self.inv.process_with_scratch(row, &mut scratch);
        }
        let scale = 1.0 / (n * n) as f64;
        grid.iter().map(|c| c.re * scale).collect()
    }

    fn solve_cg(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.mesh.n();
        let periodic = self.mesh.flavor() == Flavor::Periodic;
        let b_norm = dot(b, b).sqrt();
        let mut x = vec![0.0; b.len()];
        if b_norm == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut p = r.clone();
        let mut rs = dot(&r, &r);
        let max_iter = 10 * n * n;
        for _ in 0..max_iter {
            let mut ap = apply_laplacian(&self.mesh, &p);
            if periodic {
                remove_mean(&mut ap);
            }
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::NumericalBreakdown(format!(
                    "conjugate gradients lost positivity (p.Ap = {pap:e})"
                )));
            }
            let alpha = rs / pap;
            for k in 0..x.len() {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            let rs_new = dot(&r, &r);
            if rs_new.sqrt() <= self.cg_tol * b_norm {
                return Ok(x);
            }
            let beta = rs_new / rs;
            for k in 0..p.len() {
                p[k] = r[k] + beta * p[k];
            }
            rs = rs_new;
        }
        Err(Error::NumericalBreakdown(format!(
            "conjugate gradients did not reach {:e} within {max_iter} iterations",
            self.cg_tol
        )))
    }
}

fn transpose<T: Copy>(a: &mut [T], m: usize) {
    for i in 0..m {
        for j in i + 1..m {
            a.swap(i * m + j, j * m + i);
        }
    }
}

pub(crate) fn remove_mean(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// One-shot discrete Poisson solve `K u = rhs` with the boundary condition
/// matching the mesh flavor.
pub fn poisson_solve(
    mesh: &Mesh,
    rhs: &[f64],
    bc: BoundaryCondition,
    method: LaplaceMethod,
    cg_tol: f64,
) -> Result<Vec<f64>> {
    match (mesh.flavor(), bc) {
        (Flavor::Periodic, BoundaryCondition::ZeroMean)
        | (Flavor::Dirichlet, BoundaryCondition::ZeroBoundary) => {}
        _ => {
            return Err(Error::invalid(format!(
                "boundary condition {bc:?} does not match a {:?} mesh",
                mesh.flavor()
            )))
        }
    }
    LaplaceSolver::new(*mesh, method, cg_tol).solve(rhs)
}
