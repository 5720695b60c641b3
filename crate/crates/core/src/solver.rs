//! Preconditioned Zarantonello iteration for discrete monotone problems.
//!
//! For a per-triangle flux `q_T = A(x_T, grad u|_T)` the discrete weak
//! residual `R(u)` is strongly monotone with constant `mu0` and Lipschitz
//! with constant `mu2` in the energy norm of the Laplacian `K`. The update
//! `u <- u - rho K^{-1} R(u)` is then a contraction with factor
//! `sqrt(1 - 2 rho mu0 + rho^2 mu2^2)`, which equals
//! `sqrt(1 - mu0^2 / mu2^2)` at the default `rho = mu0 / mu2^2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientModel;
use crate::error::{Error, Result};
use crate::laplace::{remove_mean, LaplaceMethod, LaplaceSolver};
use crate::linalg::dot;
use crate::mesh::{gradient, weak_residual, Flavor, Mesh, Vec2};

/// A flux evaluated at a triangle barycenter for a gradient value.
pub trait TriangleFlux: Sync {
    fn eval(&self, x: Vec2, grad: Vec2) -> Result<Vec2>;

    /// `(mu0, mu2)` governing the default step and contraction bound.
    fn constants(&self) -> (f64, f64);
}

/// `(x, z) -> A(x / eps, z)`; `eps = 1` evaluates the model directly.
#[derive(Debug, Clone, Copy)]
pub struct ScaledModelFlux {
    pub model: CoefficientModel,
    pub eps: f64,
}

impl TriangleFlux for ScaledModelFlux {
    #[inline]
    fn eval(&self, x: Vec2, grad: Vec2) -> Result<Vec2> {
        Ok(self.model.flux([x[0] / self.eps, x[1] / self.eps], grad))
    }

    fn constants(&self) -> (f64, f64) {
        (self.model.mu0, self.model.mu2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Relative tolerance on the preconditioned residual norm.
    pub tol_rel: f64,
    /// Round-off floor, relative to the L2 norm of the current flux plus
    /// the source load.
    pub tol_abs: f64,
    pub max_iters: usize,
    /// Step size; `None` selects `mu0 / mu2^2`.
    pub rho: Option<f64>,
    pub cg_tol: f64,
    pub laplace: LaplaceMethod,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_rel: 1e-10,
            tol_abs: 1e-13,
            max_iters: 100_000,
            rho: None,
            cg_tol: 1e-12,
            laplace: LaplaceMethod::Spectral,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub converged: bool,
    /// Largest ratio of successive residuals from iteration 3 onward.
    pub contraction_emp: f64,
    /// Preconditioned (energy-norm) residuals, starting with the initial one.
    #[serde(rename = "residuals")]
    pub residual_history: Vec<f64>,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    fn finish(history: Vec<f64>, converged: bool) -> Self {
        let contraction_emp = history
            .windows(2)
            .skip(3)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .fold(0.0, f64::max);
        Self {
            iterations: history.len().saturating_sub(1),
            converged,
            contraction_emp,
            residual_history: history,
        }
    }
}

/// Theoretical contraction factor `sqrt(1 - 2 rho mu0 + rho^2 mu2^2)`.
pub fn contraction_bound(mu0: f64, mu2: f64, rho: f64) -> f64 {
    (1.0 - 2.0 * rho * mu0 + rho * rho * mu2 * mu2).max(0.0).sqrt()
}

pub(crate) fn eval_fluxes(mesh: &Mesh, flux: &dyn TriangleFlux, grads: &[Vec2]) -> Result<Vec<Vec2>> {
    grads
        .par_iter()
        .enumerate()
        .map(|(t, g)| flux.eval(mesh.barycenter(t), *g))
        .collect()
}

/// Discrete harmonic extension of the boundary values of `g`.
pub fn harmonic_extension(mesh: &Mesh, g: &[f64], laplace: &LaplaceSolver) -> Result<Vec<f64>> {
    mesh.check_nodal(g, "harmonic_extension")?;
    let mut u: Vec<f64> = (0..mesh.n_nodes())
        .map(|k| if mesh.is_boundary(k) { g[k] } else { 0.0 })
        .collect();
    let r = crate::laplace::apply_laplacian(mesh, &u);
    let d = laplace.solve(&r)?;
    for (uk, dk) in u.iter_mut().zip(&d) {
        *uk -= dk;
    }
    Ok(u)
}

/// Solves `R(u) = 0` for the flux `flux` and nodal source `source`.
///
/// * Dirichlet meshes take the boundary values from `boundary` (required);
///   they are reproduced exactly. Without `init` the iteration starts from
///   the discrete harmonic extension of the boundary data.
/// * Periodic meshes ignore `boundary`; iterates are kept at zero mean.
pub fn solve_monotone(
    mesh: &Mesh,
    flux: &dyn TriangleFlux,
    source: &[f64],
    boundary: Option<&[f64]>,
    init: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    mesh.check_nodal(source, "source")?;
    let (mu0, mu2) = flux.constants();
    let rho = opts.rho.unwrap_or(mu0 / (mu2 * mu2));
    if !(rho > 0.0 && rho < 2.0 * mu0 / (mu2 * mu2)) {
        return Err(Error::invalid(format!(
            "step rho = {rho} violates 0 < rho < 2 mu0 / mu2^2 = {}",
            2.0 * mu0 / (mu2 * mu2)
        )));
    }
    if !(opts.tol_rel > 0.0 && opts.tol_abs >= 0.0 && opts.cg_tol > 0.0) {
        return Err(Error::invalid("solver tolerances must be positive"));
    }
    let laplace = LaplaceSolver::new(*mesh, opts.laplace, opts.cg_tol);
    let periodic = mesh.flavor() == Flavor::Periodic;

    let mut u = match (mesh.flavor(), boundary, init) {
        (Flavor::Dirichlet, None, _) => {
            return Err(Error::invalid("Dirichlet solve needs boundary data"))
        }
        (Flavor::Dirichlet, Some(g), None) => harmonic_extension(mesh, g, &laplace)?,
        (Flavor::Dirichlet, Some(g), Some(u0)) => {
            mesh.check_nodal(g, "boundary")?;
            mesh.check_nodal(u0, "initial guess")?;
            (0..mesh.n_nodes())
                .map(|k| if mesh.is_boundary(k) { g[k] } else { u0[k] })
                .collect()
        }
        (Flavor::Periodic, _, None) => vec![0.0; mesh.n_nodes()],
        (Flavor::Periodic, _, Some(u0)) => {
            mesh.check_nodal(u0, "initial guess")?;
            let mut u = u0.to_vec();
            remove_mean(&mut u);
            u
        }
    };

    let mass = mesh.lumped_mass();
    let source_scale = dot(&mass, &source.iter().map(|f| f * f).collect::<Vec<_>>()).sqrt();
    let area = mesh.triangle_area();
    let mut history: Vec<f64> = Vec::new();
    let mut r0 = 0.0;
    loop {
        let grads = gradient(mesh, &u)?;
        let q = eval_fluxes(mesh, flux, &grads)?;
        let r = weak_residual(mesh, &q, source)?;
        let d = laplace.solve(&r)?;
        let res = dot(&d, &r).max(0.0).sqrt();
        if !res.is_finite() {
            return Err(Error::NumericalBreakdown(format!(
                "non-finite residual after {} iterations",
                history.len()
            )));
        }
        history.push(res);
        if history.len() == 1 {
            r0 = res;
        }
        let flux_scale = (area * q.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>()).sqrt();
        let floor = opts.tol_abs * (flux_scale + source_scale);
        if res <= opts.tol_rel * r0 || res <= floor {
            return Ok((u, SolveReport::finish(history, true)));
        }
        if history.len() > opts.max_iters {
            return Err(Error::NonConvergence(Box::new(SolveReport::finish(history, false))));
        }
        for (uk, dk) in u.iter_mut().zip(&d) {
            *uk -= rho * dk;
        }
        if periodic {
            remove_mean(&mut u);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{h1_semi, weak_residual};
    use rand::{Rng, SeedableRng};

    fn dirichlet_data(mesh: &Mesh, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        mesh.interpolate(f)
    }

    #[test]
    fn identity_affine_exact() {
        let mesh = Mesh::dirichlet(32).unwrap();
        let g = dirichlet_data(&mesh, |p| p[0]);
        let flux = ScaledModelFlux { model: CoefficientModel::identity(), eps: 1.0 };
        let (u, rep) = solve_monotone(&mesh, &flux, &vec![0.0; mesh.n_nodes()], Some(&g), None, &SolveOptions::default()).unwrap();
        assert!(rep.converged);
        for (a, b) in u.iter().zip(&g) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn laminate_transverse_exact() {
        let mesh = Mesh::dirichlet(64).unwrap();
        let g = dirichlet_data(&mesh, |p| p[1]);
        let flux = ScaledModelFlux { model: CoefficientModel::laminate(), eps: 1.0 / 2.0 };
        let (u, _) = solve_monotone(&mesh, &flux, &vec![0.0; mesh.n_nodes()], Some(&g), None, &SolveOptions::default()).unwrap();
        for (a, b) in u.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
        // direct residual oracle
        let q: Vec<Vec2> = (0..mesh.n_triangles())
            .map(|t| flux.eval(mesh.barycenter(t), [0.0, 1.0]).unwrap())
            .collect();
        let r = weak_residual(&mesh, &q, &vec![0.0; mesh.n_nodes()]).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn boundary_reproduced_and_contraction() {
        let mesh = Mesh::dirichlet(32).unwrap();
        let g = dirichlet_data(&mesh, |p| p[0] * p[0] - 0.5 * p[1]);
        let f = vec![1.0; mesh.n_nodes()];
        for model in [CoefficientModel::smooth2d(), CoefficientModel::nonlinear(), CoefficientModel::laminate()] {
            let flux = ScaledModelFlux { model, eps: 1.0 / 4.0 };
            let (u, rep) = solve_monotone(&mesh, &flux, &f, Some(&g), None, &SolveOptions::default()).unwrap();
            for k in mesh.boundary_nodes() {
                assert_eq!(u[k], g[k]);
            }
            let bound = contraction_bound(model.mu0, model.mu2, model.default_step());
            assert!(rep.contraction_emp <= bound + 0.02, "{}: {} > {}", model.name(), rep.contraction_emp, bound);
            let last = *rep.residual_history.last().unwrap();
            assert!(last <= 1e-10 * rep.residual_history[0]);
        }
    }

    #[test]
    fn uniqueness_from_distinct_starts() {
        let mesh = Mesh::dirichlet(32).unwrap();
        let g = dirichlet_data(&mesh, |p| p[0] + 0.3 * p[1]);
        let f = mesh.interpolate(|p| (3.0 * p[0]).sin());
        let flux = ScaledModelFlux { model: CoefficientModel::nonlinear(), eps: 1.0 / 4.0 };
        let opts = SolveOptions::default();
        let zero = vec![0.0; mesh.n_nodes()];
        let (a, ra) = solve_monotone(&mesh, &flux, &f, Some(&g), Some(&zero), &opts).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let amp = 0.1 * mesh.h();
        let noise: Vec<f64> = (0..mesh.n_nodes()).map(|_| rng.gen_range(-amp..amp)).collect();
        let (b, rb) = solve_monotone(&mesh, &flux, &f, Some(&g), Some(&noise), &opts).unwrap();
        let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let d = h1_semi(&mesh, &diff).unwrap();
        assert!(d <= 10.0 * opts.tol_rel, "{d:e} {:?} {:?}", ra.residual_history.len(), rb.residual_history.first());
    }

    #[test]
    fn rejects_bad_step_and_reports_nonconvergence() {
        let mesh = Mesh::dirichlet(16).unwrap();
        let g = vec![0.0; mesh.n_nodes()];
        let f = vec![1.0; mesh.n_nodes()];
        let flux = ScaledModelFlux { model: CoefficientModel::laminate(), eps: 1.0 / 4.0 };
        let bad = SolveOptions { rho: Some(0.5), ..Default::default() };
        assert!(matches!(solve_monotone(&mesh, &flux, &f, Some(&g), None, &bad), Err(Error::InvalidArgument(_))));
        let short = SolveOptions { max_iters: 3, ..Default::default() };
        match solve_monotone(&mesh, &flux, &f, Some(&g), None, &short) {
            Err(Error::NonConvergence(rep)) => {
                assert!(!rep.converged);
                assert_eq!(rep.residual_history.len(), 4);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
        assert!(solve_monotone(&mesh, &flux, &f, None, None, &SolveOptions::default()).is_err());
    }

    #[test]
    fn report_json_shape() {
        let rep = SolveReport::finish(vec![1.0, 0.5, 0.25, 0.125, 0.0625, 0.03], true);
        let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
        assert_eq!(v["iterations"], 5);
        assert_eq!(v["converged"], true);
        assert!((v["contraction_emp"].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(v["residuals"].as_array().unwrap().len(), 6);
    }
}
