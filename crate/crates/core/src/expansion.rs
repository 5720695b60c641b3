//! First-order two-scale expansion and its error functionals.
//!
//! `v_eps(x) = u0(x) + eps N(x/eps, phi(x))` with the smoothed slope
//! `phi = S_eps(psi_{4 eps} grad u0)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::CorrectorTable;
use crate::error::{Error, Result};
use crate::mesh::{
    cells_to_nodes, dist_to_boundary, gradient, h1_semi, l2, mollify_vec, norm, ramp, Flavor,
    FieldRef, Mesh, NormKind, RegionMask, Vec2,
};

/// Width of the cut-off layer in units of `eps`.
pub const CUTOFF_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub epsilon: f64,
    pub h: f64,
    /// `||u_eps - u0||_L2`.
    pub l2_error: f64,
    /// `||grad (u_eps - v_eps)||_L2`.
    pub h1_expansion_error: f64,
    /// `||grad u0||_L2` over the layer `Omega \ Sigma_{4 eps}`.
    pub layer_norm: f64,
    /// `eps ||D^2 u0||_L2(Sigma_{2 eps})` with the quadratic-fit Hessian.
    pub colayer_hess: f64,
}

/// `psi_{4 eps}` at the nodes. For `4 eps >= 1/2` the co-layer is empty and
/// the cut-off vanishes identically.
fn expansion_cutoff(mesh: &Mesh, eps: f64) -> Vec<f64> {
    let r = CUTOFF_FACTOR * eps;
    mesh.interpolate(|p| ramp(dist_to_boundary(p), r))
}

/// The smoothed slope field `S_eps(psi_{4 eps} grad u0)` at the nodes.
pub fn smoothed_slope(mesh: &Mesh, u0: &[f64], eps: f64) -> Result<Vec<Vec2>> {
    if mesh.flavor() != Flavor::Dirichlet {
        return Err(Error::invalid("expansion needs a Dirichlet mesh"));
    }
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("epsilon must be positive, got {eps}")));
    }
    let g = gradient(mesh, u0)?;
    let nodal = cells_to_nodes(mesh, &g)?;
    let psi = expansion_cutoff(mesh, eps);
    let cut: Vec<Vec2> = nodal
        .iter()
        .zip(&psi)
        .map(|(v, p)| [p * v[0], p * v[1]])
        .collect();
    mollify_vec(mesh, &cut, eps)
}

/// Builds `v_eps` at the nodes of `mesh`.
pub fn build_expansion(u0: &[f64], ctable: &CorrectorTable, eps: f64, mesh: &Mesh) -> Result<Vec<f64>> {
    let phi = smoothed_slope(mesh, u0, eps)?;
    (0..mesh.n_nodes())
        .into_par_iter()
        .map(|k| {
            let x = mesh.coord(k);
            let xi = phi[k];
            if xi == [0.0, 0.0] {
                return Ok(u0[k]);
            }
            let n = ctable.eval([x[0] / eps, x[1] / eps], xi)?;
            Ok(u0[k] + eps * n)
        })
        .collect()
}

/// Nodal Hessians from a least-squares quadratic fit over the 3x3 node
/// neighbourhood. Boundary nodes get `None`.
pub fn hessian_surrogate(mesh: &Mesh, u: &[f64]) -> Result<Vec<Option<[f64; 3]>>> {
    mesh.check_nodal(u, "hessian_surrogate")?;
    let side = mesh.side();
    let inv_h2 = 1.0 / (mesh.h() * mesh.h());
    Ok((0..mesh.n_nodes())
        .map(|k| {
            let (i, j) = mesh.node_ij(k);
            if i == 0 || j == 0 || i + 1 == side || j + 1 == side {
                return None;
            }
            // on the 3x3 stencil {1, a, b, a^2 - 2/3, b^2 - 2/3, ab} is orthogonal
            let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
            for b in -1i32..=1 {
                for a in -1i32..=1 {
                    let v = u[(j as i32 + b) as usize * side + (i as i32 + a) as usize];
                    saa += (f64::from(a * a) - 2.0 / 3.0) * v;
                    sbb += (f64::from(b * b) - 2.0 / 3.0) * v;
                    sab += f64::from(a * b) * v;
                }
            }
            // u ~ ... + c3 a^2 + c4 ab + c5 b^2, c3 = saa/2, c5 = sbb/2, c4 = sab/4
            Some([saa * inv_h2, sab * 0.25 * inv_h2, sbb * inv_h2])
        })
        .collect())
}

/// Error functionals of one `eps`.
pub fn expansion_errors(
    u_eps: &[f64],
    u0: &[f64],
    v_eps: &[f64],
    mesh: &Mesh,
    eps: f64,
) -> Result<ErrorReport> {
    mesh.check_nodal(u_eps, "u_eps")?;
    mesh.check_nodal(u0, "u0")?;
    mesh.check_nodal(v_eps, "v_eps")?;
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let l2_error = l2(mesh, &diff(u_eps, u0))?;
    let h1_expansion_error = h1_semi(mesh, &diff(u_eps, v_eps))?;
    let layer = RegionMask::layer(mesh, CUTOFF_FACTOR * eps);
    let layer_norm = norm(mesh, FieldRef::Nodal(u0), NormKind::H1Semi, Some(&layer))?;
    let colayer = RegionMask::colayer(mesh, 2.0 * eps);
    let hess = hessian_surrogate(mesh, u0)?;
    let mut acc = 0.0;
    for t in colayer.triangles() {
        let mut hm = [0.0; 3];
        for v in mesh.triangle_vertices(t) {
            // co-layer triangles at positive distance keep all vertices interior
            let hv = hess[v].unwrap_or([0.0; 3]);
            for c in 0..3 {
                hm[c] += hv[c] / 3.0;
            }
        }
        acc += hm[0] * hm[0] + 2.0 * hm[1] * hm[1] + hm[2] * hm[2];
    }
    let colayer_hess = eps * (mesh.triangle_area() * acc).sqrt();
    Ok(ErrorReport {
        epsilon: eps,
        h: mesh.h(),
        l2_error,
        h1_expansion_error,
        layer_norm,
        colayer_hess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::{build_effective_table, solve_corrector};
    use crate::coefficients::CoefficientModel;
    use crate::solver::SolveOptions;

    #[test]
    fn identity_table_reproduces_u0() {
        let (_, ct) = build_effective_table(&CoefficientModel::identity(), 4.0, 9, 32, &SolveOptions::default()).unwrap();
        let mesh = Mesh::dirichlet(256).unwrap();
        let u0 = mesh.interpolate(|p| (p[0] * 3.0).sin() * p[1]);
        let v = build_expansion(&u0, &ct, 0.125, &mesh).unwrap();
        assert_eq!(v, u0);
    }

    #[test]
    fn zero_errors_for_equal_fields() {
        let mesh = Mesh::dirichlet(64).unwrap();
        let u = mesh.interpolate(|p| p[0] + 0.5 * p[1]);
        let r = expansion_errors(&u, &u, &u, &mesh, 0.125).unwrap();
        assert_eq!(r.l2_error, 0.0);
        assert_eq!(r.h1_expansion_error, 0.0);
        assert!(r.colayer_hess.abs() < 1e-9);
    }

    #[test]
    fn hessian_exact_on_quadratics() {
        let mesh = Mesh::dirichlet(32).unwrap();
        let u = mesh.interpolate(|p| 1.5 * p[0] * p[0] - p[0] * p[1] + 0.25 * p[1] * p[1] + p[0]);
        let hs = hessian_surrogate(&mesh, &u).unwrap();
        assert!(hs[0].is_none());
        let hk = hs[mesh.node(10, 7)].unwrap();
        assert!((hk[0] - 3.0).abs() < 1e-9 && (hk[1] + 1.0).abs() < 1e-9 && (hk[2] - 0.5).abs() < 1e-9, "{hk:?}");
    }

    #[test]
    fn laminate_expansion_boundary_and_interior() {
        let eps = 1.0 / 32.0;
        let (_, ct) = build_effective_table(&CoefficientModel::laminate(), 2.0, 5, 32, &SolveOptions::default()).unwrap();
        let mesh = Mesh::dirichlet(1024).unwrap();
        let u0 = mesh.interpolate(|p| p[0]);
        let v = build_expansion(&u0, &ct, eps, &mesh).unwrap();
        let cell = solve_corrector(&CoefficientModel::laminate(), [1.0, 0.0], 32, &SolveOptions::default()).unwrap();
        let mut checked = 0;
        for k in 0..mesh.n_nodes() {
            let x = mesh.coord(k);
            let d = dist_to_boundary(x);
            if d < 3.0 * eps {
                assert_eq!(v[k], u0[k]);
            }
            if d > 8.5 * eps {
                let (i, j) = mesh.node_ij(k);
                let nv = cell.corrector[(j % 32) * 32 + i % 32];
                assert!((v[k] - x[0] - eps * nv).abs() < 1e-12);
                checked += 1;
            }
        }
        assert!(checked > 0);
        // corrector-term scaling
        let dv: Vec<f64> = v.iter().zip(&u0).map(|(a, b)| a - b).collect();
        let psi = expansion_cutoff(&mesh, eps);
        // grad u0 = e1, so ||psi grad u0|| = ||psi||
        let ratio = l2(&mesh, &dv).unwrap() / (eps * l2(&mesh, &psi).unwrap());
        assert!(ratio <= 10.0, "{ratio}");
    }
}
