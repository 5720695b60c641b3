//! Regularity functionals measured on discrete fields.
//!
//! Balls are triangle sets: a triangle belongs to `B(c, r)` iff its
//! barycenter does. Integrals of P1 data over those triangles use the
//! edge-midpoint rule, exact for quadratics on each triangle.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::mesh::{dist_to_boundary, gradient, Mesh, RegionMask, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessResult {
    pub r: f64,
    pub g: f64,
    pub m_opt: Vec2,
    pub c_opt: f64,
    pub p: f64,
    /// `(1/r) (avg |v - M x - c|^2)^{1/2}`.
    pub fit_term: f64,
    /// `r (avg |F|^p)^{1/p}`.
    pub source_term: f64,
}

fn check_ball(center: Vec2, r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("radius must be positive, got {r}")));
    }
    if dist_to_boundary(center) < r * (1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "ball B(({}, {}), {r}) is not contained in the unit square",
            center[0], center[1]
        )));
    }
    Ok(())
}

fn ball(mesh: &Mesh, center: Vec2, r: f64) -> Result<RegionMask> {
    check_ball(center, r)?;
    let mask = RegionMask::ball(mesh, center, r);
    if mask.count() == 0 {
        return Err(Error::DegenerateRegion(format!(
            "ball of radius {r} contains no triangle at h = {}",
            mesh.h()
        )));
    }
    Ok(mask)
}

/// Edge midpoints of triangle `t` relative to `center`, with the P1 values
/// of `v` there.
fn midpoints(mesh: &Mesh, v: &[f64], t: usize, center: Vec2) -> [(Vec2, f64); 3] {
    let vs = mesh.triangle_vertices(t);
    let b = mesh.barycenter(t);
    // vertex positions unwrapped around the barycenter (periodic meshes)
    let pos = |k: usize| {
        let p = mesh.coord(vs[k]);
        let fix = |x: f64, bx: f64| if x - bx > 0.5 { x - 1.0 } else if bx - x > 0.5 { x + 1.0 } else { x };
        [fix(p[0], b[0]) - center[0], fix(p[1], b[1]) - center[1]]
    };
    let p = [pos(0), pos(1), pos(2)];
    let mut out = [([0.0; 2], 0.0); 3];
    for (e, (a, c)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
        out[e] = (
            [0.5 * (p[a][0] + p[c][0]), 0.5 * (p[a][1] + p[c][1])],
            0.5 * (v[vs[a]] + v[vs[c]]),
        );
    }
    out
}

/// `(area, (avg |F|^p)^{1/p})` over the mask.
fn source_average(mesh: &Mesh, f: &[f64], mask: &RegionMask, p: f64) -> (f64, f64) {
    let mut acc = 0.0;
    let mut area = 0.0;
    let w = mesh.triangle_area() / 3.0;
    for t in mask.triangles() {
        for (_, fv) in midpoints(mesh, f, t, [0.0, 0.0]) {
            acc += w * fv.abs().powf(p);
            area += w;
        }
    }
    (area, (acc / area).powf(1.0 / p))
}

fn fit(mesh: &Mesh, v: &[f64], f: &[f64], center: Vec2, r: f64, p: f64, affine: bool) -> Result<ExcessResult> {
    mesh.check_nodal(v, "excess field")?;
    mesh.check_nodal(f, "excess source")?;
    if !(p > 2.0) {
        return Err(Error::invalid(format!("exponent p must exceed 2, got {p}")));
    }
    let mask = ball(mesh, center, r)?;
    let w = mesh.triangle_area() / 3.0;
    // normal equations in centred, scaled coordinates: basis (1, (x - c) / r)
    let mut a = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    let mut area = 0.0;
    for t in mask.triangles() {
        for (x, val) in midpoints(mesh, v, t, center) {
            let phi = [1.0, x[0] / r, x[1] / r];
            for i in 0..3 {
                rhs[i] += w * phi[i] * val;
                for j in 0..3 {
                    a[i][j] += w * phi[i] * phi[j];
                }
            }
        }
        area += mesh.triangle_area();
    }
    let coef = if affine {
        solve_dense(a, rhs).ok_or_else(|| Error::DegenerateRegion("singular affine fit".into()))?
    } else {
        [rhs[0] / a[0][0], 0.0, 0.0]
    };
    let mut res = 0.0;
    for t in mask.triangles() {
        for (x, val) in midpoints(mesh, v, t, center) {
            let e = val - coef[0] - (coef[1] * x[0] + coef[2] * x[1]) / r;
            res += w * e * e;
        }
    }
    let fit_term = (res / area).max(0.0).sqrt() / r;
    let (_, favg) = source_average(mesh, f, &mask, p);
    let source_term = r * favg;
    let m_opt = [coef[1] / r, coef[2] / r];
    Ok(ExcessResult {
        r,
        g: fit_term + source_term,
        m_opt,
        c_opt: coef[0] - m_opt[0] * center[0] - m_opt[1] * center[1],
        p,
        fit_term,
        source_term,
    })
}

/// Affine excess `G(r, v)` on `B(center, r)`.
pub fn excess(mesh: &Mesh, v: &[f64], f: &[f64], center: Vec2, r: f64, p: f64) -> Result<ExcessResult> {
    fit(mesh, v, f, center, r, p, true)
}

/// Oscillation `Phi(r)`: the excess with the slope fixed to zero.
pub fn oscillation(mesh: &Mesh, v: &[f64], f: &[f64], center: Vec2, r: f64, p: f64) -> Result<ExcessResult> {
    fit(mesh, v, f, center, r, p, false)
}

fn grad_average(mesh: &Mesh, grads: &[Vec2], mask: &RegionMask, q: f64) -> f64 {
    let mut acc = 0.0;
    let mut cnt = 0usize;
    for t in mask.triangles() {
        let g = grads[t];
        acc += (g[0] * g[0] + g[1] * g[1]).powf(0.5 * q);
        cnt += 1;
    }
    let _ = mesh;
    (acc / cnt as f64).powf(1.0 / q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub r: f64,
    /// `(avg_{B(r)} |grad u|^2)^{1/2}`.
    pub avg_grad: f64,
    /// `r (avg_{B(r)} |F|^p)^{1/p}`.
    pub source_term: f64,
}

/// Averaged gradient on concentric balls.
pub fn lipschitz_profile(
    mesh: &Mesh,
    u: &[f64],
    f: &[f64],
    center: Vec2,
    radii: &[f64],
    p: f64,
) -> Result<Vec<ProfileRow>> {
    mesh.check_nodal(f, "profile source")?;
    if radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("radii must be strictly increasing"));
    }
    if !(p > 2.0) {
        return Err(Error::invalid(format!("exponent p must exceed 2, got {p}")));
    }
    let grads = gradient(mesh, u)?;
    radii
        .iter()
        .map(|&r| {
            let mask = ball(mesh, center, r)?;
            let (_, favg) = source_average(mesh, f, &mask, p);
            Ok(ProfileRow {
                r,
                avg_grad: grad_average(mesh, &grads, &mask, 2.0),
                source_term: r * favg,
            })
        })
        .collect()
}

/// `max_r avg_grad(r) / (avg_grad(R) + source_term(R))` with `R` the
/// largest radius; `0` when both vanish.
pub fn profile_constant(rows: &[ProfileRow]) -> f64 {
    let Some(last) = rows.last() else { return 0.0 };
    let top = rows.iter().fold(0.0_f64, |m, r| m.max(r.avg_grad));
    let den = last.avg_grad + last.source_term;
    if den == 0.0 {
        0.0
    } else {
        top / den
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityRow {
    pub r: f64,
    pub ratio: f64,
    /// Both averages vanished and `ratio` was set to 0.
    pub degenerate: bool,
}

/// Reverse Hoelder ratios `(avg_{B(r)} |grad u|^p)^{1/p} / (avg_{B(2r)} |grad u|^2)^{1/2}`.
pub fn gradient_integrability(
    mesh: &Mesh,
    u: &[f64],
    p: f64,
    center: Vec2,
    radii: &[f64],
) -> Result<Vec<IntegrabilityRow>> {
    if !(p > 2.0) {
        return Err(Error::invalid(format!("exponent p must exceed 2, got {p}")));
    }
    let grads = gradient(mesh, u)?;
    radii
        .iter()
        .map(|&r| {
            let inner = ball(mesh, center, r)?;
            let outer = ball(mesh, center, 2.0 * r)?;
            let num = grad_average(mesh, &grads, &inner, p);
            let den = grad_average(mesh, &grads, &outer, 2.0);
            Ok(if den == 0.0 {
                IntegrabilityRow { r, ratio: 0.0, degenerate: true }
            } else {
                IntegrabilityRow { r, ratio: num / den, degenerate: false }
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub r: f64,
    pub theta: f64,
    pub g_r: f64,
    pub g_theta_r: f64,
    /// `G(theta r) / G(r)`; `0` for degenerate rows, `NaN` when unresolved.
    pub ratio: f64,
    /// `theta r >= 8 h`.
    pub resolved: bool,
    /// `G(r)` is at round-off level.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub rows: Vec<DecayRow>,
    /// Some `theta` has every tested `r` resolved with ratio `<= 1/2`.
    pub decay_witnessed: bool,
    pub witness: Option<f64>,
}

/// Relative round-off level below which an excess counts as zero.
const EXCESS_FLOOR: f64 = 1e-10;

/// Ratio table `G(theta r) / G(r)`. Pairs with `theta r < 8 h` are kept in
/// the table but marked unresolved and excluded from the witness search.
pub fn excess_decay_check(
    mesh: &Mesh,
    u0: &[f64],
    f: &[f64],
    center: Vec2,
    r_list: &[f64],
    thetas: &[f64],
    p: f64,
) -> Result<DecayTable> {
    if r_list.is_empty() || thetas.is_empty() {
        return Err(Error::invalid("decay check needs radii and theta candidates"));
    }
    if thetas.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(Error::invalid("theta candidates must lie in (0, 1)"));
    }
    let min_scale = 8.0 * mesh.h();
    let r_min = r_list.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_max = thetas.iter().cloned().fold(0.0, f64::max);
    if t_max * r_min < min_scale {
        return Err(Error::Resolution(format!(
            "theta r = {} is below 8h = {min_scale} for every candidate",
            t_max * r_min
        )));
    }
    let mut rows = Vec::new();
    for &r in r_list {
        let big = excess(mesh, u0, f, center, r, p)?;
        let scale = big.c_opt.abs() + (big.m_opt[0].abs() + big.m_opt[1].abs()) * r + 1.0;
        let degenerate = big.source_term == 0.0 && big.fit_term * r <= EXCESS_FLOOR * scale;
        for &theta in thetas {
            let resolved = theta * r >= min_scale;
            let (g_theta_r, ratio) = if !resolved {
                (f64::NAN, f64::NAN)
            } else {
                let small = excess(mesh, u0, f, center, theta * r, p)?;
                let ratio = if degenerate { 0.0 } else { small.g / big.g };
                (small.g, ratio)
            };
            rows.push(DecayRow {
                r,
                theta,
                g_r: big.g,
                g_theta_r,
                ratio,
                resolved,
                degenerate,
            });
        }
    }
    let witness = thetas.iter().copied().find(|&th| {
        rows.iter()
            .filter(|row| row.theta == th)
            .all(|row| row.resolved && row.ratio <= 0.5)
    });
    Ok(DecayTable {
        rows,
        decay_witnessed: witness.is_some(),
        witness,
    })
}

/// One line of a probe CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub probe: &'static str,
    pub center: Vec2,
    pub r: f64,
    pub theta: Option<f64>,
    pub p: Option<f64>,
    pub value: f64,
}

pub const PROBE_HEADER: &str = "probe,center_x,center_y,r,theta,p,value";

impl ProbeRow {
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
        format!(
            "{},{:.16e},{:.16e},{:.16e},{},{},{:.16e}",
            self.probe,
            self.center[0],
            self.center[1],
            self.r,
            opt(self.theta),
            opt(self.p),
            self.value
        )
    }
}

pub fn write_probe_csv(rows: &[ProbeRow], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{PROBE_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Convenience wrapper writing probe rows to `path` (no metadata line).
pub fn write_probe_file(rows: &[ProbeRow], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_probe_csv(rows, &mut buf).map_err(|e| Error::io(path, e))?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
