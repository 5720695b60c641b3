//! Dirichlet problems on the unit square: the oscillating problem
//! `-div A(x/eps, grad u) = F` and the homogenized `-div A_eff(grad u) = F`.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cell::EffectiveTable;
use crate::coefficients::{CoefficientModel, ModelKind};
use crate::error::{Error, Result};
use crate::mesh::{read_scalar_csv, Mesh, Vec2};
use crate::solver::{solve_monotone, ScaledModelFlux, SolveOptions, SolveReport, TriangleFlux};

/// Minimum number of mesh cells per period.
pub const MIN_CELLS_PER_PERIOD: usize = 32;

/// Named analytic function of `x`, or a nodal field file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FieldSpec {
    Zero,
    One,
    Constant(f64),
    LinearX,
    LinearY,
    Affine(f64, f64, f64),
    /// `exp(-1 / (1 - |4 (x - c)|^2))` inside `|x - c| < 1/4`.
    Bump(Vec2),
    /// `|x - (1/2, 1/2)|^2 / 4`.
    QuadraticRadial,
    File(PathBuf),
}

fn parse_args<const K: usize>(s: &str, name: &str) -> Option<[f64; K]> {
    let inner = s.strip_prefix(name)?.strip_prefix('(')?.strip_suffix(')')?;
    let vals: Vec<f64> = inner
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .ok()?;
    vals.try_into().ok()
}

impl FromStr for FieldSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let spec = match s {
            "zero" => Self::Zero,
            "one" => Self::One,
            "linear-x" => Self::LinearX,
            "linear-y" => Self::LinearY,
            "bump" => Self::Bump([0.5, 0.5]),
            "quadratic-radial" => Self::QuadraticRadial,
            _ => {
                if let Some(path) = s.strip_prefix("file:") {
                    Self::File(PathBuf::from(path))
                } else if let Some([a, b, c]) = parse_args::<3>(s, "affine") {
                    Self::Affine(a, b, c)
                } else if let Some([cx, cy]) = parse_args::<2>(s, "bump") {
                    Self::Bump([cx, cy])
                } else if let Some([c]) = parse_args::<1>(s, "constant") {
                    Self::Constant(c)
                } else {
                    return Err(Error::Config(format!("unknown field descriptor '{s}'")));
                }
            }
        };
        Ok(spec)
    }
}

impl TryFrom<String> for FieldSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FieldSpec> for String {
    fn from(f: FieldSpec) -> String {
        f.to_string()
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "zero"),
            Self::One => write!(f, "one"),
            Self::Constant(c) => write!(f, "constant({c})"),
            Self::LinearX => write!(f, "linear-x"),
            Self::LinearY => write!(f, "linear-y"),
            Self::Affine(a, b, c) => write!(f, "affine({a},{b},{c})"),
            Self::Bump(c) if *c == [0.5, 0.5] => write!(f, "bump"),
            Self::Bump(c) => write!(f, "bump({},{})", c[0], c[1]),
            Self::QuadraticRadial => write!(f, "quadratic-radial"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// `exp(-1 / (1 - |4 (x - c)|^2))`, zero outside the disk of radius 1/4.
pub fn bump(x: Vec2, c: Vec2) -> f64 {
    let s = 16.0 * ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2));
    if s < 1.0 {
        (-1.0 / (1.0 - s)).exp()
    } else {
        0.0
    }
}

impl FieldSpec {
    /// Value at `x`; `None` for file-backed fields.
    pub fn eval(&self, x: Vec2) -> Option<f64> {
        Some(match self {
            Self::Zero => 0.0,
            Self::One => 1.0,
            Self::Constant(c) => *c,
            Self::LinearX => x[0],
            Self::LinearY => x[1],
            Self::Affine(a, b, c) => a * x[0] + b * x[1] + c,
            Self::Bump(c) => bump(x, *c),
            Self::QuadraticRadial => ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)) / 4.0,
            Self::File(_) => return None,
        })
    }

    pub fn sample(&self, mesh: &Mesh) -> Result<Vec<f64>> {
        match self {
            Self::File(p) => read_scalar_csv(mesh, p),
            _ => Ok(mesh.interpolate(|x| self.eval(x).expect("analytic field"))),
        }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, Self::File(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvpSpec {
    pub model: ModelKind,
    /// Period; `0` for the homogenized problem.
    pub epsilon: f64,
    pub source: FieldSpec,
    pub boundary: FieldSpec,
    pub n: usize,
    #[serde(default)]
    pub opts: SolveOptions,
}

/// `k` with `eps = 1/k`, if `eps` is such a reciprocal.
pub fn period_count(eps: f64) -> Option<usize> {
    if !(eps > 0.0 && eps <= 1.0) {
        return None;
    }
    let k = (1.0 / eps).round();
    ((k * eps - 1.0).abs() < 1e-12).then_some(k as usize)
}

impl BvpSpec {
    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::dirichlet(self.n)
    }

    /// Checks `eps = 1/k`, `k | n` and `n eps >= 32`.
    pub fn check_resolution(&self) -> Result<usize> {
        let k = period_count(self.epsilon).ok_or_else(|| {
            Error::invalid(format!("epsilon = {} is not 1/k for an integer k", self.epsilon))
        })?;
        if self.n % k != 0 || self.n / k < MIN_CELLS_PER_PERIOD {
            return Err(Error::invalid(format!(
                "n = {} does not resolve epsilon = 1/{k}: need n a multiple of {k} with n * epsilon >= {MIN_CELLS_PER_PERIOD}",
                self.n
            )));
        }
        Ok(k)
    }

    fn data(&self, mesh: &Mesh) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.source.sample(mesh)?, self.boundary.sample(mesh)?))
    }
}

/// Solves the oscillating problem on the `n x n` Dirichlet mesh.
pub fn solve_multiscale(spec: &BvpSpec) -> Result<(Vec<f64>, SolveReport)> {
    spec.check_resolution()?;
    let mesh = spec.mesh()?;
    let (f, g) = spec.data(&mesh)?;
    let flux = ScaledModelFlux {
        model: CoefficientModel::new(spec.model),
        eps: spec.epsilon,
    };
    solve_monotone(&mesh, &flux, &f, Some(&g), None, &spec.opts)
}

/// The effective map used by the homogenized problem.
#[derive(Debug, Clone)]
pub enum EffectiveOperator {
    /// `z -> M z` for a constant matrix.
    Linear([[f64; 2]; 2]),
    /// Bilinear interpolation of a tabulated effective flux.
    Table {
        table: EffectiveTable,
        mu0: f64,
        lipschitz: f64,
    },
}

impl EffectiveOperator {
    pub fn identity() -> Self {
        Self::Linear([[1.0, 0.0], [0.0, 1.0]])
    }

    /// Closed-form laminate map `diag(sqrt 3, 2)`.
    pub fn laminate() -> Self {
        Self::Linear([[3f64.sqrt(), 0.0], [0.0, 2.0]])
    }

    /// Table-backed map. The step uses the model's `mu0` and the largest
    /// difference quotient between neighbouring table nodes.
    pub fn from_table(table: EffectiveTable) -> Self {
        let mu0 = CoefficientModel::new(table.model).mu0;
        let lipschitz = neighbour_lipschitz(&table).max(mu0);
        Self::Table {
            table,
            mu0,
            lipschitz,
        }
    }
}

fn neighbour_lipschitz(table: &EffectiveTable) -> f64 {
    let m = table.m;
    let d = table.grid().spacing();
    let mut lip: f64 = 0.0;
    for j in 0..m {
        for i in 0..m {
            let a = table.a_eff[j * m + i];
            for nb in [(i + 1 < m).then(|| j * m + i + 1), (j + 1 < m).then(|| (j + 1) * m + i)]
                .into_iter()
                .flatten()
            {
                let b = table.a_eff[nb];
                lip = lip.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt() / d);
            }
        }
    }
    lip
}

impl TriangleFlux for EffectiveOperator {
    fn eval(&self, _x: Vec2, z: Vec2) -> Result<Vec2> {
        match self {
            Self::Linear(m) => Ok([m[0][0] * z[0] + m[0][1] * z[1], m[1][0] * z[0] + m[1][1] * z[1]]),
            Self::Table { table, .. } => table.eval(z),
        }
    }

    fn constants(&self) -> (f64, f64) {
        match self {
            Self::Linear(m) => {
                // coercivity from the symmetric part, growth from the spectral norm
                let (a, b, c) = (m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1]);
                let mu0 = 0.5 * (a + c) - (0.25 * (a - c).powi(2) + b * b).sqrt();
                let g = [
                    m[0][0] * m[0][0] + m[1][0] * m[1][0],
                    m[0][0] * m[0][1] + m[1][0] * m[1][1],
                    m[0][1] * m[0][1] + m[1][1] * m[1][1],
                ];
                let top = 0.5 * (g[0] + g[2]) + (0.25 * (g[0] - g[2]).powi(2) + g[1] * g[1]).sqrt();
                (mu0, top.sqrt())
            }
            Self::Table { mu0, lipschitz, .. } => (*mu0, *lipschitz),
        }
    }
}

/// Solves the homogenized problem on the `n x n` Dirichlet mesh.
pub fn solve_homogenized(spec: &BvpSpec, effective: &EffectiveOperator) -> Result<(Vec<f64>, SolveReport)> {
    let mesh = spec.mesh()?;
    let (f, g) = spec.data(&mesh)?;
    let (mu0, _) = effective.constants();
    if !(mu0 > 0.0) {
        return Err(Error::invalid("effective map is not coercive"));
    }
    solve_monotone(&mesh, effective, &f, Some(&g), None, &spec.opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::build_effective_table;
    use crate::mesh::{h1_semi, l2, norm, FieldRef, NormKind};

    fn spec(model: ModelKind, eps: f64, f: &str, g: &str, n: usize) -> BvpSpec {
        BvpSpec {
            model,
            epsilon: eps,
            source: f.parse().unwrap(),
            boundary: g.parse().unwrap(),
            n,
            opts: SolveOptions::default(),
        }
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn descriptors_roundtrip() {
        for s in ["zero", "one", "linear-x", "linear-y", "affine(1,0.5,0)", "bump", "bump(0.25,0.75)", "quadratic-radial", "constant(-1)", "file:data/f.csv"] {
            let f: FieldSpec = s.parse().unwrap();
            assert_eq!(f.to_string(), s);
            let back: FieldSpec = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
            assert_eq!(back, f);
        }
        assert!("wiggle".parse::<FieldSpec>().is_err());
        assert!("affine(1,2)".parse::<FieldSpec>().is_err());
        assert_eq!(FieldSpec::Affine(1.0, 0.5, 0.0).eval([0.2, 0.4]), Some(0.4));
        assert_eq!(bump([0.5, 0.5], [0.5, 0.5]), (-1f64).exp());
        assert_eq!(bump([0.76, 0.5], [0.5, 0.5]), 0.0);
    }

    #[test]
    fn resolution_contract() {
        let ok = spec(ModelKind::Laminate, 0.125, "zero", "linear-x", 256);
        assert_eq!(ok.check_resolution().unwrap(), 8);
        for (eps, n) in [(0.125, 128), (0.3, 512), (0.125, 260), (0.0, 256)] {
            let s = spec(ModelKind::Laminate, eps, "zero", "linear-x", n);
            assert!(matches!(solve_multiscale(&s), Err(Error::InvalidArgument(_))), "{eps} {n}");
        }
    }

    #[test]
    fn identity_affine_exact() {
        let s = spec(ModelKind::Identity, 0.25, "zero", "linear-x", 128);
        let (u, _) = solve_multiscale(&s).unwrap();
        let mesh = s.mesh().unwrap();
        assert!(max_diff(&u, &mesh.interpolate(|p| p[0])) < 1e-12);
    }

    #[test]
    fn transverse_laminate_exact() {
        let s = spec(ModelKind::Laminate, 0.125, "zero", "linear-y", 256);
        let (u, _) = solve_multiscale(&s).unwrap();
        let mesh = s.mesh().unwrap();
        assert!(max_diff(&u, &mesh.interpolate(|p| p[1])) < 1e-12);
    }

    #[test]
    fn homogenized_affine_cases() {
        let s = spec(ModelKind::Identity, 0.0, "zero", "affine(1,2,0)", 32);
        let (u, _) = solve_homogenized(&s, &EffectiveOperator::identity()).unwrap();
        assert!(max_diff(&u, &s.mesh().unwrap().interpolate(|p| p[0] + 2.0 * p[1])) < 1e-12);
        let (eff, _) = build_effective_table(&CoefficientModel::laminate(), 4.0, 9, 32, &SolveOptions::default()).unwrap();
        let op = EffectiveOperator::from_table(eff);
        let s = spec(ModelKind::Laminate, 0.0, "zero", "linear-x", 32);
        let (u, _) = solve_homogenized(&s, &op).unwrap();
        assert!(max_diff(&u, &s.mesh().unwrap().interpolate(|p| p[0])) < 1e-12);
    }

    #[test]
    fn manufactured_quadratic_second_order() {
        let mut errs = Vec::new();
        for n in [32, 64] {
            let s = spec(ModelKind::Identity, 0.0, "constant(-1)", "quadratic-radial", n);
            let (u, _) = solve_homogenized(&s, &EffectiveOperator::identity()).unwrap();
            let mesh = s.mesh().unwrap();
            let exact = FieldSpec::QuadraticRadial.sample(&mesh).unwrap();
            let d: Vec<f64> = u.iter().zip(&exact).map(|(a, b)| a - b).collect();
            let e = l2(&mesh, &d).unwrap();
            assert!(e <= mesh.h() * mesh.h(), "{e}");
            errs.push(e);
        }
        assert!(errs[1] < errs[0] / 3.0 || errs[1] < 1e-12, "{errs:?}");
    }

    #[test]
    fn identity_maximum_principle() {
        let s = spec(ModelKind::Identity, 0.0, "zero", "quadratic-radial", 32);
        let (u, _) = solve_homogenized(&s, &EffectiveOperator::identity()).unwrap();
        let mesh = s.mesh().unwrap();
        let g = FieldSpec::QuadraticRadial.sample(&mesh).unwrap();
        let bnd: Vec<f64> = mesh.boundary_nodes().into_iter().map(|k| g[k]).collect();
        let (lo, hi) = bnd.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
        assert!(u.iter().all(|v| *v >= lo - 1e-14 && *v <= hi + 1e-14));
    }

    #[test]
    fn table_matches_closed_form_laminate() {
        let (eff, _) = build_effective_table(&CoefficientModel::laminate(), 4.0, 9, 128, &SolveOptions::default()).unwrap();
        let s = spec(ModelKind::Laminate, 0.0, "bump", "linear-x", 64);
        let (a, _) = solve_homogenized(&s, &EffectiveOperator::laminate()).unwrap();
        let (b, _) = solve_homogenized(&s, &EffectiveOperator::from_table(eff)).unwrap();
        let mesh = s.mesh().unwrap();
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let e = norm(&mesh, FieldRef::Nodal(&d), NormKind::L2, None).unwrap() + h1_semi(&mesh, &d).unwrap();
        assert!(e < 1e-3, "{e}");
    }

    #[test]
    fn table_range_error_propagates() {
        let (eff, _) = build_effective_table(&CoefficientModel::laminate(), 1.0, 3, 16, &SolveOptions::default()).unwrap();
        let s = spec(ModelKind::Laminate, 0.0, "zero", "affine(3,0,0)", 16);
        assert!(matches!(solve_homogenized(&s, &EffectiveOperator::from_table(eff)), Err(Error::Range(_))));
    }

    #[test]
    fn linear_constants() {
        assert_eq!(EffectiveOperator::laminate().constants(), (3f64.sqrt(), 2.0));
        let (a, b) = EffectiveOperator::Linear([[2.0, 1.0], [-1.0, 2.0]]).constants();
        assert!((a - 2.0).abs() < 1e-14 && (b - 5f64.sqrt()).abs() < 1e-14);
    }
}
