//! Admissible coefficient models `A(y, z)`.
//!
//! Every model is 1-periodic in `y`, vanishes at `z = 0`, is strongly
//! monotone in `z` with constant `mu0` and Lipschitz in `z` with constant
//! `mu2`. The Hölder-in-`y` data (`mu1`, `tau`) is carried as metadata.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// `A(y, z) = z`.
    Identity,
    /// `A(y, z) = (2 + sin 2 pi y1) z`.
    Laminate,
    /// `A(y, z) = (1 + 0.5 sin 2 pi y1 sin 2 pi y2) z`.
    Smooth2d,
    /// `A(y, z) = a(y) (z + 0.5 z / sqrt(1 + |z|^2))` with `a` as in `Smooth2d`.
    Nonlinear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Identity,
        ModelKind::Laminate,
        ModelKind::Smooth2d,
        ModelKind::Nonlinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Identity => "identity",
            ModelKind::Laminate => "laminate",
            ModelKind::Smooth2d => "smooth2d",
            ModelKind::Nonlinear => "nonlinear",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown model '{s}' (expected identity, laminate, smooth2d or nonlinear)"
                ))
            })
    }
}

/// A coefficient model with its certified structural constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientModel {
    pub kind: ModelKind,
    /// Strong monotonicity constant.
    pub mu0: f64,
    /// Lipschitz constant in `z`.
    pub mu2: f64,
    /// Hölder-in-`y` constant (metadata only).
    pub mu1: f64,
    /// Hölder exponent in `y` (metadata only).
    pub tau: f64,
}

#[inline]
fn reduce(t: f64) -> f64 {
    let r = t - t.floor();
    // t slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

#[inline]
fn smooth_weight(y: Vec2) -> f64 {
    1.0 + 0.5 * (2.0 * PI * y[0]).sin() * (2.0 * PI * y[1]).sin()
}

/// Laminate profile `a(t) = 2 + sin 2 pi t`.
#[inline]
pub fn laminate_profile(t: f64) -> f64 {
    2.0 + (2.0 * PI * reduce(t)).sin()
}

impl CoefficientModel {
    pub fn new(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Identity => Self {
                kind,
                mu0: 1.0,
                mu2: 1.0,
                mu1: 0.0,
                tau: 1.0,
            },
            ModelKind::Laminate => Self {
                kind,
                mu0: 1.0,
                mu2: 3.0,
                mu1: 2.0 * PI,
                tau: 1.0,
            },
            ModelKind::Smooth2d => Self {
                kind,
                mu0: 0.5,
                mu2: 1.5,
                mu1: PI * std::f64::consts::SQRT_2,
                tau: 1.0,
            },
            ModelKind::Nonlinear => Self {
                kind,
                mu0: 0.5,
                mu2: 2.25,
                mu1: PI * std::f64::consts::SQRT_2,
                tau: 1.0,
            },
        }
    }

    pub fn identity() -> Self {
        Self::new(ModelKind::Identity)
    }

    pub fn laminate() -> Self {
        Self::new(ModelKind::Laminate)
    }

    pub fn smooth2d() -> Self {
        Self::new(ModelKind::Smooth2d)
    }

    pub fn nonlinear() -> Self {
        Self::new(ModelKind::Nonlinear)
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(Self::new(name.parse()?))
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Default Zarantonello step `mu0 / mu2^2`.
    pub fn default_step(&self) -> f64 {
        self.mu0 / (self.mu2 * self.mu2)
    }

    /// Evaluates `A(y mod 1, z)`. Inputs are assumed finite; see
    /// [`CoefficientModel::flux_checked`].
    #[inline]
    pub fn flux(&self, y: Vec2, z: Vec2) -> Vec2 {
        match self.kind {
            ModelKind::Identity => z,
            ModelKind::Laminate => {
                let a = laminate_profile(y[0]);
                [a * z[0], a * z[1]]
            }
            ModelKind::Smooth2d => {
                let a = smooth_weight([reduce(y[0]), reduce(y[1])]);
                [a * z[0], a * z[1]]
            }
            ModelKind::Nonlinear => {
                let a = smooth_weight([reduce(y[0]), reduce(y[1])]);
                let s = 1.0 + 0.5 / (1.0 + z[0] * z[0] + z[1] * z[1]).sqrt();
                [a * s * z[0], a * s * z[1]]
            }
        }
    }

    pub fn flux_checked(&self, y: Vec2, z: Vec2) -> Result<Vec2> {
        if !(y.iter().chain(z.iter()).all(|v| v.is_finite())) {
            return Err(Error::invalid(format!(
                "non-finite flux argument y = {y:?}, z = {z:?}"
            )));
        }
        Ok(self.flux(y, z))
    }
}

/// Empirical structure constants from random triples `(y, z, z')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureEstimate {
    /// `min <A(y,z) - A(y,z'), z - z'> / |z - z'|^2`.
    pub mu0_emp: f64,
    /// `max |A(y,z) - A(y,z')| / |z - z'|`.
    pub mu2_emp: f64,
}

/// Samples `n_samples` triples with `y` uniform in the unit cell and
/// `z, z'` uniform in `[-10, 10]^2`, reproducibly from `seed`.
pub fn estimate_structure_constants(
    model: &CoefficientModel,
    n_samples: usize,
    seed: u64,
) -> Result<StructureEstimate> {
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mu0_emp = f64::INFINITY;
    let mut mu2_emp: f64 = 0.0;
    let mut taken = 0;
    while taken < n_samples {
        let y = [rng.gen::<f64>(), rng.gen::<f64>()];
        let z = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
        let zp = [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)];
        let dz = [z[0] - zp[0], z[1] - zp[1]];
        let dz2 = dz[0] * dz[0] + dz[1] * dz[1];
        if dz2 == 0.0 {
            continue;
        }
        let a = model.flux(y, z);
        let ap = model.flux(y, zp);
        let da = [a[0] - ap[0], a[1] - ap[1]];
        mu0_emp = mu0_emp.min((da[0] * dz[0] + da[1] * dz[1]) / dz2);
        mu2_emp = mu2_emp.max((da[0] * da[0] + da[1] * da[1]).sqrt() / dz2.sqrt());
        taken += 1;
    }
    Ok(StructureEstimate { mu0_emp, mu2_emp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flux_examples() {
        let id = CoefficientModel::identity();
        assert_eq!(id.flux([0.3, 0.7], [1.0, 2.0]), [1.0, 2.0]);
        let lam = CoefficientModel::laminate();
        let f = lam.flux([0.25, 0.9], [1.0, 0.0]);
        assert!((f[0] - 3.0).abs() < 1e-15 && f[1] == 0.0);
        for m in ModelKind::ALL {
            let m = CoefficientModel::new(m);
            assert_eq!(m.flux([0.37, 0.81], [0.0, 0.0]), [0.0, 0.0]);
        }
    }

    #[test]
    fn flux_rejects_non_finite() {
        let m = CoefficientModel::nonlinear();
        assert!(m.flux_checked([f64::NAN, 0.0], [1.0, 0.0]).is_err());
        assert!(m.flux_checked([0.0, 0.0], [f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn names_roundtrip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
        assert!("foo".parse::<ModelKind>().is_err());
    }

    #[test]
    fn structure_constants_identity_exact() {
        let est = estimate_structure_constants(&CoefficientModel::identity(), 1000, 1).unwrap();
        assert!((est.mu0_emp - 1.0).abs() < 1e-14);
        assert!((est.mu2_emp - 1.0).abs() < 1e-14);
    }

    #[test]
    fn structure_constants_builtins() {
        for k in ModelKind::ALL {
            let m = CoefficientModel::new(k);
            let est = estimate_structure_constants(&m, 10_000, 7).unwrap();
            assert!(est.mu0_emp >= m.mu0 - 1e-10, "{k}: {est:?}");
            assert!(est.mu2_emp <= m.mu2 + 1e-10, "{k}: {est:?}");
        }
    }

    #[test]
    fn structure_constants_reject_zero_samples() {
        assert!(estimate_structure_constants(&CoefficientModel::identity(), 0, 0).is_err());
    }

    proptest! {
        // dyadic y so that y + k is exactly representable
        #[test]
        fn periodic_in_y(i in 0u32..(1 << 20), j in 0u32..(1 << 20), k0 in -5i32..5, k1 in -5i32..5,
                         z0 in -10.0f64..10.0, z1 in -10.0f64..10.0) {
            let y = [i as f64 / (1u64 << 20) as f64, j as f64 / (1u64 << 20) as f64];
            let ys = [y[0] + k0 as f64, y[1] + k1 as f64];
            for k in ModelKind::ALL {
                let m = CoefficientModel::new(k);
                prop_assert_eq!(m.flux(y, [z0, z1]), m.flux(ys, [z0, z1]));
            }
        }
    }
}
