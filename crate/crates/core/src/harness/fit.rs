use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Some `y` was zero and was replaced by machine epsilon.
    pub floored: bool,
    /// Every `y` was zero: nothing was fitted.
    pub degenerate: bool,
}

/// Least-squares line through `(ln x, ln y)`.
///
/// Zero `y` values are floored at machine epsilon and flagged. If every
/// `y` is zero the fit is reported as degenerate with zero slope.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::invalid(format!("slope fit needs at least 2 points, got {}", points.len())));
    }
    let mut floored = false;
    let mut logs = Vec::with_capacity(points.len());
    for &(x, y) in points {
        if !(x > 0.0 && x.is_finite()) || !(y >= 0.0 && y.is_finite()) {
            return Err(Error::invalid(format!("slope fit needs positive coordinates, got ({x}, {y})")));
        }
        let y = if y == 0.0 {
            floored = true;
            f64::EPSILON
        } else {
            y
        };
        logs.push((x.ln(), y.ln()));
    }
    if points.iter().all(|p| p.1 == 0.0) {
        return Ok(SlopeFit {
            slope: 0.0,
            intercept: f64::EPSILON.ln(),
            r_squared: 1.0,
            floored,
            degenerate: true,
        });
    }
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("slope fit needs distinct x values"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        floored,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_laws() {
        let f = fit_slope(&[(0.25, 0.5), (1.0 / 16.0, 0.25)]).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-15);
        let f = fit_slope(&[(1.0, 1.0), (2.0, 2.0), (4.0, 4.0)]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-15 && (f.r_squared - 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors_and_flooring() {
        assert!(fit_slope(&[(1.0, 1.0)]).is_err());
        assert!(fit_slope(&[(0.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(fit_slope(&[(1.0, -1.0), (2.0, 1.0)]).is_err());
        let f = fit_slope(&[(1.0, 0.0), (2.0, 1.0)]).unwrap();
        assert!(f.floored && !f.degenerate);
        let f = fit_slope(&[(1.0, 0.0), (2.0, 0.0), (4.0, 0.0)]).unwrap();
        assert!(f.degenerate);
    }

    proptest! {
        #[test]
        fn recovers_power_law(a in -3.0..3.0f64, c in 0.1..10.0f64) {
            let pts: Vec<(f64, f64)> = [0.5, 0.25, 0.125, 0.0625].iter().map(|&x: &f64| (x, c * x.powf(a))).collect();
            let f = fit_slope(&pts).unwrap();
            prop_assert!((f.slope - a).abs() < 1e-10);
            prop_assert!((f.intercept - c.ln()).abs() < 1e-10);
        }
    }
}
