//! Batch studies: configuration, table cache, sweeps over `eps`, slope
//! fits and report files.

pub mod config;
pub mod fit;
pub mod output;
pub mod rates;
pub mod studies;
pub mod tables;

pub use config::{ProbeConfig, StudyConfig, StudyKind, XiTableConfig};
pub use fit::{fit_slope, SlopeFit};
pub use rates::{run_rate_study, RateStudy};
pub use studies::{run_probe_study, CellStudy, IntegrabilityStudy, LipschitzStudy};

use crate::error::Result;

/// Runs whichever study `cfg` describes and returns its report.
pub fn run_study(cfg: &StudyConfig) -> Result<serde_json::Value> {
    match cfg.study {
        StudyKind::Rates => {
            let study = run_rate_study(cfg)?;
            Ok(rates::rate_report(cfg, &study))
        }
        _ => run_probe_study(cfg),
    }
}
