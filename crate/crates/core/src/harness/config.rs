use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bvp::{period_count, FieldSpec, MIN_CELLS_PER_PERIOD};
use crate::cell::XiGrid;
use crate::coefficients::ModelKind;
use crate::error::{Error, Result};
use crate::mesh::Vec2;
use crate::solver::SolveOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Rates,
    Excess,
    Lipschitz,
    Integrability,
    Cell,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rates => "rates",
            Self::Excess => "excess",
            Self::Lipschitz => "lipschitz",
            Self::Integrability => "integrability",
            Self::Cell => "cell",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XiTableConfig {
    pub g_max: f64,
    pub m: usize,
    pub n_cell: usize,
}

impl Default for XiTableConfig {
    fn default() -> Self {
        Self {
            g_max: 4.0,
            m: 9,
            n_cell: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub center: Vec2,
    /// Radii for profiles, ratios and the decay table; a per-study default
    /// applies when empty.
    pub radii: Vec<f64>,
    pub thetas: Vec<f64>,
    pub p: f64,
    /// Mesh size for the homogenized excess study.
    pub n: usize,
    /// Use the closed-form effective map when the model has one.
    pub closed_form: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            center: [0.5, 0.5],
            radii: Vec::new(),
            thetas: vec![0.25, 0.125, 0.0625],
            p: 4.0,
            n: 1024,
            closed_form: true,
        }
    }
}

fn default_epsilons() -> Vec<f64> {
    vec![0.125, 0.0625, 0.03125]
}

fn default_n_per() -> usize {
    MIN_CELLS_PER_PERIOD
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_g() -> FieldSpec {
    FieldSpec::LinearX
}

fn default_f() -> FieldSpec {
    FieldSpec::Zero
}

/// A study description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub model: ModelKind,
    pub study: StudyKind,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_n_per")]
    pub n_per: usize,
    #[serde(default = "default_g")]
    pub g: FieldSpec,
    #[serde(rename = "F", default = "default_f")]
    pub f: FieldSpec,
    #[serde(default)]
    pub xi_table: XiTableConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: SolveOptions,
    #[serde(default)]
    pub probe: ProbeConfig,
    /// Write per-eps field CSVs next to the study CSV.
    #[serde(default)]
    pub write_fields: bool,
    /// Table cache directory; defaults to `<output_dir>/tables`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

impl StudyConfig {
    pub fn new(model: ModelKind, study: StudyKind) -> Self {
        Self {
            model,
            study,
            epsilons: default_epsilons(),
            n_per: default_n_per(),
            g: default_g(),
            f: default_f(),
            xi_table: XiTableConfig::default(),
            output_dir: default_output(),
            seed: 0,
            tolerances: SolveOptions::default(),
            probe: ProbeConfig::default(),
            write_fields: false,
            cache_dir: None,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.study != StudyKind::Cell && self.study != StudyKind::Excess {
            if self.epsilons.is_empty() {
                return bad("epsilons must not be empty".into());
            }
            if self.epsilons.windows(2).any(|w| w[0] <= w[1]) {
                return bad(format!("epsilons must be strictly decreasing, got {:?}", self.epsilons));
            }
            for &e in &self.epsilons {
                if period_count(e).is_none() {
                    return bad(format!("epsilon {e} is not the reciprocal of an integer"));
                }
            }
        }
        if self.n_per < MIN_CELLS_PER_PERIOD {
            return bad(format!("n_per = {} is below {MIN_CELLS_PER_PERIOD}", self.n_per));
        }
        XiGrid::new(self.xi_table.g_max, self.xi_table.m).map_err(|e| Error::Config(e.to_string()))?;
        if self.xi_table.n_cell < 16 || self.xi_table.n_cell % 2 != 0 {
            return bad(format!("xi_table.n_cell must be even and >= 16, got {}", self.xi_table.n_cell));
        }
        if !(self.probe.p > 2.0) {
            return bad(format!("probe.p must exceed 2, got {}", self.probe.p));
        }
        if self.probe.radii.windows(2).any(|w| w[0] >= w[1]) {
            return bad("probe.radii must be strictly increasing".into());
        }
        Ok(())
    }

    /// Mesh size for period `eps`.
    pub fn mesh_size(&self, eps: f64) -> Result<usize> {
        let k = period_count(eps).ok_or_else(|| Error::Config(format!("bad epsilon {eps}")))?;
        Ok(self.n_per * k)
    }

    /// SHA-256 over the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_minimal_and_defaults() {
        let cfg: StudyConfig = serde_json::from_str(r#"{"model":"laminate","study":"rates"}"#).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_per, 32);
        assert_eq!(cfg.epsilons, vec![0.125, 0.0625, 0.03125]);
        assert_eq!(cfg.mesh_size(0.03125).unwrap(), 1024);
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            r#"{"model":"laminate","study":"rates","epsilons":[0.0625,0.125]}"#,
            r#"{"model":"laminate","study":"rates","epsilons":[0.3]}"#,
            r#"{"model":"laminate","study":"rates","n_per":16}"#,
            r#"{"model":"laminate","study":"rates","xi_table":{"m":4}}"#,
        ];
        for c in cases {
            let cfg: StudyConfig = serde_json::from_str(c).unwrap();
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{c}");
        }
        assert!(serde_json::from_str::<StudyConfig>(r#"{"model":"nope","study":"rates"}"#).is_err());
        assert!(serde_json::from_str::<StudyConfig>(r#"{"model":"laminate","study":"rates","extra":1}"#).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = StudyConfig::new(ModelKind::Laminate, StudyKind::Rates);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn missing_file_names_path() {
        let err = StudyConfig::from_file(Path::new("definitely-missing.json")).unwrap_err();
        assert!(err.to_string().contains("definitely-missing.json"));
    }
}
