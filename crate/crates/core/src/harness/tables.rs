use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::cell::{build_effective_table, CorrectorTable, EffectiveTable};
use crate::coefficients::{CoefficientModel, ModelKind};
use crate::error::Result;
use crate::harness::config::XiTableConfig;
use crate::solver::SolveOptions;

/// Content address of a table: `(model, g_max, m, n)`.
pub fn cache_key(model: ModelKind, xi: &XiTableConfig) -> String {
    let text = format!("{model}|{:?}|{}|{}", xi.g_max, xi.m, xi.n_cell);
    hex::encode(Sha256::digest(text.as_bytes()))[..16].to_string()
}

pub fn cache_path(dir: &Path, model: ModelKind, xi: &XiTableConfig) -> PathBuf {
    dir.join(format!("{model}-{}", cache_key(model, xi)))
}

fn matches(t: &EffectiveTable, model: ModelKind, xi: &XiTableConfig) -> bool {
    t.model == model && t.g_max == xi.g_max && t.m == xi.m && t.n == xi.n_cell
}

/// Loads the tables from `cache` when an exact match is stored there,
/// otherwise builds them (and stores them when a cache is given).
pub fn load_or_build(
    model: ModelKind,
    xi: &XiTableConfig,
    opts: &SolveOptions,
    cache: Option<&Path>,
) -> Result<(EffectiveTable, CorrectorTable)> {
    if let Some(dir) = cache {
        let path = cache_path(dir, model, xi);
        if path.join("table.json").exists() {
            match CorrectorTable::load(&path) {
                Ok((e, c)) if matches(&e, model, xi) => {
                    log::info!("reusing cached table {}", path.display());
                    return Ok((e, c));
                }
                Ok(_) => log::warn!("cached table {} does not match; rebuilding", path.display()),
                Err(e) => log::warn!("unreadable cached table {}: {e}; rebuilding", path.display()),
            }
        }
    }
    log::info!("building {model} table: g_max {} m {} n {}", xi.g_max, xi.m, xi.n_cell);
    let (e, c) = build_effective_table(&CoefficientModel::new(model), xi.g_max, xi.m, xi.n_cell, opts)?;
    if let Some(dir) = cache {
        c.save(&e, &cache_path(dir, model, xi))?;
    }
    Ok((e, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_roundtrip_and_key() {
        let xi = XiTableConfig { g_max: 1.0, m: 3, n_cell: 16 };
        let other = XiTableConfig { m: 5, ..xi };
        assert_ne!(cache_key(ModelKind::Laminate, &xi), cache_key(ModelKind::Laminate, &other));
        assert_ne!(cache_key(ModelKind::Laminate, &xi), cache_key(ModelKind::Smooth2d, &xi));
        let dir = tempfile::tempdir().unwrap();
        let opts = SolveOptions::default();
        let (a, ca) = load_or_build(ModelKind::Laminate, &xi, &opts, Some(dir.path())).unwrap();
        assert!(cache_path(dir.path(), ModelKind::Laminate, &xi).join("table.json").exists());
        let (b, cb) = load_or_build(ModelKind::Laminate, &xi, &opts, Some(dir.path())).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
    }
}
