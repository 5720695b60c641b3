use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bvp::{solve_homogenized, solve_multiscale, BvpSpec, EffectiveOperator};
use crate::cell::{CorrectorTable, EffectiveTable};
use crate::coefficients::ModelKind;
use crate::error::{Error, Result};
use crate::expansion::{build_expansion, expansion_errors, ErrorReport};
use crate::harness::config::StudyConfig;
use crate::harness::fit::{fit_slope, SlopeFit};
use crate::harness::output::{num, write_csv, write_json};
use crate::harness::tables::load_or_build;
use crate::mesh::{write_scalar_csv, Mesh};

pub const RATE_HEADER: &str = "epsilon,h,l2_error,h1_expansion_error,layer_norm,colayer_hess";

/// Fixed thresholds reported in `report.json`.
pub const SLOPE_L2_MIN: f64 = 0.45;
pub const SLOPE_H1_MIN: f64 = 0.35;
pub const R_SQUARED_MIN: f64 = 0.98;
pub const LAYER_SLOPE_MIN: f64 = 0.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudy {
    pub rows: Vec<ErrorReport>,
    pub slope_l2: SlopeFit,
    pub slope_h1: SlopeFit,
    pub slope_layer: SlopeFit,
    /// Every error column vanished identically.
    pub degenerate_exact: bool,
    pub config_hash: String,
}

impl RateStudy {
    pub fn csv_rows(&self) -> Vec<String> {
        self.rows.iter().map(rate_row).collect()
    }
}

fn rate_row(r: &ErrorReport) -> String {
    format!(
        "{},{},{},{},{},{}",
        num(r.epsilon),
        num(r.h),
        num(r.l2_error),
        num(r.h1_expansion_error),
        num(r.layer_norm),
        num(r.colayer_hess)
    )
}

/// One finished rate job; `fields` holds `(u_eps, u0, v_eps)` when the
/// config asks for field output.
pub struct JobOutput {
    pub report: ErrorReport,
    pub fields: Option<(Mesh, [Vec<f64>; 3])>,
}

/// Effective map used for the homogenized problem: the exact identity for
/// the identity model, the interpolated table otherwise.
pub fn effective_for(model: ModelKind, table: &EffectiveTable) -> EffectiveOperator {
    match model {
        ModelKind::Identity => EffectiveOperator::identity(),
        _ => EffectiveOperator::from_table(table.clone()),
    }
}

fn rate_job(cfg: &StudyConfig, eps: f64, op: &EffectiveOperator, ctable: &CorrectorTable) -> Result<JobOutput> {
    let n = cfg.mesh_size(eps)?;
    let spec = BvpSpec {
        model: cfg.model,
        epsilon: eps,
        source: cfg.f.clone(),
        boundary: cfg.g.clone(),
        n,
        opts: cfg.tolerances,
    };
    let mesh = spec.mesh()?;
    let (u_eps, rep_eps) = solve_multiscale(&spec)?;
    let (u0, rep0) = solve_homogenized(&spec, op)?;
    log::info!(
        "eps {eps}: n {n}, {} + {} iterations",
        rep_eps.iterations,
        rep0.iterations
    );
    let v = build_expansion(&u0, ctable, eps, &mesh)?;
    let report = expansion_errors(&u_eps, &u0, &v, &mesh, eps)?;
    let fields = cfg.write_fields.then(|| (mesh, [u_eps, u0, v]));
    Ok(JobOutput { report, fields })
}

/// Rate study with tables already in hand; writes nothing.
pub fn compute_rate_study(
    cfg: &StudyConfig,
    table: &EffectiveTable,
    ctable: &CorrectorTable,
) -> (Vec<Result<JobOutput>>, String) {
    let op = effective_for(cfg.model, table);
    let results = cfg
        .epsilons
        .par_iter()
        .map(|&eps| {
            rate_job(cfg, eps, &op, ctable).map_err(|e| Error::StudyJob {
                    eps,
                    source: Box::new(e),
                })
        })
        .collect();
    (results, cfg.hash())
}

pub fn fit_rows(rows: &[ErrorReport], config_hash: String) -> Result<RateStudy> {
    let pts = |f: fn(&ErrorReport) -> f64| -> Vec<(f64, f64)> { rows.iter().map(|r| (r.epsilon, f(r))).collect() };
    let slope_l2 = fit_slope(&pts(|r| r.l2_error))?;
    let slope_h1 = fit_slope(&pts(|r| r.h1_expansion_error))?;
    let slope_layer = fit_slope(&pts(|r| r.layer_norm))?;
    Ok(RateStudy {
        rows: rows.to_vec(),
        degenerate_exact: slope_l2.degenerate && slope_h1.degenerate,
        slope_l2,
        slope_h1,
        slope_layer,
        config_hash,
    })
}

/// Report fields of a finished rate study.
pub fn rate_report(cfg: &StudyConfig, study: &RateStudy) -> serde_json::Value {
    let enough = study.rows.len() >= 3;
    json!({
        "study": "rates",
        "model": cfg.model,
        "config_hash": study.config_hash,
        "rows": study.rows,
        "slope_l2": study.slope_l2,
        "slope_h1": study.slope_h1,
        "slope_layer": study.slope_layer,
        "degenerate_exact": study.degenerate_exact,
        "criteria": {
            "slope_l2": enough && !study.slope_l2.degenerate && study.slope_l2.slope >= SLOPE_L2_MIN && study.slope_l2.r_squared >= R_SQUARED_MIN,
            "slope_h1": enough && !study.slope_h1.degenerate && study.slope_h1.slope >= SLOPE_H1_MIN && study.slope_h1.r_squared >= R_SQUARED_MIN,
            "layer_norm": enough && study.slope_layer.slope >= LAYER_SLOPE_MIN,
        }
    })
}

fn write_fields(dir: &Path, eps: f64, mesh: &Mesh, f: &[Vec<f64>; 3]) -> Result<()> {
    let k = (1.0 / eps).round() as usize;
    for (name, u) in ["u_eps", "u0", "v_eps"].iter().zip(f) {
        write_scalar_csv(mesh, u, &dir.join(format!("{name}_eps{k}.csv")))?;
    }
    Ok(())
}

/// Runs the rate study described by `cfg` and writes `study.csv`,
/// `report.json` and (optionally) the per-eps fields into the output
/// directory. A failing job leaves a `FAILED` row after the rows that
/// precede it in config order.
pub fn run_rate_study(cfg: &StudyConfig) -> Result<RateStudy> {
    cfg.validate()?;
    let cache = cfg.cache_dir.clone().unwrap_or_else(|| cfg.output_dir.join("tables"));
    let (table, ctable) = load_or_build(cfg.model, &cfg.xi_table, &cfg.tolerances, Some(&cache))?;
    let (results, hash) = compute_rate_study(cfg, &table, &ctable);
    let out = &cfg.output_dir;
    let csv = out.join("study.csv");
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (res, eps) in results.into_iter().zip(&cfg.epsilons) {
        match res {
            Ok(job) => {
                if let Some((mesh, f)) = &job.fields {
                    write_fields(out, *eps, mesh, f)?;
                }
                lines.push(rate_row(&job.report));
                rows.push(job.report);
            }
            Err(e) => {
                lines.push(format!("FAILED,{},,,,", num(*eps)));
                write_csv(&csv, RATE_HEADER, &lines, &hash)?;
                return Err(e);
            }
        }
    }
    write_csv(&csv, RATE_HEADER, &lines, &hash)?;
    let study = fit_rows(&rows, hash)?;
    write_json(&out.join("report.json"), &rate_report(cfg, &study))?;
    Ok(study)
}
