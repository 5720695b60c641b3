use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bvp::{solve_homogenized, solve_multiscale, BvpSpec, EffectiveOperator};
use crate::cell::TableCertificate;
use crate::coefficients::{CoefficientModel, ModelKind};
use crate::error::{Error, Result};
use crate::harness::config::StudyConfig;
use crate::harness::output::{num, write_csv, write_json};
use crate::harness::tables::load_or_build;
use crate::mesh::{write_scalar_csv, Mesh};
use crate::probe::{
    excess_decay_check, gradient_integrability, lipschitz_profile, profile_constant, DecayTable,
    IntegrabilityRow, ProbeRow, ProfileRow, PROBE_HEADER,
};

/// Radii of the Lipschitz profile when the config gives none.
pub const DEFAULT_PROFILE_RADII: [f64; 4] = [0.0625, 0.125, 0.1875, 0.25];
/// Radii of the reverse Hoelder ratios when the config gives none.
pub const DEFAULT_RATIO_RADII: [f64; 2] = [0.0625, 0.125];
/// Radii of the decay table when the config gives none.
pub const DEFAULT_DECAY_RADII: [f64; 3] = [0.05, 0.1, 0.2];

fn radii_or(cfg: &StudyConfig, default: &[f64]) -> Vec<f64> {
    if cfg.probe.radii.is_empty() {
        default.to_vec()
    } else {
        cfg.probe.radii.clone()
    }
}

/// An oscillating solution of the sweep.
pub struct EpsSolution {
    pub epsilon: f64,
    pub mesh: Mesh,
    pub u: Vec<f64>,
    pub f: Vec<f64>,
    pub iterations: usize,
}

/// Solves the oscillating problem for every `eps` of the config.
pub fn solve_sweep(cfg: &StudyConfig) -> Result<Vec<EpsSolution>> {
    cfg.epsilons
        .par_iter()
        .map(|&eps| {
            let job = || -> Result<EpsSolution> {
                let spec = BvpSpec {
                    model: cfg.model,
                    epsilon: eps,
                    source: cfg.f.clone(),
                    boundary: cfg.g.clone(),
                    n: cfg.mesh_size(eps)?,
                    opts: cfg.tolerances,
                };
                let mesh = spec.mesh()?;
                let (u, rep) = solve_multiscale(&spec)?;
                Ok(EpsSolution {
                    epsilon: eps,
                    f: spec.source.sample(&mesh)?,
                    mesh,
                    u,
                    iterations: rep.iterations,
                })
            };
            job().map_err(|e| Error::StudyJob { eps, source: Box::new(e) })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzStudy {
    pub epsilons: Vec<f64>,
    pub profiles: Vec<Vec<ProfileRow>>,
    /// `max_r avg_grad(r) / (avg_grad(R) + source_term(R))` per eps.
    pub constants: Vec<f64>,
    /// `max / min` of the constants across eps.
    pub spread: f64,
}

fn spread(v: &[f64]) -> f64 {
    let hi = v.iter().cloned().fold(f64::MIN, f64::max);
    let lo = v.iter().cloned().fold(f64::MAX, f64::min);
    if hi == 0.0 {
        1.0
    } else {
        hi / lo
    }
}

pub fn lipschitz_study(cfg: &StudyConfig, sols: &[EpsSolution]) -> Result<LipschitzStudy> {
    let radii = radii_or(cfg, &DEFAULT_PROFILE_RADII);
    let profiles = sols
        .iter()
        .map(|s| lipschitz_profile(&s.mesh, &s.u, &s.f, cfg.probe.center, &radii, cfg.probe.p))
        .collect::<Result<Vec<_>>>()?;
    let constants: Vec<f64> = profiles.iter().map(|p| profile_constant(p)).collect();
    Ok(LipschitzStudy {
        epsilons: sols.iter().map(|s| s.epsilon).collect(),
        spread: spread(&constants),
        profiles,
        constants,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityStudy {
    pub epsilons: Vec<f64>,
    pub radii: Vec<f64>,
    pub ratios: Vec<Vec<IntegrabilityRow>>,
    /// Per radius, `max / min` of the ratio across eps.
    pub spreads: Vec<f64>,
}

pub fn integrability_study(cfg: &StudyConfig, sols: &[EpsSolution]) -> Result<IntegrabilityStudy> {
    let radii = radii_or(cfg, &DEFAULT_RATIO_RADII);
    let ratios = sols
        .iter()
        .map(|s| gradient_integrability(&s.mesh, &s.u, cfg.probe.p, cfg.probe.center, &radii))
        .collect::<Result<Vec<_>>>()?;
    let spreads = (0..radii.len())
        .map(|i| spread(&ratios.iter().map(|r| r[i].ratio).collect::<Vec<_>>()))
        .collect();
    Ok(IntegrabilityStudy {
        epsilons: sols.iter().map(|s| s.epsilon).collect(),
        radii,
        ratios,
        spreads,
    })
}

fn probe_rows_lipschitz(cfg: &StudyConfig, st: &LipschitzStudy) -> Vec<String> {
    let c = cfg.probe.center;
    let mut out = Vec::new();
    for ((eps, prof), k) in st.epsilons.iter().zip(&st.profiles).zip(&st.constants) {
        for row in prof {
            out.push(format!("{},{}", num(*eps), ProbeRow { probe: "avg_grad", center: c, r: row.r, theta: None, p: Some(cfg.probe.p), value: row.avg_grad }.csv_line()));
        }
        let r = prof.last().map(|p| p.r).unwrap_or(f64::NAN);
        out.push(format!("{},{}", num(*eps), ProbeRow { probe: "lipschitz_constant", center: c, r, theta: None, p: Some(cfg.probe.p), value: *k }.csv_line()));
    }
    out
}

fn probe_rows_integrability(cfg: &StudyConfig, st: &IntegrabilityStudy) -> Vec<String> {
    let c = cfg.probe.center;
    let mut out = Vec::new();
    for (eps, rows) in st.epsilons.iter().zip(&st.ratios) {
        for row in rows {
            out.push(format!("{},{}", num(*eps), ProbeRow { probe: "reverse_holder", center: c, r: row.r, theta: None, p: Some(cfg.probe.p), value: row.ratio }.csv_line()));
        }
    }
    out
}

/// Homogenized solve and decay table.
pub fn excess_study(cfg: &StudyConfig) -> Result<(DecayTable, Mesh, Vec<f64>)> {
    let op = match (cfg.model, cfg.probe.closed_form) {
        (ModelKind::Identity, true) => EffectiveOperator::identity(),
        (ModelKind::Laminate, true) => EffectiveOperator::laminate(),
        _ => {
            let cache = cfg.cache_dir.clone().unwrap_or_else(|| cfg.output_dir.join("tables"));
            let (t, _) = load_or_build(cfg.model, &cfg.xi_table, &cfg.tolerances, Some(&cache))?;
            EffectiveOperator::from_table(t)
        }
    };
    let spec = BvpSpec {
        model: cfg.model,
        epsilon: 0.0,
        source: cfg.f.clone(),
        boundary: cfg.g.clone(),
        n: cfg.probe.n,
        opts: cfg.tolerances,
    };
    let mesh = spec.mesh()?;
    let (u0, _) = solve_homogenized(&spec, &op)?;
    let f = spec.source.sample(&mesh)?;
    let radii = radii_or(cfg, &DEFAULT_DECAY_RADII);
    let table = excess_decay_check(&mesh, &u0, &f, cfg.probe.center, &radii, &cfg.probe.thetas, cfg.probe.p)?;
    Ok((table, mesh, u0))
}

fn probe_rows_decay(cfg: &StudyConfig, t: &DecayTable) -> Vec<String> {
    let c = cfg.probe.center;
    let mut out = Vec::new();
    for row in &t.rows {
        out.push(ProbeRow { probe: "excess", center: c, r: row.r, theta: None, p: Some(cfg.probe.p), value: row.g_r }.csv_line());
        out.push(ProbeRow { probe: "excess_ratio", center: c, r: row.r, theta: Some(row.theta), p: Some(cfg.probe.p), value: row.ratio }.csv_line());
    }
    out.dedup();
    out
}

pub const CELL_PAIRS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellStudy {
    pub certificate: TableCertificate,
    pub a_eff_zero: [f64; 2],
    pub mu0: f64,
    pub mu2: f64,
}

pub fn cell_study(cfg: &StudyConfig) -> Result<CellStudy> {
    let cache = cfg.cache_dir.clone().unwrap_or_else(|| cfg.output_dir.join("tables"));
    let (t, _) = load_or_build(cfg.model, &cfg.xi_table, &cfg.tolerances, Some(&cache))?;
    let model = CoefficientModel::new(cfg.model);
    Ok(CellStudy {
        certificate: t.certify(CELL_PAIRS, cfg.seed),
        a_eff_zero: t.a_eff[t.grid().zero_index()],
        mu0: model.mu0,
        mu2: model.mu2,
    })
}

/// Runs a probe or cell study and writes `study.csv` plus `report.json`.
pub fn run_probe_study(cfg: &StudyConfig) -> Result<serde_json::Value> {
    use crate::harness::config::StudyKind;
    cfg.validate()?;
    let hash = cfg.hash();
    let out = &cfg.output_dir;
    let eps_header = format!("epsilon,{PROBE_HEADER}");
    let report = match cfg.study {
        StudyKind::Lipschitz | StudyKind::Integrability => {
            let sols = solve_sweep(cfg)?;
            if cfg.write_fields {
                for s in &sols {
                    let k = (1.0 / s.epsilon).round() as usize;
                    write_scalar_csv(&s.mesh, &s.u, &out.join(format!("u_eps{k}.csv")))?;
                }
            }
            if cfg.study == StudyKind::Lipschitz {
                let st = lipschitz_study(cfg, &sols)?;
                write_csv(&out.join("study.csv"), &eps_header, &probe_rows_lipschitz(cfg, &st), &hash)?;
                json!({"study": "lipschitz", "model": cfg.model, "config_hash": hash, "result": st,
                       "criteria": {"spread_le_3": st.spread <= 3.0}})
            } else {
                let st = integrability_study(cfg, &sols)?;
                write_csv(&out.join("study.csv"), &eps_header, &probe_rows_integrability(cfg, &st), &hash)?;
                json!({"study": "integrability", "model": cfg.model, "config_hash": hash, "result": st,
                       "criteria": {"spread_le_2": st.spreads.iter().all(|s| *s <= 2.0)}})
            }
        }
        StudyKind::Excess => {
            let (t, mesh, u0) = excess_study(cfg)?;
            if cfg.write_fields {
                write_scalar_csv(&mesh, &u0, &out.join("u0.csv"))?;
            }
            write_csv(&out.join("study.csv"), PROBE_HEADER, &probe_rows_decay(cfg, &t), &hash)?;
            json!({"study": "excess", "model": cfg.model, "config_hash": hash, "result": t,
                   "criteria": {"decay_witnessed": t.decay_witnessed}})
        }
        StudyKind::Cell => {
            let st = cell_study(cfg)?;
            let rows = vec![format!(
                "{},{},{},{},{}",
                num(st.certificate.monotonicity),
                num(st.certificate.lipschitz),
                num(st.a_eff_zero[0]),
                num(st.a_eff_zero[1]),
                CELL_PAIRS
            )];
            write_csv(&out.join("study.csv"), "monotonicity,lipschitz,a_eff_zero_x,a_eff_zero_y,pairs", &rows, &hash)?;
            json!({"study": "cell", "model": cfg.model, "config_hash": hash, "result": st,
                   "criteria": {
                       "monotone": st.certificate.monotonicity >= st.mu0 - 1e-3,
                       "lipschitz": st.certificate.lipschitz <= st.mu2 + 1e-3,
                       "zero": st.a_eff_zero[0].abs() <= 1e-8 && st.a_eff_zero[1].abs() <= 1e-8,
                   }})
        }
        StudyKind::Rates => return Err(Error::invalid("rate studies run through run_rate_study")),
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}
