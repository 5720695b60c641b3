//! Command-line driver for the homogenization toolkit.
//!
//! Exit codes: 0 success, 1 invalid input or config, 2 solver
//! non-convergence, 3 acceptance failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use monohom::bvp::{solve_homogenized, solve_multiscale, BvpSpec, EffectiveOperator, FieldSpec};
use monohom::harness::config::StudyKind;
use monohom::harness::{run_study, tables, StudyConfig, XiTableConfig};
use monohom::mesh::write_scalar_csv;
use monohom::{acceptance, effective_flux, flux_corrector, solve_corrector, Error, ModelKind, SolveOptions};

#[derive(Parser, Debug)]
#[command(name = "monohom", version, about = "Periodic homogenization of monotone elliptic operators")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Output directory; overrides `output_dir` from a config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Seed; overrides `seed` from a config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one cell problem and print the effective flux.
    Cell {
        #[arg(long)]
        model: ModelKind,
        /// Slope as "a,b".
        #[arg(long, allow_hyphen_values = true, value_parser = parse_pair)]
        xi: [f64; 2],
        #[arg(long, default_value_t = 64)]
        n: usize,
    },
    /// Build the effective and corrector tables for a model.
    Table {
        #[arg(long)]
        model: ModelKind,
        #[arg(long, default_value_t = 4.0)]
        g_max: f64,
        #[arg(long, default_value_t = 9)]
        m: usize,
        #[arg(long, default_value_t = 32)]
        n: usize,
    },
    /// Solve one boundary value problem.
    Solve(SolveArgs),
    /// Convergence-rate study from a config file.
    Rates(StudyArgs),
    /// Excess-decay study from a config file.
    Excess(StudyArgs),
    /// Lipschitz-profile study from a config file.
    Lipschitz(StudyArgs),
    /// Gradient-integrability study from a config file.
    Integrability(StudyArgs),
    /// Run the built-in acceptance suite.
    Verify {
        /// Run a single criterion (1-12).
        #[arg(long)]
        criterion: Option<u8>,
    },
}

#[derive(Args, Debug)]
struct StudyArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override the model in the config.
    #[arg(long)]
    model: Option<ModelKind>,
    /// Override the periods, as a comma list.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Override the probe mesh size.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    model: ModelKind,
    /// Period `1/k`; omit together with `--homogenized`.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value = "zero")]
    source: FieldSpec,
    #[arg(long, default_value = "linear-x")]
    boundary: FieldSpec,
    /// Solve the homogenized problem instead.
    #[arg(long)]
    homogenized: bool,
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 {
        return Err(format!("expected \"a,b\", got \"{s}\""));
    }
    let a = parts[0].parse::<f64>().map_err(|e| format!("{}: {e}", parts[0]))?;
    let b = parts[1].parse::<f64>().map_err(|e| format!("{}: {e}", parts[1]))?;
    Ok([a, b])
}

enum Failure {
    Core(Error),
    Acceptance(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn out_dir(cli_out: &Option<PathBuf>) -> PathBuf {
    cli_out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(v)?;
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

fn cmd_cell(model: ModelKind, xi: [f64; 2], n: usize, output: &Option<PathBuf>) -> Result<(), Error> {
    let m = monohom::CoefficientModel::new(model);
    let sol = solve_corrector(&m, xi, n, &SolveOptions::default())?;
    let a = effective_flux(&sol);
    let (n2, g2) = sol.energies();
    println!("model {model} xi ({}, {}) n {n}", xi[0], xi[1]);
    println!("A_eff = ({:.6}, {:.6})", a[0], a[1]);
    println!("|N|_L2 = {:.6e}  |grad N|_L2 = {:.6e}", n2.sqrt(), g2.sqrt());
    println!("iterations {} converged {}", sol.report.iterations, sol.report.converged);
    if let Some(dir) = output {
        ensure_dir(dir)?;
        write_scalar_csv(&sol.mesh, &sol.corrector, &dir.join("corrector.csv"))?;
        let fc = flux_corrector(&sol)?;
        write_scalar_csv(&sol.mesh, &fc.e12, &dir.join("flux_corrector.csv"))?;
        write_json(
            &dir.join("cell.json"),
            &serde_json::json!({
                "model": model,
                "xi": xi,
                "n": n,
                "A_eff": a,
                "mean_N2": n2,
                "mean_gradN2": g2,
                "report": sol.report,
            }),
        )?;
    }
    Ok(())
}

fn cmd_table(model: ModelKind, xi: XiTableConfig, output: &Option<PathBuf>) -> Result<(), Error> {
    let dir = out_dir(output);
    let (eff, _) = tables::load_or_build(model, &xi, &SolveOptions::default(), Some(&dir))?;
    let cert = eff.certify(200, 0);
    println!("table {}", tables::cache_path(&dir, model, &xi).display());
    println!(
        "monotonicity {:.4e}  lipschitz {:.4e}",
        cert.monotonicity, cert.lipschitz
    );
    Ok(())
}

fn cmd_solve(a: &SolveArgs, output: &Option<PathBuf>) -> Result<(), Error> {
    let spec = BvpSpec {
        model: a.model,
        epsilon: if a.homogenized { 0.0 } else { a.eps.unwrap_or(0.0) },
        source: a.source.clone(),
        boundary: a.boundary.clone(),
        n: a.n,
        opts: SolveOptions::default(),
    };
    let dir = out_dir(output);
    let (u, report) = if a.homogenized {
        let op = match a.model {
            ModelKind::Identity => EffectiveOperator::identity(),
            ModelKind::Laminate => EffectiveOperator::laminate(),
            m => {
                let (t, _) = tables::load_or_build(m, &XiTableConfig::default(), &spec.opts, Some(&dir.join("tables")))?;
                EffectiveOperator::from_table(t)
            }
        };
        solve_homogenized(&spec, &op)?
    } else {
        if a.eps.is_none() {
            return Err(Error::InvalidArgument("solve needs --eps or --homogenized".into()));
        }
        solve_multiscale(&spec)?
    };
    println!(
        "iterations {} converged {} contraction {:.4}",
        report.iterations, report.converged, report.contraction_emp
    );
    ensure_dir(&dir)?;
    write_scalar_csv(&spec.mesh()?, &u, &dir.join("u.csv"))?;
    write_json(&dir.join("solve.json"), &serde_json::json!({ "spec": spec, "report": report }))?;
    println!("wrote {}", dir.join("u.csv").display());
    Ok(())
}

fn cmd_study(kind: StudyKind, a: &StudyArgs, cli: &Cli) -> Result<(), Error> {
    let mut cfg = StudyConfig::from_file(&a.config)?;
    if cfg.study != kind {
        log::warn!("config declares study '{}'; running '{}'", cfg.study.name(), kind.name());
        cfg.study = kind;
    }
    if let Some(m) = a.model {
        cfg.model = m;
    }
    if let Some(e) = &a.eps {
        cfg.epsilons = e.clone();
    }
    if let Some(n) = a.n {
        cfg.probe.n = n;
    }
    if let Some(o) = &cli.output {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let report = run_study(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn cmd_verify(criterion: Option<u8>) -> Result<(), Failure> {
    let outcomes = match criterion {
        Some(id) if (1..=12).contains(&id) => vec![acceptance::run(id)],
        Some(id) => return Err(Error::InvalidArgument(format!("no criterion {id} (expected 1-12)")).into()),
        None => acceptance::run_all(),
    };
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        return Err(Failure::Acceptance(failed));
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Cell { model, xi, n } => cmd_cell(*model, *xi, *n, &cli.output)?,
        Command::Table { model, g_max, m, n } => cmd_table(
            *model,
            XiTableConfig {
                g_max: *g_max,
                m: *m,
                n_cell: *n,
            },
            &cli.output,
        )?,
        Command::Solve(a) => cmd_solve(a, &cli.output)?,
        Command::Rates(a) => cmd_study(StudyKind::Rates, a, cli)?,
        Command::Excess(a) => cmd_study(StudyKind::Excess, a, cli)?,
        Command::Lipschitz(a) => cmd_study(StudyKind::Lipschitz, a, cli)?,
        Command::Integrability(a) => cmd_study(StudyKind::Integrability, a, cli)?,
        Command::Verify { criterion } => cmd_verify(*criterion)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(k) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: --jobs {k}: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Acceptance(k)) => {
            eprintln!("error: {k} acceptance criteria failed");
            ExitCode::from(3)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            if e.is_non_convergence() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
