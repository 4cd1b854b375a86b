//! Command-line driver for doubly robust regression discontinuity analysis.
//!
//! Runs are configured from a TOML file and optionally overridden by flags.
//! `estimate` mode fits one dataset from CSV; `simulate` mode runs the Monte
//! Carlo engine over a grid of sample sizes. Both write a deterministic
//! report (JSON or CSV) that echoes the effective configuration.
//!
//! Exit codes: 0 on success, 1 on a domain or I/O error (reported as a JSON
//! object on stderr, or prose with `--pretty`), 2 on a usage error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use drrd_core::ScenarioOptions;

use drrd_cli::config::{apply_overrides, Format, Mode, Overrides, RunConfig};
use drrd_cli::csv_io;
use drrd_cli::error::Result;
use drrd_cli::report::{self, EstimateReport, SimulateReport};

#[derive(Parser)]
#[command(
    name = "drrd",
    version,
    about = "Doubly robust estimation for sharp regression discontinuity designs"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Override the configured mode.
    #[arg(long, value_enum)]
    mode: Option<Mode>,

    /// Override the report path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,

    /// Override the report format.
    #[arg(long, value_enum)]
    format: Option<Format>,

    /// Override the simulation seed (simulate) or bootstrap seed (estimate).
    #[arg(long)]
    seed: Option<u64>,

    /// Override bootstrap replications; enables the bootstrap if the config
    /// left it off.
    #[arg(long, value_name = "REPS")]
    bootstrap: Option<usize>,

    /// Render errors as prose instead of a JSON object.
    #[arg(long)]
    pretty: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            let obj = err.to_object();
            if cli.pretty {
                match &obj.location {
                    Some(loc) => eprintln!("error[{}] at {}: {}", obj.code, loc, obj.message),
                    None => eprintln!("error[{}]: {}", obj.code, obj.message),
                }
            } else {
                eprintln!(
                    "{}",
                    serde_json::to_string(&obj).expect("error objects serialize")
                );
            }
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<String> {
    let mut cfg = RunConfig::from_path(&cli.config)?;
    apply_overrides(
        &mut cfg,
        &Overrides {
            mode: cli.mode,
            out: cli.out.clone(),
            format: cli.format,
            seed: cli.seed,
            bootstrap: cli.bootstrap,
        },
    );
    cfg.validate()?;
    match cfg.mode {
        Mode::Estimate => cmd_estimate(cfg),
        Mode::Simulate => cmd_simulate(cfg),
    }
}

fn cmd_estimate(cfg: RunConfig) -> Result<String> {
    let sec = cfg.estimate.as_ref().expect("validated estimate section");
    let data = csv_io::load_csv(&sec.input, &sec.csv)?;
    let estimate = match &sec.bootstrap {
        Some(b) => {
            drrd_core::estimate_dr_with_bootstrap(&data, &cfg.rd, b.reps, b.level, b.seed)?
        }
        None => drrd_core::estimate_dr(&data, &cfg.rd)?,
    };
    let output = cfg.output.clone();
    let report = EstimateReport {
        estimate,
        config: cfg,
    };
    report::write_bytes(
        &output.path,
        &report::estimate_bytes(&report, output.format)?,
    )?;

    let e = &report.estimate;
    let inference = match (&e.se, &e.ci) {
        (Some(se), Some(ci)) => format!(" se={se} ci=[{}, {}]", ci.lo, ci.hi),
        _ => String::new(),
    };
    Ok(format!(
        "estimate: tau_hat={}{inference} n={} h={} -> {}",
        e.tau_hat,
        e.n,
        e.bandwidth_used,
        output.path.display()
    ))
}

fn cmd_simulate(cfg: RunConfig) -> Result<String> {
    let sec = cfg.simulate.as_ref().expect("validated simulate section");
    let dgp = cfg.resolve_dgp()?;
    let opts = ScenarioOptions {
        n_grid: sec.n_grid.clone(),
        reps: sec.reps,
        seed: sec.seed,
        bandwidth_policy: sec.bandwidth_policy,
        bootstrap: sec.bootstrap,
        include_baseline: sec.include_baseline,
    };
    let mc = drrd_core::run_scenario(&dgp, &cfg.rd, &opts)?;
    let output = cfg.output.clone();
    let report = SimulateReport {
        report: mc,
        config: cfg,
    };
    report::write_bytes(
        &output.path,
        &report::simulate_bytes(&report, output.format)?,
    )?;

    let r = &report.report;
    let last = r.rows.last().expect("grid is non-empty");
    Ok(format!(
        "simulate: scenario={} tau0={} grid={:?} reps={} final_bias={} converged={} -> {}",
        r.scenario,
        r.tau0,
        r.rows.iter().map(|row| row.n).collect::<Vec<_>>(),
        r.reps,
        last.bias,
        r.converged,
        output.path.display()
    ))
}
