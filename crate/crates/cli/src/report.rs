//! Report serialization: JSON and flat CSV, both deterministic byte-for-byte.

use std::path::Path;

use drrd_core::{DrEstimate, McReport};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::{CliError, Result};

/// Column order for estimate-mode CSV output.
pub const ESTIMATE_HEADER: [&str; 18] = [
    "tau_hat",
    "eta_control",
    "eta_treated",
    "plugin_control",
    "plugin_treated",
    "se",
    "ci_lo",
    "ci_hi",
    "ci_level",
    "n",
    "n_treated",
    "n_control",
    "bandwidth",
    "zeta_control",
    "zeta_treated",
    "ess_control",
    "ess_treated",
    "config",
];

/// Column order for simulate-mode CSV output (one record per grid size).
pub const SIMULATE_HEADER: [&str; 17] = [
    "scenario",
    "tau0",
    "seed",
    "converged",
    "n",
    "reps",
    "redraws",
    "mean_estimate",
    "bias",
    "rmse",
    "mc_se",
    "mean_bandwidth",
    "coverage",
    "baseline_mean",
    "baseline_bias",
    "baseline_mc_se",
    "config",
];

#[derive(Debug, Serialize)]
pub struct EstimateReport {
    pub estimate: DrEstimate,
    pub config: RunConfig,
}

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub report: McReport,
    pub config: RunConfig,
}

/// Shortest decimal that parses back to the same f64.
fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn config_json(config: &RunConfig) -> Result<String> {
    serde_json::to_string(config).map_err(|e| CliError::Config(e.to_string()))
}

pub fn estimate_bytes(report: &EstimateReport, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => json_bytes(report),
        Format::Csv => {
            let e = &report.estimate;
            let echo = config_json(&report.config)?;
            let record = [
                num(e.tau_hat),
                num(e.eta_hat.control),
                num(e.eta_hat.treated),
                num(e.plugin_mean.control),
                num(e.plugin_mean.treated),
                opt(e.se),
                opt(e.ci.map(|ci| ci.lo)),
                opt(e.ci.map(|ci| ci.hi)),
                opt(e.ci.map(|ci| ci.level)),
                e.n.to_string(),
                e.n_treated.to_string(),
                e.n_control.to_string(),
                num(e.bandwidth_used),
                num(e.zeta_hat.control),
                num(e.zeta_hat.treated),
                num(e.ess.control),
                num(e.ess.treated),
                echo,
            ];
            csv_bytes(&ESTIMATE_HEADER, std::iter::once(record))
        }
    }
}

pub fn simulate_bytes(report: &SimulateReport, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => json_bytes(report),
        Format::Csv => {
            let r = &report.report;
            let echo = config_json(&report.config)?;
            let records = r.rows.iter().map(|row| {
                [
                    r.scenario.clone(),
                    num(r.tau0),
                    r.seed.to_string(),
                    r.converged.to_string(),
                    row.n.to_string(),
                    row.reps.to_string(),
                    row.redraws.to_string(),
                    num(row.mean_estimate),
                    num(row.bias),
                    num(row.rmse),
                    num(row.mc_se),
                    num(row.mean_bandwidth),
                    opt(row.coverage),
                    opt(row.baseline_mean),
                    opt(row.baseline_bias),
                    opt(row.baseline_mc_se),
                    echo.clone(),
                ]
            });
            csv_bytes(&SIMULATE_HEADER, records)
        }
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn csv_bytes<const N: usize>(
    header: &[&str; N],
    records: impl Iterator<Item = [String; N]>,
) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| CliError::Config(format!("csv serialization: {e}"));
    wtr.write_record(header).map_err(io_err)?;
    for record in records {
        wtr.write_record(&record).map_err(io_err)?;
    }
    wtr.into_inner()
        .map_err(|e| CliError::Config(format!("csv serialization: {e}")))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| CliError::IoFailure {
        path: path.display().to_string(),
        source,
    })
}
