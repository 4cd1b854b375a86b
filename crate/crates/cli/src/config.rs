//! TOML run configuration and command-line overrides.

use std::path::{Path, PathBuf};

use drrd_core::sim::{scenarios, BandwidthPolicy, BootstrapSettings, DgpSpec};
use drrd_core::RdConfig;
use serde::{Deserialize, Serialize};

use crate::csv_io::CsvSchema;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Estimate,
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Bootstrap inference attached to a single estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateBootstrap {
    pub reps: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_level() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSection {
    /// CSV file to estimate from.
    pub input: PathBuf,
    pub csv: CsvSchema,
    #[serde(default)]
    pub bootstrap: Option<EstimateBootstrap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSection {
    /// Name of a built-in scenario (`linear_jump`, `curved_jump`,
    /// `covariate_shift`); mutually exclusive with `dgp`.
    #[serde(default)]
    pub scenario: Option<String>,
    /// Inline data-generating process; mutually exclusive with `scenario`.
    #[serde(default)]
    pub dgp: Option<DgpSpec>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub bandwidth_policy: BandwidthPolicy,
    /// Per-replication bootstrap for CI coverage columns.
    #[serde(default)]
    pub bootstrap: Option<BootstrapSettings>,
    #[serde(default)]
    pub include_baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    pub path: PathBuf,
    #[serde(default)]
    pub format: Format,
}

/// The full configuration driving one CLI run. Flags override fields after
/// parsing; every report echoes the effective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub rd: RdConfig,
    #[serde(default)]
    pub estimate: Option<EstimateSection>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::IoFailure {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Mode-consistent field presence.
    pub fn validate(&self) -> Result<()> {
        match self.mode {
            Mode::Estimate => {
                let sec = self.estimate.as_ref().ok_or_else(|| {
                    CliError::Config("estimate mode needs an [estimate] section".into())
                })?;
                sec.csv.validate()?;
                if let Some(b) = &sec.bootstrap {
                    if !(b.level > 0.0 && b.level < 1.0) {
                        return Err(CliError::Config(format!(
                            "bootstrap level must lie in (0, 1), got {}",
                            b.level
                        )));
                    }
                }
            }
            Mode::Simulate => {
                let sec = self.simulate.as_ref().ok_or_else(|| {
                    CliError::Config("simulate mode needs a [simulate] section".into())
                })?;
                match (&sec.scenario, &sec.dgp) {
                    (Some(_), Some(_)) => {
                        return Err(CliError::Config(
                            "give either simulate.scenario or simulate.dgp, not both".into(),
                        ))
                    }
                    (None, None) => {
                        return Err(CliError::Config(
                            "simulate mode needs simulate.scenario or simulate.dgp".into(),
                        ))
                    }
                    _ => {}
                }
                if let Some(name) = &sec.scenario {
                    if scenarios::by_name(name).is_none() {
                        return Err(CliError::Config(format!(
                            "unknown scenario `{name}`; available: linear_jump, curved_jump, covariate_shift"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Resolves the DGP a simulate run should use.
    pub fn resolve_dgp(&self) -> Result<DgpSpec> {
        let sec = self
            .simulate
            .as_ref()
            .expect("validated simulate section");
        if let Some(name) = &sec.scenario {
            return Ok(scenarios::by_name(name).expect("validated scenario name"));
        }
        Ok(sec.dgp.clone().expect("validated inline dgp"))
    }
}

/// Applies flag overrides in place; flags win over file values.
pub struct Overrides {
    pub mode: Option<Mode>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub seed: Option<u64>,
    pub bootstrap: Option<usize>,
}

pub fn apply_overrides(cfg: &mut RunConfig, ovr: &Overrides) {
    if let Some(mode) = ovr.mode {
        cfg.mode = mode;
    }
    if let Some(out) = &ovr.out {
        cfg.output.path = out.clone();
    }
    if let Some(format) = ovr.format {
        cfg.output.format = format;
    }
    match cfg.mode {
        Mode::Estimate => {
            if let Some(sec) = cfg.estimate.as_mut() {
                if let Some(reps) = ovr.bootstrap {
                    let b = sec.bootstrap.get_or_insert(EstimateBootstrap {
                        reps,
                        level: default_level(),
                        seed: 0,
                    });
                    b.reps = reps;
                }
                if let (Some(seed), Some(b)) = (ovr.seed, sec.bootstrap.as_mut()) {
                    b.seed = seed;
                }
            }
        }
        Mode::Simulate => {
            if let Some(sec) = cfg.simulate.as_mut() {
                if let Some(seed) = ovr.seed {
                    sec.seed = seed;
                }
                if let Some(reps) = ovr.bootstrap {
                    let b = sec.bootstrap.get_or_insert(BootstrapSettings {
                        reps,
                        level: default_level(),
                    });
                    b.reps = reps;
                }
            }
        }
    }
}
