//! Data-generating processes with known truth and a Monte Carlo engine for
//! bias/RMSE/coverage experiments.
//!
//! Each DGP declares polynomial conditional-mean functions per arm, so the
//! jump at the cutoff is available in closed form from the coefficients and
//! the covariate moments. Replications draw from per-replication RNG streams
//! derived from (seed, scenario, n, replication index), making reports
//! independent of execution order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Arm, Dataset, RdConfig};
use crate::error::{Error, Result};
use crate::estimator::{estimate_dr, estimate_dr_with_bootstrap, estimate_local_linear_baseline};
use crate::kernel::BandwidthRule;
use crate::rng::{derive_seed, fnv1a64, stream_rng};

/// Highest covariate moment available in closed form.
pub const MAX_MOMENT: u32 = 8;

/// Scalar distributions used for the running variable and covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum Distribution1d {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Distribution1d {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution1d::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                Err(Error::InvalidConfig(format!(
                    "uniform distribution needs lo < hi, got [{lo}, {hi}]"
                )))
            }
            Distribution1d::Normal { mean, sd } if !(mean.is_finite() && sd.is_finite() && sd > 0.0) => {
                Err(Error::InvalidConfig(format!(
                    "normal distribution needs finite mean and sd > 0, got ({mean}, {sd})"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Distribution1d::Uniform { lo, hi } => rng.random_range(lo..hi),
            Distribution1d::Normal { mean, sd } => {
                let e: f64 = StandardNormal.sample(rng);
                mean + sd * e
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution1d::Uniform { lo, hi } => 0.5 * (lo + hi),
            Distribution1d::Normal { mean, .. } => mean,
        }
    }

    /// Raw moment E[X^k] in closed form.
    pub fn moment(&self, k: u32) -> Result<f64> {
        if k > MAX_MOMENT {
            return Err(Error::UnsupportedMoment {
                degree: k,
                max: MAX_MOMENT,
            });
        }
        match *self {
            Distribution1d::Uniform { lo, hi } => {
                let p = k as i32 + 1;
                Ok((hi.powi(p) - lo.powi(p)) / (p as f64 * (hi - lo)))
            }
            Distribution1d::Normal { mean, sd } => {
                // m_k = mean * m_{k-1} + (k-1) * sd^2 * m_{k-2}
                let (mut prev, mut cur) = (1.0, mean);
                if k == 0 {
                    return Ok(1.0);
                }
                for j in 2..=k {
                    let next = mean * cur + (j - 1) as f64 * sd * sd * prev;
                    prev = cur;
                    cur = next;
                }
                Ok(cur)
            }
        }
    }
}

/// One additive covariate term `coef * z[index]^degree`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTerm {
    pub index: usize,
    pub degree: u32,
    pub coef: f64,
}

/// Polynomial conditional mean for one arm:
/// `sum_k w_poly[k] * (w - cutoff)^k + sum_j coef_j * z[index_j]^degree_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmFunction {
    pub w_poly: Vec<f64>,
    #[serde(default)]
    pub z_terms: Vec<ZTerm>,
}

impl ArmFunction {
    fn eval(&self, t: f64, z: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut pow = 1.0;
        for &c in &self.w_poly {
            acc += c * pow;
            pow *= t;
        }
        for term in &self.z_terms {
            acc += term.coef * z[term.index].powi(term.degree as i32);
        }
        acc
    }

    /// E[f(0, Z)] — the arm's level at the cutoff averaged over covariates.
    fn mean_at_cutoff(&self, z_dists: &[Distribution1d]) -> Result<f64> {
        let mut acc = self.w_poly.first().copied().unwrap_or(0.0);
        for term in &self.z_terms {
            acc += term.coef * z_dists[term.index].moment(term.degree)?;
        }
        Ok(acc)
    }
}

/// A simulated sharp-RD population with known conditional means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub name: String,
    pub cutoff: f64,
    pub w_dist: Distribution1d,
    #[serde(default)]
    pub z_dists: Vec<Distribution1d>,
    pub noise_sd: f64,
    pub control: ArmFunction,
    pub treated: ArmFunction,
}

impl DgpSpec {
    pub fn z_dim(&self) -> usize {
        self.z_dists.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.w_dist.validate()?;
        for zd in &self.z_dists {
            zd.validate()?;
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise_sd must be nonnegative, got {}",
                self.noise_sd
            )));
        }
        if let Distribution1d::Uniform { lo, hi } = self.w_dist {
            if !(self.cutoff > lo && self.cutoff < hi) {
                return Err(Error::InvalidConfig(format!(
                    "cutoff {} must lie inside the running-variable support [{lo}, {hi}]",
                    self.cutoff
                )));
            }
        }
        for arm_fn in [&self.control, &self.treated] {
            for term in &arm_fn.z_terms {
                if term.index >= self.z_dists.len() {
                    return Err(Error::InvalidConfig(format!(
                        "z term references covariate {} but only {} are declared",
                        term.index,
                        self.z_dists.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// True conditional mean μ0(arm | w, z).
    pub fn mu0(&self, arm: Arm, w: f64, z: &[f64]) -> f64 {
        let f = match arm {
            Arm::Control => &self.control,
            Arm::Treated => &self.treated,
        };
        f.eval(w - self.cutoff, z)
    }
}

/// Closed-form τ0 = E[μ0(1 | c, Z) − μ0(0 | c, Z)].
pub fn true_tau(spec: &DgpSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.treated.mean_at_cutoff(&spec.z_dists)?
        - spec.control.mean_at_cutoff(&spec.z_dists)?)
}

/// Draws one sample of size `n`; returns the dataset and τ0.
pub fn generate(spec: &DgpSpec, n: usize, seed: u64) -> Result<(Dataset, f64)> {
    let tau0 = true_tau(spec)?;
    let mut rng = stream_rng(seed, &[fnv1a64(spec.name.as_bytes())]);
    let data = generate_with(spec, n, &mut rng)?;
    Ok((data, tau0))
}

fn generate_with(spec: &DgpSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    if n < 4 {
        return Err(Error::InvalidConfig(format!(
            "sample size must be at least 4, got {n}"
        )));
    }
    let zd = spec.z_dim();
    let mut y = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n * zd);
    let mut z_row = vec![0.0; zd];
    for _ in 0..n {
        let wi = spec.w_dist.sample(rng);
        for (slot, dist) in z_row.iter_mut().zip(&spec.z_dists) {
            *slot = dist.sample(rng);
        }
        // Both potential outcomes are drawn; assignment reveals one.
        let e0: f64 = StandardNormal.sample(rng);
        let e1: f64 = StandardNormal.sample(rng);
        let y0 = spec.mu0(Arm::Control, wi, &z_row) + spec.noise_sd * e0;
        let y1 = spec.mu0(Arm::Treated, wi, &z_row) + spec.noise_sd * e1;
        y.push(if wi >= spec.cutoff { y1 } else { y0 });
        w.push(wi);
        z.extend_from_slice(&z_row);
    }
    Dataset::new(y, w, z, zd)
}

/// How the estimation bandwidth varies over the sample-size grid.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum BandwidthPolicy {
    /// Use the bandwidth rule in the estimator config unchanged.
    #[default]
    FromConfig,
    /// Override with a fixed `c0 * n^(-1/5)` per grid point — the shrinking
    /// localization regime.
    Shrinking { c0: f64 },
}

/// Per-dataset bootstrap settings for coverage experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSettings {
    pub reps: usize,
    pub level: f64,
}

/// Monte Carlo run parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOptions {
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    #[serde(default)]
    pub bandwidth_policy: BandwidthPolicy,
    #[serde(default)]
    pub bootstrap: Option<BootstrapSettings>,
    /// Also run the local-linear baseline on every replication.
    #[serde(default)]
    pub include_baseline: bool,
}

/// Aggregates for one (scenario, n) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub n: usize,
    pub reps: usize,
    /// Datasets regenerated because a draw left one side of the cutoff empty.
    pub redraws: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    pub rmse: f64,
    pub mc_se: f64,
    pub mean_bandwidth: f64,
    pub coverage: Option<f64>,
    pub baseline_mean: Option<f64>,
    pub baseline_bias: Option<f64>,
    pub baseline_mc_se: Option<f64>,
}

/// Full Monte Carlo report for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub scenario: String,
    pub tau0: f64,
    pub seed: u64,
    pub reps: usize,
    /// Whether |bias| shrinks across the grid and ends statistically or
    /// materially small; false marks a regime the estimator did not handle.
    pub converged: bool,
    pub rows: Vec<McRow>,
}

/// Runs `opts.reps` generate-estimate cycles at every grid size.
///
/// Replications whose draw leaves a side of the cutoff empty are redrawn
/// from the same stream and counted; any other estimation error aborts the
/// run. Deterministic given (dgp, rd, opts).
pub fn run_scenario(dgp: &DgpSpec, rd: &RdConfig, opts: &ScenarioOptions) -> Result<McReport> {
    if opts.reps < 50 {
        return Err(Error::InvalidConfig(format!(
            "scenario replications must be at least 50, got {}",
            opts.reps
        )));
    }
    if opts.n_grid.is_empty() {
        return Err(Error::InvalidConfig("n_grid must be nonempty".into()));
    }
    if let BandwidthPolicy::Shrinking { c0 } = opts.bandwidth_policy {
        if !(c0.is_finite() && c0 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "shrinking-bandwidth constant must be positive, got {c0}"
            )));
        }
    }
    let tau0 = true_tau(dgp)?;
    let scenario_tag = fnv1a64(dgp.name.as_bytes());
    let redraw_cap = 10 * opts.reps * opts.n_grid.len();
    let mut redraws_total = 0usize;

    let mut rows = Vec::with_capacity(opts.n_grid.len());
    for &n in &opts.n_grid {
        let mut rd_n = rd.clone();
        if let BandwidthPolicy::Shrinking { c0 } = opts.bandwidth_policy {
            rd_n.bandwidth = BandwidthRule::Fixed {
                h: c0 * (n as f64).powf(-0.2),
            };
        }

        let mut taus = Vec::with_capacity(opts.reps);
        let mut bandwidths = Vec::with_capacity(opts.reps);
        let mut baseline_taus = Vec::with_capacity(if opts.include_baseline {
            opts.reps
        } else {
            0
        });
        let mut covered = 0usize;
        let mut redraws_row = 0usize;

        for rep in 0..opts.reps {
            let mut rng = stream_rng(opts.seed, &[scenario_tag, n as u64, rep as u64]);
            let (data, est) = loop {
                let data = generate_with(dgp, n, &mut rng)?;
                let attempt = match opts.bootstrap {
                    Some(b) => {
                        let boot_seed =
                            derive_seed(opts.seed, &[scenario_tag, n as u64, rep as u64, 0xC1]);
                        estimate_dr_with_bootstrap(&data, &rd_n, b.reps, b.level, boot_seed)
                    }
                    None => estimate_dr(&data, &rd_n),
                };
                match attempt {
                    Ok(est) => break (data, est),
                    Err(Error::EmptySide { .. }) => {
                        redraws_row += 1;
                        redraws_total += 1;
                        if redraws_total > redraw_cap {
                            return Err(Error::BootstrapDegenerate {
                                redraws: redraws_total,
                                cap: redraw_cap,
                            });
                        }
                    }
                    Err(e) => return Err(e),
                }
            };
            if let Some(ci) = est.ci {
                if ci.lo <= tau0 && tau0 <= ci.hi {
                    covered += 1;
                }
            }
            if opts.include_baseline {
                let b = estimate_local_linear_baseline(
                    &data,
                    rd_n.cutoff,
                    est.bandwidth_used,
                    rd_n.kernel,
                )?;
                baseline_taus.push(b.tau_hat);
            }
            taus.push(est.tau_hat);
            bandwidths.push(est.bandwidth_used);
        }

        let reps = opts.reps as f64;
        let mean = taus.iter().sum::<f64>() / reps;
        let rmse = (taus.iter().map(|t| (t - tau0).powi(2)).sum::<f64>() / reps).sqrt();
        let sd = (taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (reps - 1.0)).sqrt();
        let (baseline_mean, baseline_bias, baseline_mc_se) = if opts.include_baseline {
            let bm = baseline_taus.iter().sum::<f64>() / reps;
            let bsd = (baseline_taus.iter().map(|t| (t - bm).powi(2)).sum::<f64>()
                / (reps - 1.0))
                .sqrt();
            (Some(bm), Some(bm - tau0), Some(bsd / reps.sqrt()))
        } else {
            (None, None, None)
        };
        rows.push(McRow {
            n,
            reps: opts.reps,
            redraws: redraws_row,
            mean_estimate: mean,
            bias: mean - tau0,
            rmse,
            mc_se: sd / reps.sqrt(),
            mean_bandwidth: bandwidths.iter().sum::<f64>() / reps,
            coverage: opts.bootstrap.map(|_| covered as f64 / reps),
            baseline_mean,
            baseline_bias,
            baseline_mc_se,
        });
    }

    Ok(McReport {
        scenario: dgp.name.clone(),
        tau0,
        seed: opts.seed,
        reps: opts.reps,
        converged: assess_convergence(&rows),
        rows,
    })
}

/// Convergence heuristic over the grid: |bias| must never grow by more than
/// 3 combined MC standard errors between consecutive sizes, and the final
/// |bias| must be either statistically indistinguishable from zero or at
/// most 80% of the initial |bias|.
fn assess_convergence(rows: &[McRow]) -> bool {
    // Absolute floor so exact-recovery runs (bias and MC-SE both at
    // floating-point noise level) count as converged.
    const ABS_TOL: f64 = 1e-9;
    let b: Vec<f64> = rows.iter().map(|r| r.bias.abs()).collect();
    let se: Vec<f64> = rows.iter().map(|r| r.mc_se).collect();
    match rows.len() {
        0 => false,
        1 => b[0] <= 3.0 * se[0] + ABS_TOL,
        k => {
            let shrinking = (0..k - 1).all(|i| {
                b[i + 1] <= b[i] + 3.0 * (se[i].powi(2) + se[i + 1].powi(2)).sqrt() + ABS_TOL
            });
            let improved = b[k - 1] <= 3.0 * se[k - 1] + ABS_TOL || b[k - 1] <= 0.8 * b[0];
            shrinking && improved
        }
    }
}

/// Ready-made scenarios with declared effects.
pub mod scenarios {
    use super::*;

    /// Linear conditional means, jump of 1.0 at the cutoff.
    pub fn linear_jump() -> DgpSpec {
        DgpSpec {
            name: "linear_jump".into(),
            cutoff: 0.0,
            w_dist: Distribution1d::Uniform { lo: -1.0, hi: 1.0 },
            z_dists: vec![],
            noise_sd: 0.5,
            control: ArmFunction {
                w_poly: vec![0.2, 0.6],
                z_terms: vec![],
            },
            treated: ArmFunction {
                w_poly: vec![1.2, 0.9],
                z_terms: vec![],
            },
        }
    }

    /// Cubic conditional means with opposite curvature, jump of 0.5.
    pub fn curved_jump() -> DgpSpec {
        DgpSpec {
            name: "curved_jump".into(),
            cutoff: 0.0,
            w_dist: Distribution1d::Uniform { lo: -1.0, hi: 1.0 },
            z_dists: vec![],
            noise_sd: 0.3,
            control: ArmFunction {
                w_poly: vec![0.3, 0.4, 0.6, 0.5],
                z_terms: vec![],
            },
            treated: ArmFunction {
                w_poly: vec![0.8, 0.4, -0.6, -0.5],
                z_terms: vec![],
            },
        }
    }

    /// Two covariates entering both arms with different loadings; jump 0.75.
    pub fn covariate_shift() -> DgpSpec {
        DgpSpec {
            name: "covariate_shift".into(),
            cutoff: 0.0,
            w_dist: Distribution1d::Uniform { lo: -1.0, hi: 1.0 },
            z_dists: vec![
                Distribution1d::Uniform { lo: 0.0, hi: 1.0 },
                Distribution1d::Normal { mean: 0.0, sd: 1.0 },
            ],
            noise_sd: 0.3,
            control: ArmFunction {
                w_poly: vec![0.1, 0.4],
                z_terms: vec![
                    ZTerm { index: 0, degree: 1, coef: 0.5 },
                    ZTerm { index: 1, degree: 1, coef: 0.3 },
                ],
            },
            treated: ArmFunction {
                w_poly: vec![0.7, 0.2],
                z_terms: vec![
                    ZTerm { index: 0, degree: 1, coef: 0.8 },
                    ZTerm { index: 1, degree: 1, coef: -0.2 },
                ],
            },
        }
    }

    pub fn by_name(name: &str) -> Option<DgpSpec> {
        match name {
            "linear_jump" => Some(linear_jump()),
            "curved_jump" => Some(curved_jump()),
            "covariate_shift" => Some(covariate_shift()),
            _ => None,
        }
    }
}
