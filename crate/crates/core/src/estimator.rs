//! The doubly robust estimator, a local-linear baseline, and pairs-bootstrap
//! inference.
//!
//! Per unit and arm, the score splits into a localized residual correction
//! and a cutoff plug-in:
//!
//! ```text
//! psi(d, i) = 1[D_i = d] * (y_i - mu_hat(d | w_i, z_i)) * r_hat(d, w_i)
//!           + mu_hat(d | c, z_i)
//! ```
//!
//! The estimate aggregates the residual part as a within-side mean (the
//! weights r_hat average to one within a side) and the plug-in part as a
//! full-sample mean, then differences the arms.

use rand::Rng;
use serde::Serialize;

use crate::data::{validate_for_estimation, Arm, Dataset, RdConfig, TreatmentVector};
use crate::error::{Error, Result};
use crate::kernel::{select_bandwidth, KernelFamily, SideKernelStats};
use crate::outcome::{fit, local_linear_fit_at, FittedOutcomeModel};
use crate::rng::stream_rng;

/// A per-arm pair of reals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmPair {
    pub control: f64,
    pub treated: f64,
}

impl ArmPair {
    pub fn get(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Control => self.control,
            Arm::Treated => self.treated,
        }
    }

    fn from_fn(mut f: impl FnMut(Arm) -> f64) -> Self {
        ArmPair {
            control: f(Arm::Control),
            treated: f(Arm::Treated),
        }
    }
}

/// Per-unit score components, kept per arm.
///
/// `residual_term[arm][i]` is zero whenever unit `i` is on the other arm;
/// `plugin_term[arm][i]` is defined for every unit.
#[derive(Debug, Clone)]
pub struct PsiComponents {
    residual: [Vec<f64>; 2],
    plugin: [Vec<f64>; 2],
}

impl PsiComponents {
    pub fn n(&self) -> usize {
        self.residual[0].len()
    }

    pub fn residual_term(&self, arm: Arm) -> &[f64] {
        &self.residual[arm.index()]
    }

    pub fn plugin_term(&self, arm: Arm) -> &[f64] {
        &self.plugin[arm.index()]
    }

    /// Full score psi(arm, i).
    pub fn psi(&self, arm: Arm, i: usize) -> f64 {
        self.residual[arm.index()][i] + self.plugin[arm.index()][i]
    }
}

/// Two-sided confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

/// Point estimate with its decomposition and localization diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct DrEstimate {
    pub tau_hat: f64,
    /// Within-side mean of the residual correction term.
    pub eta_hat: ArmPair,
    /// Full-sample mean of the cutoff plug-in term.
    pub plugin_mean: ArmPair,
    pub se: Option<f64>,
    pub ci: Option<ConfidenceInterval>,
    pub n: usize,
    pub n_treated: usize,
    pub n_control: usize,
    pub bandwidth_used: f64,
    /// Side kernel means at the bandwidth used.
    pub zeta_hat: ArmPair,
    /// Kish effective sample size of the localization weights, per side.
    pub ess: ArmPair,
}

/// Evaluates the score components for a fitted first stage.
pub fn compute_psi(
    data: &Dataset,
    treatment: &TreatmentVector,
    model: &FittedOutcomeModel,
    cutoff: f64,
    h: f64,
    family: KernelFamily,
) -> Result<PsiComponents> {
    let stats = SideKernelStats::compute(data.w(), treatment, cutoff, h, family)?;
    let n = data.n();
    let mut residual = [vec![0.0; n], vec![0.0; n]];
    let mut plugin = [vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let z = data.z_row(i);
        for arm in Arm::BOTH {
            plugin[arm.index()][i] = model.predict_at_cutoff(arm, z)?;
        }
        let own = treatment.arm(i);
        let k = family.eval((data.w()[i] - cutoff) / h);
        let fitted = model.predict(own, data.w()[i], z)?;
        residual[own.index()][i] = (data.y()[i] - fitted) * k / stats.zeta(own);
    }
    Ok(PsiComponents { residual, plugin })
}

/// Doubly robust point estimate under the given configuration.
pub fn estimate_dr(data: &Dataset, cfg: &RdConfig) -> Result<DrEstimate> {
    let design = validate_for_estimation(data, cfg)?;
    let treatment = &design.treatment;
    let h = select_bandwidth(&cfg.bandwidth, data.w(), cfg.cutoff)?;
    let stats = SideKernelStats::compute(data.w(), treatment, cfg.cutoff, h, cfg.kernel)?;
    let model = fit(&cfg.first_stage, data, treatment, cfg.cutoff)?;
    let psi = compute_psi(data, treatment, &model, cfg.cutoff, h, cfg.kernel)?;

    let n = data.n();
    let eta_hat = ArmPair::from_fn(|arm| {
        psi.residual_term(arm).iter().sum::<f64>() / treatment.count(arm) as f64
    });
    let plugin_mean =
        ArmPair::from_fn(|arm| psi.plugin_term(arm).iter().sum::<f64>() / n as f64);
    let tau_hat = (eta_hat.treated + plugin_mean.treated)
        - (eta_hat.control + plugin_mean.control);

    // Kish ESS of the localization weights within each side.
    let mut sum_r2 = [0.0f64; 2];
    for i in 0..n {
        let arm = treatment.arm(i);
        let r = cfg.kernel.eval((data.w()[i] - cfg.cutoff) / h) / stats.zeta(arm);
        sum_r2[arm.index()] += r * r;
    }
    let ess = ArmPair::from_fn(|arm| {
        let nd = treatment.count(arm) as f64;
        nd * nd / sum_r2[arm.index()]
    });

    Ok(DrEstimate {
        tau_hat,
        eta_hat,
        plugin_mean,
        se: None,
        ci: None,
        n,
        n_treated: treatment.count(Arm::Treated),
        n_control: treatment.count(Arm::Control),
        bandwidth_used: h,
        zeta_hat: ArmPair {
            control: stats.control,
            treated: stats.treated,
        },
        ess,
    })
}

/// Conventional RD baseline: kernel-weighted linear fits on each side of the
/// cutoff, differencing the fitted values at the cutoff.
///
/// The result reuses the `DrEstimate` shape with the intercepts reported as
/// plug-in means and zero residual terms.
pub fn estimate_local_linear_baseline(
    data: &Dataset,
    cutoff: f64,
    h: f64,
    family: KernelFamily,
) -> Result<DrEstimate> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "baseline bandwidth must be positive, got {h}"
        )));
    }
    let treatment = crate::data::assign_treatment(data, cutoff);
    let mut intercepts = [0.0f64; 2];
    for arm in Arm::BOTH {
        let idx = treatment.side_indices(arm);
        let mut distinct: Vec<f64> = idx.iter().map(|&i| data.w()[i]).collect();
        distinct.sort_by(|a, b| a.total_cmp(b));
        distinct.dedup();
        if distinct.len() < 2 {
            return Err(Error::InsufficientData {
                side: arm,
                got: distinct.len(),
                needed: 2,
            });
        }
        let w: Vec<f64> = idx.iter().map(|&i| data.w()[i]).collect();
        let y: Vec<f64> = idx.iter().map(|&i| data.y()[i]).collect();
        intercepts[arm.index()] = local_linear_fit_at(&w, &y, cutoff, h, family, arm)?.intercept;
    }
    let stats = SideKernelStats::compute(data.w(), &treatment, cutoff, h, family)?;
    let mut sum_r2 = [0.0f64; 2];
    for i in 0..data.n() {
        let arm = treatment.arm(i);
        let r = family.eval((data.w()[i] - cutoff) / h) / stats.zeta(arm);
        sum_r2[arm.index()] += r * r;
    }
    let plugin_mean = ArmPair {
        control: intercepts[0],
        treated: intercepts[1],
    };
    Ok(DrEstimate {
        tau_hat: intercepts[1] - intercepts[0],
        eta_hat: ArmPair {
            control: 0.0,
            treated: 0.0,
        },
        plugin_mean,
        se: None,
        ci: None,
        n: data.n(),
        n_treated: treatment.count(Arm::Treated),
        n_control: treatment.count(Arm::Control),
        bandwidth_used: h,
        zeta_hat: ArmPair {
            control: stats.control,
            treated: stats.treated,
        },
        ess: ArmPair::from_fn(|arm| {
            let nd = treatment.count(arm) as f64;
            nd * nd / sum_r2[arm.index()]
        }),
    })
}

/// Pairs bootstrap: resample rows with replacement and re-run the full
/// pipeline (first-stage refit included). Returns the bootstrap standard
/// error and a percentile interval, widened if needed to contain the point
/// estimate. Resamples that lose a side of the cutoff are redrawn, with the
/// total number of redraws capped at `10 * reps`.
pub fn bootstrap_ci(
    data: &Dataset,
    cfg: &RdConfig,
    reps: usize,
    level: f64,
    seed: u64,
) -> Result<(f64, ConfidenceInterval)> {
    let base = estimate_dr(data, cfg)?;
    bootstrap_from_base(data, cfg, reps, level, seed, base.tau_hat)
}

/// `estimate_dr` plus bootstrap `se`/`ci` filled in, avoiding a duplicate
/// base fit.
pub fn estimate_dr_with_bootstrap(
    data: &Dataset,
    cfg: &RdConfig,
    reps: usize,
    level: f64,
    seed: u64,
) -> Result<DrEstimate> {
    let mut est = estimate_dr(data, cfg)?;
    let (se, ci) = bootstrap_from_base(data, cfg, reps, level, seed, est.tau_hat)?;
    est.se = Some(se);
    est.ci = Some(ci);
    Ok(est)
}

/// Stream tag separating bootstrap draws from other consumers of a seed.
const BOOTSTRAP_TAG: u64 = 0xB007;

fn bootstrap_from_base(
    data: &Dataset,
    cfg: &RdConfig,
    reps: usize,
    level: f64,
    seed: u64,
    tau_hat: f64,
) -> Result<(f64, ConfidenceInterval)> {
    if reps < 100 {
        return Err(Error::InvalidConfig(format!(
            "bootstrap requires at least 100 replications, got {reps}"
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    let n = data.n();
    let cap = 10 * reps;
    let mut redraws = 0usize;
    let mut taus = Vec::with_capacity(reps);
    for rep in 0..reps {
        let mut rng = stream_rng(seed, &[BOOTSTRAP_TAG, rep as u64]);
        loop {
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            match estimate_dr(&data.select(&idx), cfg) {
                Ok(est) => {
                    taus.push(est.tau_hat);
                    break;
                }
                Err(Error::EmptySide { .. }) => {
                    redraws += 1;
                    if redraws > cap {
                        return Err(Error::BootstrapDegenerate { redraws, cap });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }

    let mean = taus.iter().sum::<f64>() / reps as f64;
    let var = taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let se = var.sqrt();

    taus.sort_by(|a, b| a.total_cmp(b));
    let alpha = 1.0 - level;
    let lo = percentile(&taus, alpha / 2.0).min(tau_hat);
    let hi = percentile(&taus, 1.0 - alpha / 2.0).max(tau_hat);
    Ok((se, ConfidenceInterval { lo, hi, level }))
}

/// Linear-interpolation quantile of a sorted sample.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    let pos = p * (m - 1) as f64;
    let i = pos.floor() as usize;
    if i + 1 >= m {
        return sorted[m - 1];
    }
    let frac = pos - i as f64;
    sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
}
