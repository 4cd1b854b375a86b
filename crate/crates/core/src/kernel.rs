//! Kernel families, bandwidth selection, and localization weights.
//!
//! Localization weights rescale kernel values so that they average to one
//! within each treatment side:
//!
//! ```text
//! r(d, w) = K((w - c) / h) / zeta(d),   zeta(d) = mean of K((w_i - c) / h) over side d
//! ```

use serde::{Deserialize, Serialize};

use crate::data::{Arm, TreatmentVector};
use crate::error::{Error, Result};

/// Symmetric second-order kernels on `[-1, 1]` (Gaussian has full support).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    #[default]
    Triangular,
    Epanechnikov,
    Uniform,
    Gaussian,
}

impl KernelFamily {
    /// Kernel value at standardized distance `u`.
    pub fn eval(self, u: f64) -> f64 {
        match self {
            KernelFamily::Triangular => (1.0 - u.abs()).max(0.0),
            KernelFamily::Epanechnikov => 0.75 * (1.0 - u * u).max(0.0),
            KernelFamily::Uniform => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
            KernelFamily::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        }
    }

    /// Whether the kernel vanishes outside `[-1, 1]`.
    pub fn is_compact(self) -> bool {
        !matches!(self, KernelFamily::Gaussian)
    }
}

/// How the localization bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BandwidthRule {
    /// Use `h` as-is.
    Fixed { h: f64 },
    /// Silverman-style `1.06 * sd(w) * n^(-1/5)`, floored so that each side
    /// keeps at least two units with nonzero weight under a compact kernel.
    #[default]
    RuleOfThumb,
}

impl BandwidthRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BandwidthRule::Fixed { h } if !(h.is_finite() && h > 0.0) => Err(
                Error::InvalidConfig(format!("fixed bandwidth must be positive, got {h}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Resolves a bandwidth rule against the observed running variable.
///
/// The rule-of-thumb floor is data-driven: it raises `h` to just above the
/// second-smallest distance to the cutoff on the sparser side, which is the
/// smallest bandwidth keeping two units in a compact kernel's window per side.
pub fn select_bandwidth(rule: &BandwidthRule, w: &[f64], cutoff: f64) -> Result<f64> {
    match *rule {
        BandwidthRule::Fixed { h } => {
            rule.validate()?;
            Ok(h)
        }
        BandwidthRule::RuleOfThumb => {
            let n = w.len();
            if n < 2 {
                return Err(Error::DegenerateBandwidth);
            }
            let mean = w.iter().sum::<f64>() / n as f64;
            let ss: f64 = w.iter().map(|x| (x - mean).powi(2)).sum();
            let sd = (ss / (n - 1) as f64).sqrt();
            if sd <= 0.0 {
                return Err(Error::DegenerateBandwidth);
            }
            let h = 1.06 * sd * (n as f64).powf(-0.2);
            Ok(h.max(minimum_two_unit_bandwidth(w, cutoff)?))
        }
    }
}

/// Second-smallest |w - c| over each side, maximized across sides and nudged
/// up so the boundary unit gets strictly positive weight.
fn minimum_two_unit_bandwidth(w: &[f64], cutoff: f64) -> Result<f64> {
    let mut floor = 0.0f64;
    for arm in Arm::BOTH {
        let mut dist: Vec<f64> = w
            .iter()
            .filter(|&&x| (x >= cutoff) == (arm == Arm::Treated))
            .map(|&x| (x - cutoff).abs())
            .collect();
        if dist.len() < 2 {
            return Err(Error::EmptySide {
                side: arm,
                got: dist.len(),
                needed: 2,
            });
        }
        dist.sort_by(|a, b| a.total_cmp(b));
        floor = floor.max(dist[1]);
    }
    Ok(floor * (1.0 + 1e-9))
}

/// Mean kernel value over the units of one side.
pub fn side_kernel_mean(
    w: &[f64],
    treatment: &TreatmentVector,
    side: Arm,
    cutoff: f64,
    h: f64,
    family: KernelFamily,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, &wi) in w.iter().enumerate() {
        if treatment.arm(i) == side {
            sum += family.eval((wi - cutoff) / h);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptySide {
            side,
            got: 0,
            needed: 1,
        });
    }
    Ok(sum / count as f64)
}

/// Localization weight for one unit given its side's kernel mean.
pub fn localization_weight(
    w: f64,
    side_mean: f64,
    cutoff: f64,
    h: f64,
    family: KernelFamily,
) -> Result<f64> {
    if side_mean <= 0.0 {
        return Err(Error::ZeroDenominator {
            context: "side kernel mean",
        });
    }
    Ok(family.eval((w - cutoff) / h) / side_mean)
}

/// Per-side kernel means at a resolved bandwidth; both strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SideKernelStats {
    pub control: f64,
    pub treated: f64,
    pub bandwidth: f64,
}

impl SideKernelStats {
    pub fn compute(
        w: &[f64],
        treatment: &TreatmentVector,
        cutoff: f64,
        h: f64,
        family: KernelFamily,
    ) -> Result<Self> {
        let mut zeta = [0.0f64; 2];
        for arm in Arm::BOTH {
            let m = side_kernel_mean(w, treatment, arm, cutoff, h, family)?;
            if m <= 0.0 {
                return Err(Error::ZeroDenominator {
                    context: "side kernel mean",
                });
            }
            zeta[arm.index()] = m;
        }
        Ok(SideKernelStats {
            control: zeta[0],
            treated: zeta[1],
            bandwidth: h,
        })
    }

    pub fn zeta(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Control => self.control,
            Arm::Treated => self.treated,
        }
    }
}
