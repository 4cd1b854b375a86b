//! Observational data containers, treatment assignment, and design validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{BandwidthRule, KernelFamily};
use crate::outcome::OutcomeModelSpec;

/// Side of the discontinuity. Units with `w >= cutoff` are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Control,
    Treated,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treated];

    /// 0 for control, 1 for treated; used to index per-side storage.
    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treated => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Arm::Control => "control",
            Arm::Treated => "treated",
        }
    }
}

impl std::fmt::Display for Arm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// A cross-sectional sample: outcome `y`, running variable `w`, and an
/// optional block of pre-treatment covariates `z` stored row-major.
///
/// Construction rejects non-finite values and mismatched lengths, so every
/// `Dataset` in circulation is finite and rectangular.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    w: Vec<f64>,
    z: Vec<f64>,
    z_cols: usize,
}

impl Dataset {
    /// Builds a dataset with `z_cols` covariate columns; `z` is row-major of
    /// length `y.len() * z_cols`.
    pub fn new(y: Vec<f64>, w: Vec<f64>, z: Vec<f64>, z_cols: usize) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::ShapeMismatch("dataset has zero rows".into()));
        }
        if w.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "y has {} rows but w has {}",
                n,
                w.len()
            )));
        }
        if z.len() != n * z_cols {
            return Err(Error::ShapeMismatch(format!(
                "z has {} entries, expected {} rows x {} columns",
                z.len(),
                n,
                z_cols
            )));
        }
        check_finite(&y, "y")?;
        check_finite(&w, "w")?;
        for (i, row) in z.chunks_exact(z_cols.max(1)).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue { field: "z", row: i });
            }
        }
        Ok(Dataset { y, w, z, z_cols })
    }

    /// Dataset with no covariate block.
    pub fn without_covariates(y: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        Dataset::new(y, w, Vec::new(), 0)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn z_cols(&self) -> usize {
        self.z_cols
    }

    /// Covariate row for unit `i`; empty when the dataset has no covariates.
    pub fn z_row(&self, i: usize) -> &[f64] {
        if self.z_cols == 0 {
            &[]
        } else {
            &self.z[i * self.z_cols..(i + 1) * self.z_cols]
        }
    }

    /// New dataset holding the listed rows (with repetition), in order.
    /// Used by the pairs bootstrap.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let mut y = Vec::with_capacity(rows.len());
        let mut w = Vec::with_capacity(rows.len());
        let mut z = Vec::with_capacity(rows.len() * self.z_cols);
        for &i in rows {
            y.push(self.y[i]);
            w.push(self.w[i]);
            z.extend_from_slice(self.z_row(i));
        }
        Dataset {
            y,
            w,
            z,
            z_cols: self.z_cols,
        }
    }
}

fn check_finite(v: &[f64], field: &'static str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(row) => Err(Error::NonFiniteValue { field, row }),
        None => Ok(()),
    }
}

/// Everything the doubly robust estimator needs to know besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdConfig {
    pub cutoff: f64,
    #[serde(default)]
    pub kernel: KernelFamily,
    #[serde(default)]
    pub bandwidth: BandwidthRule,
    pub first_stage: OutcomeModelSpec,
}

impl RdConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.cutoff.is_finite() {
            return Err(Error::InvalidConfig("cutoff must be finite".into()));
        }
        self.bandwidth.validate()?;
        self.first_stage.validate()
    }
}

/// Deterministic sharp-design assignment: treated iff `w >= cutoff`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreatmentVector {
    arms: Vec<Arm>,
    counts: [usize; 2],
}

impl TreatmentVector {
    pub fn arm(&self, i: usize) -> Arm {
        self.arms[i]
    }

    pub fn n(&self) -> usize {
        self.arms.len()
    }

    pub fn count(&self, arm: Arm) -> usize {
        self.counts[arm.index()]
    }

    /// Indices of units on the given side, in dataset order.
    pub fn side_indices(&self, arm: Arm) -> Vec<usize> {
        (0..self.arms.len()).filter(|&i| self.arms[i] == arm).collect()
    }
}

/// Assigns each unit to a side of the cutoff. Ties (`w == cutoff`) are treated.
pub fn assign_treatment(data: &Dataset, cutoff: f64) -> TreatmentVector {
    let mut arms = Vec::with_capacity(data.n());
    let mut counts = [0usize; 2];
    for &w in data.w() {
        let arm = if w >= cutoff { Arm::Treated } else { Arm::Control };
        counts[arm.index()] += 1;
        arms.push(arm);
    }
    TreatmentVector { arms, counts }
}

/// A design that passed the preconditions for point estimation.
#[derive(Debug, Clone)]
pub struct ValidatedDesign {
    pub treatment: TreatmentVector,
}

/// Checks that the (data, config) pair supports estimation: finite inputs,
/// at least two units on each side of the cutoff, and a cutoff strictly
/// inside the observed running-variable range.
///
/// Side counts are checked before the range so that a one-sided sample
/// reports which side is missing rather than a range problem.
pub fn validate_for_estimation(data: &Dataset, cfg: &RdConfig) -> Result<ValidatedDesign> {
    cfg.validate()?;
    check_finite(data.y(), "y")?;
    check_finite(data.w(), "w")?;

    let treatment = assign_treatment(data, cfg.cutoff);
    for arm in Arm::BOTH {
        let got = treatment.count(arm);
        if got < 2 {
            return Err(Error::EmptySide {
                side: arm,
                got,
                needed: 2,
            });
        }
    }

    let min = data.w().iter().cloned().fold(f64::INFINITY, f64::min);
    let max = data.w().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(cfg.cutoff > min && cfg.cutoff < max) {
        return Err(Error::CutoffOutOfRange {
            cutoff: cfg.cutoff,
            min,
            max,
        });
    }

    Ok(ValidatedDesign { treatment })
}
