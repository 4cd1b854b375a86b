//! First-stage outcome models behind a single fit/predict interface.
//!
//! Each model is fitted separately on the treated and control sides, so no
//! information crosses the cutoff. Predictions are deterministic functions
//! of the fitted state.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Arm, Dataset, TreatmentVector};
use crate::error::{Error, Result};
use crate::kernel::KernelFamily;

/// Relative singular-value cutoff below which a design is treated as
/// rank deficient.
const RANK_RTOL: f64 = 1e-10;

/// Which first-stage estimator to fit on each side.
///
/// `ConstantZero` and `ConstantMean` are deliberately misspecified probes
/// used to exercise the estimator's robustness to a wrong first stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OutcomeModelSpec {
    /// Global polynomial regression on powers of `(w - cutoff)`, optionally
    /// augmented with per-covariate powers of z up to `z_degree`.
    PolynomialSieve {
        degree_w: u32,
        #[serde(default)]
        include_z: bool,
        #[serde(default)]
        z_degree: u32,
    },
    /// Kernel-weighted local average of y in w.
    NadarayaWatson {
        h: f64,
        #[serde(default)]
        family: KernelFamily,
    },
    /// Kernel-weighted linear fit in w, evaluated at the query point.
    LocalLinear {
        h: f64,
        #[serde(default)]
        family: KernelFamily,
    },
    /// Predicts 0 everywhere.
    ConstantZero,
    /// Predicts each side's sample mean of y everywhere.
    ConstantMean,
}

impl OutcomeModelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OutcomeModelSpec::NadarayaWatson { h, .. }
            | OutcomeModelSpec::LocalLinear { h, .. }
                if !(h.is_finite() && h > 0.0) =>
            {
                Err(Error::InvalidConfig(format!(
                    "outcome-model bandwidth must be positive, got {h}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Intercept and slope of a kernel-weighted linear fit centered at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalLinearFit {
    pub intercept: f64,
    pub slope: f64,
}

/// Weighted least squares of `y` on `1 + (w - center)` with kernel weights
/// `K((w - center) / h)`. The intercept is the fitted value at `center`.
pub fn local_linear_fit_at(
    w: &[f64],
    y: &[f64],
    center: f64,
    h: f64,
    family: KernelFamily,
    side: Arm,
) -> Result<LocalLinearFit> {
    let (mut s0, mut st, mut stt, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&wi, &yi) in w.iter().zip(y) {
        let t = wi - center;
        let k = family.eval(t / h);
        s0 += k;
        st += k * t;
        stt += k * t * t;
        sy += k * yi;
        sty += k * t * yi;
    }
    if s0 <= 0.0 {
        return Err(Error::ZeroDenominator {
            context: "local linear kernel weights",
        });
    }
    // Centered second moment; zero when the weighted support is a point.
    let suu = stt - st * st / s0;
    let suy = sty - st * sy / s0;
    // Negated so that a NaN moment also lands in the singular branch.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(suu > RANK_RTOL * stt.max(f64::MIN_POSITIVE)) {
        return Err(Error::SingularFit { side });
    }
    let slope = suy / suu;
    let intercept = (sy - slope * st) / s0;
    Ok(LocalLinearFit { intercept, slope })
}

#[derive(Debug, Clone, PartialEq)]
enum SideFit {
    Coefficients(Vec<f64>),
    Samples { w: Vec<f64>, y: Vec<f64> },
    Zero,
    Mean(f64),
}

/// Per-side fitted first stage; immutable after `fit`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedOutcomeModel {
    spec: OutcomeModelSpec,
    cutoff: f64,
    z_cols: usize,
    n_side: [usize; 2],
    sides: [SideFit; 2],
}

/// Fits the requested model independently on each side of the cutoff.
pub fn fit(
    spec: &OutcomeModelSpec,
    data: &Dataset,
    treatment: &TreatmentVector,
    cutoff: f64,
) -> Result<FittedOutcomeModel> {
    spec.validate()?;
    let mut sides = [SideFit::Zero, SideFit::Zero];
    let mut n_side = [0usize; 2];
    for arm in Arm::BOTH {
        let idx = treatment.side_indices(arm);
        n_side[arm.index()] = idx.len();
        sides[arm.index()] = fit_side(spec, data, &idx, arm, cutoff)?;
    }
    Ok(FittedOutcomeModel {
        spec: spec.clone(),
        cutoff,
        z_cols: data.z_cols(),
        n_side,
        sides,
    })
}

fn fit_side(
    spec: &OutcomeModelSpec,
    data: &Dataset,
    idx: &[usize],
    side: Arm,
    cutoff: f64,
) -> Result<SideFit> {
    match *spec {
        OutcomeModelSpec::PolynomialSieve {
            degree_w,
            include_z,
            z_degree,
        } => {
            let p = sieve_basis_len(degree_w, include_z, z_degree, data.z_cols());
            if idx.len() < p {
                return Err(Error::InsufficientData {
                    side,
                    got: idx.len(),
                    needed: p,
                });
            }
            let mut rows = Vec::with_capacity(idx.len() * p);
            for &i in idx {
                push_sieve_basis(
                    &mut rows,
                    degree_w,
                    include_z,
                    z_degree,
                    data.w()[i] - cutoff,
                    data.z_row(i),
                );
            }
            let x = DMatrix::from_row_slice(idx.len(), p, &rows);
            let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| data.y()[i]));
            Ok(SideFit::Coefficients(solve_ols(x, y, side)?))
        }
        OutcomeModelSpec::NadarayaWatson { .. } => {
            if idx.is_empty() {
                return Err(Error::InsufficientData {
                    side,
                    got: 0,
                    needed: 1,
                });
            }
            Ok(side_samples(data, idx))
        }
        OutcomeModelSpec::LocalLinear { .. } => {
            let mut distinct: Vec<f64> = idx.iter().map(|&i| data.w()[i]).collect();
            distinct.sort_by(|a, b| a.total_cmp(b));
            distinct.dedup();
            if distinct.len() < 2 {
                return Err(Error::InsufficientData {
                    side,
                    got: distinct.len(),
                    needed: 2,
                });
            }
            Ok(side_samples(data, idx))
        }
        OutcomeModelSpec::ConstantZero => Ok(SideFit::Zero),
        OutcomeModelSpec::ConstantMean => {
            if idx.is_empty() {
                return Err(Error::InsufficientData {
                    side,
                    got: 0,
                    needed: 1,
                });
            }
            let mean = idx.iter().map(|&i| data.y()[i]).sum::<f64>() / idx.len() as f64;
            Ok(SideFit::Mean(mean))
        }
    }
}

fn side_samples(data: &Dataset, idx: &[usize]) -> SideFit {
    SideFit::Samples {
        w: idx.iter().map(|&i| data.w()[i]).collect(),
        y: idx.iter().map(|&i| data.y()[i]).collect(),
    }
}

impl FittedOutcomeModel {
    /// μ̂(arm | w, z).
    pub fn predict(&self, arm: Arm, w: f64, z: &[f64]) -> Result<f64> {
        if z.len() != self.z_cols {
            return Err(Error::CovariateWidthMismatch {
                expected: self.z_cols,
                got: z.len(),
            });
        }
        match (&self.sides[arm.index()], &self.spec) {
            (SideFit::Coefficients(coef), OutcomeModelSpec::PolynomialSieve {
                degree_w,
                include_z,
                z_degree,
            }) => {
                let mut basis = Vec::with_capacity(coef.len());
                push_sieve_basis(&mut basis, *degree_w, *include_z, *z_degree, w - self.cutoff, z);
                Ok(basis.iter().zip(coef).map(|(b, c)| b * c).sum())
            }
            (SideFit::Samples { w: tw, y: ty }, OutcomeModelSpec::NadarayaWatson { h, family }) => {
                let mut num = 0.0;
                let mut den = 0.0;
                for (&wi, &yi) in tw.iter().zip(ty) {
                    let k = family.eval((wi - w) / h);
                    num += k * yi;
                    den += k;
                }
                if den <= 0.0 {
                    return Err(Error::ZeroDenominator {
                        context: "Nadaraya-Watson kernel weights",
                    });
                }
                Ok(num / den)
            }
            (SideFit::Samples { w: tw, y: ty }, OutcomeModelSpec::LocalLinear { h, family }) => {
                Ok(local_linear_fit_at(tw, ty, w, *h, *family, arm)?.intercept)
            }
            (SideFit::Zero, _) => Ok(0.0),
            (SideFit::Mean(m), _) => Ok(*m),
            _ => unreachable!("side fit state matches spec variant by construction"),
        }
    }

    /// μ̂(arm | c, z) — the plug-in prediction at the cutoff.
    pub fn predict_at_cutoff(&self, arm: Arm, z: &[f64]) -> Result<f64> {
        self.predict(arm, self.cutoff, z)
    }

    /// Fitted sieve coefficients for one side, if the model has any.
    pub fn coefficients(&self, arm: Arm) -> Option<&[f64]> {
        match &self.sides[arm.index()] {
            SideFit::Coefficients(c) => Some(c),
            _ => None,
        }
    }

    pub fn training_count(&self, arm: Arm) -> usize {
        self.n_side[arm.index()]
    }

    pub fn spec(&self) -> &OutcomeModelSpec {
        &self.spec
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }
}

fn sieve_basis_len(degree_w: u32, include_z: bool, z_degree: u32, z_cols: usize) -> usize {
    1 + degree_w as usize
        + if include_z {
            z_cols * z_degree as usize
        } else {
            0
        }
}

/// Appends the basis row {1, t, …, t^degree_w} ∪ {z_j^k : k ≤ z_degree}
/// for t = w − cutoff.
fn push_sieve_basis(
    out: &mut Vec<f64>,
    degree_w: u32,
    include_z: bool,
    z_degree: u32,
    t: f64,
    z: &[f64],
) {
    let mut pow = 1.0;
    out.push(1.0);
    for _ in 0..degree_w {
        pow *= t;
        out.push(pow);
    }
    if include_z {
        for &zj in z {
            let mut zp = 1.0;
            for _ in 0..z_degree {
                zp *= zj;
                out.push(zp);
            }
        }
    }
}

/// Least squares via Householder QR, with the rank of R checked through its
/// singular values (cheap: R is p×p).
fn solve_ols(x: DMatrix<f64>, y: DVector<f64>, side: Arm) -> Result<Vec<f64>> {
    let p = x.ncols();
    let qr = x.qr();
    let mut qty = y;
    qr.q_tr_mul(&mut qty);
    let r = qr.unpack_r();
    let svd = r.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_RTOL * smax)
        .count();
    if smax <= 0.0 || rank < p {
        return Err(Error::RankDeficientDesign { side, rank, cols: p });
    }
    let rhs = DVector::from_iterator(p, qty.iter().take(p).cloned());
    let beta = svd
        .solve(&rhs, 0.0)
        .map_err(|_| Error::SingularFit { side })?;
    Ok(beta.iter().cloned().collect())
}
