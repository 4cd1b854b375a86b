//! Error types shared across the crate.

use thiserror::Error;

use crate::data::Arm;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by estimation, simulation, and validation.
#[derive(Debug, Error)]
pub enum Error {
    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value in `{field}` at row {row}")]
    NonFiniteValue { field: &'static str, row: usize },

    /// Input containers disagree on shape.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// A treatment side has fewer than the required units.
    #[error("{side} side has {got} units, need at least {needed}")]
    EmptySide { side: Arm, got: usize, needed: usize },

    /// The cutoff does not lie strictly inside the observed running-variable range.
    #[error("cutoff {cutoff} outside observed running-variable range ({min}, {max})")]
    CutoffOutOfRange { cutoff: f64, min: f64, max: f64 },

    /// Rule-of-thumb bandwidth selection on data with zero dispersion.
    #[error("rule-of-thumb bandwidth is degenerate: running variable has zero variance")]
    DegenerateBandwidth,

    /// A kernel-weight denominator collapsed to zero.
    #[error("zero denominator in {context}; widen the bandwidth or use a non-compact kernel")]
    ZeroDenominator { context: &'static str },

    /// The regression design matrix is rank deficient beyond tolerance.
    #[error("rank-deficient design on the {side} side (rank {rank} of {cols} columns)")]
    RankDeficientDesign { side: Arm, rank: usize, cols: usize },

    /// Too few observations to identify the requested model.
    #[error("insufficient data on the {side} side: {got} units, need {needed}")]
    InsufficientData { side: Arm, got: usize, needed: usize },

    /// A weighted fit has a singular normal system.
    #[error("singular weighted fit on the {side} side")]
    SingularFit { side: Arm },

    /// Prediction received a covariate row of the wrong width.
    #[error("covariate width mismatch: model trained with {expected} columns, got {got}")]
    CovariateWidthMismatch { expected: usize, got: usize },

    /// A closed-form moment of the covariate distribution is not available.
    #[error("unsupported moment of degree {degree} (max supported: {max})")]
    UnsupportedMoment { degree: u32, max: u32 },

    /// Bootstrap resampling kept producing one-sided samples.
    #[error("degenerate resampling: {redraws} empty-side redraws exceeded cap {cap}")]
    BootstrapDegenerate { redraws: usize, cap: usize },

    /// A configuration value is out of its valid range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Stable machine-readable code for this error, used by report writers.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::EmptySide { .. } => "EmptySide",
            Error::CutoffOutOfRange { .. } => "CutoffOutOfRange",
            Error::DegenerateBandwidth => "DegenerateBandwidth",
            Error::ZeroDenominator { .. } => "ZeroDenominator",
            Error::RankDeficientDesign { .. } => "RankDeficientDesign",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::SingularFit { .. } => "SingularFit",
            Error::CovariateWidthMismatch { .. } => "CovariateWidthMismatch",
            Error::UnsupportedMoment { .. } => "UnsupportedMoment",
            Error::BootstrapDegenerate { .. } => "BootstrapDegenerate",
            Error::InvalidConfig(_) => "InvalidConfig",
        }
    }
}
