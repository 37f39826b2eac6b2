//! Error taxonomy for the estimation pipeline.
//!
//! Every failure mode maps to exactly one variant with a stable string code
//! (see [`Error::code`]); callers such as the CLI rely on the codes staying
//! fixed across releases.

use thiserror::Error;

/// All errors produced by this crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A numeric input was non-finite or structurally malformed.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The normalized Gram matrix of a bin failed the determinant guard.
    #[error("singular bin: |det| = {det:.6e} <= threshold {threshold:.6e}")]
    SingularBin { det: f64, threshold: f64 },

    /// Fewer observations than parameters (or rows than required).
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Requested more bins than observations.
    #[error("too many bins: m = {m} exceeds n = {n}")]
    TooManyBins { m: usize, n: usize },

    /// All confounder values are equal; cannot form more than one bin.
    #[error("degenerate confounder range: all values equal, cannot form {m} bins")]
    DegenerateRange { m: usize },

    /// Total sample size cannot satisfy the minimum bin occupancy.
    #[error("cannot satisfy min_bin_size {min_bin_size} with only {n} observations")]
    CannotSatisfy { min_bin_size: usize, n: usize },

    /// Every bin failed the well-posedness guard.
    #[error("no usable bins: every bin failed the determinant guard")]
    NoUsableBins,

    /// The global mean of a distorted predictor is too close to zero; the
    /// slope estimand divides by it.
    #[error("mean of distorted predictor {index} is {mean:.6e}, too close to zero")]
    MeanNearZero { index: usize, mean: f64 },

    /// Coefficient index out of range.
    #[error("coefficient index {index} out of range (p = {p})")]
    IndexOutOfRange { index: usize, p: usize },

    /// Confidence level outside (0, 1).
    #[error("confidence level {0} is outside (0, 1)")]
    InvalidLevel(f64),

    /// A distortion function evaluated to a non-finite value.
    #[error("distortion function returned a non-finite value at u = {u}")]
    InvalidDistortion { u: f64 },

    /// The limiting design moment matrix is singular.
    #[error("limiting design matrix is singular: |det| = {det:.6e}")]
    SingularDesignLimit { det: f64 },
}

impl Error {
    /// Stable machine-readable code for this error.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "INVALID_INPUT",
            Error::SingularBin { .. } => "SINGULAR_BIN",
            Error::InsufficientData(_) => "INSUFFICIENT_DATA",
            Error::TooManyBins { .. } => "TOO_MANY_BINS",
            Error::DegenerateRange { .. } => "DEGENERATE_RANGE",
            Error::CannotSatisfy { .. } => "CANNOT_SATISFY",
            Error::NoUsableBins => "NO_USABLE_BINS",
            Error::MeanNearZero { .. } => "MEAN_NEAR_ZERO",
            Error::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            Error::InvalidLevel(_) => "INVALID_LEVEL",
            Error::InvalidDistortion { .. } => "INVALID_DISTORTION",
            Error::SingularDesignLimit { .. } => "SINGULAR_DESIGN_LIMIT",
        }
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
