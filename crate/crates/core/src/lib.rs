//! Covariate-adjusted regression.
//!
//! Estimates the coefficients of a linear regression when both the response
//! and the predictors are observed only after multiplicative distortion by
//! unknown smooth functions of an observed confounder u:
//!
//! ```text
//!   y = γ₀ + Σ_r γ_r x_r + e        (unobserved)
//!   x̃_r = φ_r(u)·x_r,  ỹ = ψ(u)·y   (observed)
//! ```
//!
//! with E ψ(U) = E φ_r(U) = 1 so the mean distorting effect vanishes. The
//! observed variables follow a varying-coefficient model in u; binning the
//! confounder range, fitting an ordinary regression inside each bin, and
//! averaging the per-bin coefficients with bin-count weights recovers γ.
//! Plug-in estimates of the asymptotic variances give large-sample
//! confidence intervals.
//!
//! Modules:
//! - [`linalg`]: small dense Gram/OLS kernels with a determinant guard
//! - [`binning`]: equidistant bins and sparse-bin merging
//! - [`estimator`]: per-bin fits and the weighted-average estimator
//! - [`inference`]: plug-in variances and confidence intervals
//! - [`distortion`]: distortion catalogue and identifiability checks
//! - [`simulation`]: data generation, Monte Carlo coverage studies, and
//!   the theoretical-variance oracle

// Index loops follow the subscripts in the estimator's formulas; negated
// comparisons reject NaN along with the out-of-range value.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binning;
pub mod distortion;
pub mod error;
pub mod estimator;
pub mod inference;
pub mod linalg;
pub mod simulation;

pub use binning::{make_bins, merge_sparse_bins, BinPartition};
pub use distortion::{
    identity_distortions, paper_distortions, validate_identifiability, DistortionFn,
    DistortionSpec, IdentifiabilityReport, ULaw,
};
pub use error::{Error, Result};
pub use estimator::{
    car_fit, default_min_bin_size, estimate_gamma, export_raw_coefficients, fit_bins, BinFit,
    CarFit, Dataset, RawCoefficientRow, SkippedBin,
};
pub use inference::{
    build_report, confidence_interval, estimate_variances, standard_normal_quantile, CarReport,
    CoefficientReport, ConfidenceInterval, VarianceEstimates,
};
pub use linalg::{gram, guarded_ols, Matrix, OlsResult};
pub use simulation::{
    generate, identity_model, normality_check, paper_model, run_monte_carlo, table_bin_count,
    theoretical_variance, CoefficientSummary, GenerativeModel, NormalityReport, PredictorLaw,
    SimulationConfig, SimulationReport, TheoreticalVariance,
};
