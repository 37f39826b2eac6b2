//! Plug-in asymptotic variance estimates and confidence intervals.
//!
//! The variance of √n(γ̂_r − γ_r) is estimated from the per-bin fits. For
//! the intercept:
//!
//!   σ̂²_0 = [Σ_j w_j β̂²_0j − γ̂²_0] + (RSS/n) · Σ_j w_j (G_j⁻¹)_00
//!
//! and for slope r (intercept-first layout, so the slope-r diagonal of the
//! inverse normalized Gram is element (r, r) with zero-based indexing):
//!
//!   σ̂²_r = { (1/n) Σ_j β̂²_rj S_jr + γ̂²_r x̄²_r − (2γ̂_r/n) Σ_j β̂_rj S_jr
//!             + γ̂²_r s²_r + (RSS/n) · Σ_j w_j x̄'²_rj (G_j⁻¹)_rr } / x̄²_r
//!
//! with w_j = L_j/n, S_jr the bin sum of squared distorted predictor r,
//! s²_r the sample variance of distorted predictor r, and RSS/n the pooled
//! residual term shared by all coefficients. Sums run over fitted bins and
//! n is the fitted-bin total; x̄_r and s²_r use all observations.
//!
//! Intervals are the asymptotic γ̂_r ± z_{α/2}·σ̂_r/√n.

use crate::error::{Error, Result};
use crate::estimator::CarFit;
use serde::{Deserialize, Serialize};

/// Additive pieces of one coefficient's variance estimate, for diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum VarianceTerms {
    Intercept {
        /// Σ_j w_j β̂²_0j − γ̂²_0, the weighted spread of the raw intercepts.
        beta_spread: f64,
        /// (RSS/n) · Σ_j w_j (G_j⁻¹)_00.
        noise: f64,
    },
    Slope {
        /// (1/n) Σ_j β̂²_rj S_jr.
        beta_sq_moment: f64,
        /// γ̂²_r x̄²_r.
        gamma_sq_mean_sq: f64,
        /// −(2γ̂_r/n) Σ_j β̂_rj S_jr.
        cross_moment: f64,
        /// γ̂²_r s²_r.
        gamma_sq_sample_var: f64,
        /// (RSS/n) · Σ_j w_j x̄'²_rj (G_j⁻¹)_rr.
        noise: f64,
        /// x̄²_r, the denominator.
        mean_sq: f64,
    },
}

/// Plug-in variance estimates for all coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceEstimates {
    /// σ̂²_r for r = 0..p. May be negative in small samples; interval
    /// construction clamps at zero, these are the raw values.
    pub sigma_sq: Vec<f64>,
    /// (1/n) Σ_j RSS_j, the shared residual term.
    pub pooled_rss_over_n: f64,
    pub per_coef_terms: Vec<VarianceTerms>,
}

/// Estimate the asymptotic variances from a combined fit.
pub fn estimate_variances(fit: &CarFit) -> Result<VarianceEstimates> {
    if fit.bin_fits.is_empty() {
        return Err(Error::NoUsableBins);
    }
    let p = fit.p();
    for (r, &bar) in fit.x_bar_global.iter().enumerate() {
        if bar.abs() < 1e-10 {
            return Err(Error::MeanNearZero {
                index: r + 1,
                mean: bar,
            });
        }
    }
    let n = fit.n_fitted as f64;
    let pooled_rss_over_n = fit.bin_fits.iter().map(|f| f.rss).sum::<f64>() / n;

    let mut sigma_sq = Vec::with_capacity(p + 1);
    let mut per_coef_terms = Vec::with_capacity(p + 1);

    let gamma0 = fit.gamma_hat[0];
    let mut beta0_sq = 0.0;
    let mut invgram00 = 0.0;
    for f in &fit.bin_fits {
        let w = f.count as f64 / n;
        beta0_sq += w * f.beta[0] * f.beta[0];
        invgram00 += w * f.inverse_gram.get(0, 0);
    }
    let beta_spread = beta0_sq - gamma0 * gamma0;
    let noise0 = pooled_rss_over_n * invgram00;
    sigma_sq.push(beta_spread + noise0);
    per_coef_terms.push(VarianceTerms::Intercept {
        beta_spread,
        noise: noise0,
    });

    for r in 1..=p {
        let gamma_r = fit.gamma_hat[r];
        let x_bar = fit.x_bar_global[r - 1];
        let mean_sq = x_bar * x_bar;

        let mut beta_sq_moment = 0.0;
        let mut cross_sum = 0.0;
        let mut noise_sum = 0.0;
        for f in &fit.bin_fits {
            let w = f.count as f64 / n;
            let s = f.sum_x_sq_bin[r - 1];
            beta_sq_moment += f.beta[r] * f.beta[r] * s;
            cross_sum += f.beta[r] * s;
            let xb = f.x_bar_bin[r - 1];
            noise_sum += w * xb * xb * f.inverse_gram.get(r, r);
        }
        beta_sq_moment /= n;
        let cross_moment = -2.0 * gamma_r * cross_sum / n;
        let gamma_sq_mean_sq = gamma_r * gamma_r * mean_sq;
        let gamma_sq_sample_var = gamma_r * gamma_r * fit.x_sample_variance[r - 1];
        let noise = pooled_rss_over_n * noise_sum;

        sigma_sq.push(
            (beta_sq_moment + gamma_sq_mean_sq + cross_moment + gamma_sq_sample_var + noise)
                / mean_sq,
        );
        per_coef_terms.push(VarianceTerms::Slope {
            beta_sq_moment,
            gamma_sq_mean_sq,
            cross_moment,
            gamma_sq_sample_var,
            noise,
            mean_sq,
        });
    }

    Ok(VarianceEstimates {
        sigma_sq,
        pooled_rss_over_n,
        per_coef_terms,
    })
}

/// A two-sided asymptotic confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub std_error: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Build the interval estimate ± z_{α/2}·σ̂/√n. Negative variance
/// estimates are clamped to zero (they can occur in small samples).
pub fn confidence_interval(
    estimate: f64,
    sigma_hat_sq: f64,
    n: usize,
    level: f64,
) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidLevel(level));
    }
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if !estimate.is_finite() || !sigma_hat_sq.is_finite() {
        return Err(Error::InvalidInput("non-finite interval inputs".into()));
    }
    let std_error = sigma_hat_sq.max(0.0).sqrt() / (n as f64).sqrt();
    let z = standard_normal_quantile(0.5 + level / 2.0);
    let half = z * std_error;
    Ok(ConfidenceInterval {
        estimate,
        lower: estimate - half,
        upper: estimate + half,
        level,
        std_error,
    })
}

/// Quantile of the standard normal distribution (inverse CDF).
///
/// Rational approximation with relative error below 1e-15 over (0, 1)
/// (Wichura's algorithm). Panics outside (0, 1).
pub fn standard_normal_quantile(prob: f64) -> f64 {
    assert!(prob > 0.0 && prob < 1.0, "quantile needs p in (0,1)");
    let q = prob - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&CENTRAL_NUM, r) / poly(&CENTRAL_DEN, r);
    }
    let mut r = if q < 0.0 { prob } else { 1.0 - prob };
    r = (-r.ln()).sqrt();
    let v = if r <= 5.0 {
        let r = r - 1.6;
        poly(&TAIL_NUM, r) / poly(&TAIL_DEN, r)
    } else {
        let r = r - 5.0;
        poly(&FAR_TAIL_NUM, r) / poly(&FAR_TAIL_DEN, r)
    };
    if q < 0.0 {
        -v
    } else {
        v
    }
}

fn poly(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[allow(clippy::excessive_precision)]
const CENTRAL_NUM: [f64; 8] = [
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
];
#[allow(clippy::excessive_precision)]
const CENTRAL_DEN: [f64; 8] = [
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
];
#[allow(clippy::excessive_precision)]
const TAIL_NUM: [f64; 8] = [
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];
#[allow(clippy::excessive_precision)]
const TAIL_DEN: [f64; 8] = [
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];
#[allow(clippy::excessive_precision)]
const FAR_TAIL_NUM: [f64; 8] = [
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
#[allow(clippy::excessive_precision)]
const FAR_TAIL_DEN: [f64; 8] = [
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];

/// One coefficient's entry in a machine-readable fit report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientReport {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

/// Machine-readable fit report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarReport {
    pub n: usize,
    pub bins_used: usize,
    pub bins_skipped: usize,
    pub m_initial: usize,
    pub m_final: usize,
    pub det_threshold: f64,
    pub coefficients: Vec<CoefficientReport>,
}

/// Assemble the fit report from a fit and its variance estimates.
/// `labels` names the coefficients, intercept first.
pub fn build_report(
    fit: &CarFit,
    variances: &VarianceEstimates,
    level: f64,
    m_initial: usize,
    det_threshold: f64,
    labels: &[String],
) -> Result<CarReport> {
    let p = fit.p();
    if labels.len() != p + 1 {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} coefficients",
            labels.len(),
            p + 1
        )));
    }
    let mut coefficients = Vec::with_capacity(p + 1);
    for r in 0..=p {
        let ci = confidence_interval(fit.gamma_hat[r], variances.sigma_sq[r], fit.n_fitted, level)?;
        coefficients.push(CoefficientReport {
            label: labels[r].clone(),
            estimate: ci.estimate,
            std_error: ci.std_error,
            lower: ci.lower,
            upper: ci.upper,
            level,
        });
    }
    Ok(CarReport {
        n: fit.n,
        bins_used: fit.bin_fits.len(),
        bins_skipped: fit.skipped_bins.len(),
        m_initial,
        m_final: fit.partition.num_bins(),
        det_threshold,
        coefficients,
    })
}
