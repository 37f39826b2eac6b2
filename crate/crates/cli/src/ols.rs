//! Naive global least squares with classical t-intervals, the unadjusted
//! comparison column shown next to every adjusted fit.

use crate::error::CliResult;
use carfit_core::{guarded_ols, CoefficientReport, Dataset, Matrix};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Fit y on [1, x] by least squares and build level-`level` t-intervals
/// with n − p − 1 degrees of freedom.
pub fn ols_with_t_intervals(
    data: &Dataset,
    level: f64,
    det_threshold: f64,
    labels: &[String],
) -> CliResult<Vec<CoefficientReport>> {
    let (n, p) = (data.n(), data.p());
    let mut design = Matrix::zeros(n, p + 1);
    for i in 0..n {
        design.set(i, 0, 1.0);
        for r in 0..p {
            design.set(i, r + 1, data.x_tilde().get(i, r));
        }
    }
    let fit = guarded_ols(&design, data.y_tilde(), det_threshold)?;
    let dof = (n - p - 1) as f64;
    let s_sq = if dof > 0.0 {
        fit.residual_sum_squares / dof
    } else {
        0.0
    };
    let t = StudentsT::new(0.0, 1.0, dof)
        .expect("valid dof")
        .inverse_cdf(0.5 + level / 2.0);

    let mut out = Vec::with_capacity(p + 1);
    for j in 0..=p {
        // (XᵀX)⁻¹ = inverse of (n·G) = G⁻¹ / n
        let se = (s_sq * fit.inverse_gram.get(j, j) / n as f64).sqrt();
        let half = t * se;
        out.push(CoefficientReport {
            label: labels[j].clone(),
            estimate: fit.coefficients[j],
            std_error: se,
            lower: fit.coefficients[j] - half,
            upper: fit.coefficients[j] + half,
            level,
        });
    }
    Ok(out)
}
