//! Per-bin least squares and the weighted-average coefficient estimator.
//!
//! The observed response and predictors follow a varying-coefficient model
//! in the confounder u: within a narrow bin the coefficients are nearly
//! constant, so an ordinary regression of the distorted response on the
//! distorted predictors in each bin yields raw coefficients β̂_j. The
//! underlying coefficients are recovered as bin-count-weighted averages:
//!
//!   γ̂_0 = Σ_j (L_j/n) β̂_0j
//!   γ̂_r = (1/x̄_r) Σ_j (L_j/n) β̂_rj x̄'_rj,   r = 1..p
//!
//! where x̄_r is the global mean of distorted predictor r and x̄'_rj its
//! mean inside bin j.

use crate::binning::BinPartition;
use crate::error::{Error, Result};
use crate::linalg::{guarded_ols, Matrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Observed data: confounder, distorted predictors, distorted response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    u: Vec<f64>,
    x_tilde: Matrix,
    y_tilde: Vec<f64>,
}

impl Dataset {
    /// Validate and assemble a dataset. `x_tilde` is n×p.
    pub fn new(u: Vec<f64>, x_tilde: Matrix, y_tilde: Vec<f64>) -> Result<Self> {
        let n = u.len();
        if x_tilde.rows() != n || y_tilde.len() != n {
            return Err(Error::InvalidInput(format!(
                "inconsistent lengths: u={}, x rows={}, y={}",
                n,
                x_tilde.rows(),
                y_tilde.len()
            )));
        }
        let p = x_tilde.cols();
        if p < 1 {
            return Err(Error::InvalidInput("need at least one predictor".into()));
        }
        if n < p + 2 {
            return Err(Error::InsufficientData(format!(
                "n = {} observations for p = {} predictors",
                n, p
            )));
        }
        if u.iter().chain(y_tilde.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite observation".into()));
        }
        Ok(Dataset { u, x_tilde, y_tilde })
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn p(&self) -> usize {
        self.x_tilde.cols()
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn x_tilde(&self) -> &Matrix {
        &self.x_tilde
    }

    pub fn y_tilde(&self) -> &[f64] {
        &self.y_tilde
    }

    /// Global means of the distorted predictors, over all n observations.
    pub fn x_bar_global(&self) -> Vec<f64> {
        let (n, p) = (self.n(), self.p());
        let mut bar = vec![0.0; p];
        for i in 0..n {
            for r in 0..p {
                bar[r] += self.x_tilde.get(i, r);
            }
        }
        for b in bar.iter_mut() {
            *b /= n as f64;
        }
        bar
    }

    /// Sample variances (n−1 denominator) of the distorted predictors.
    pub fn x_sample_variance(&self) -> Vec<f64> {
        let (n, p) = (self.n(), self.p());
        let bar = self.x_bar_global();
        let mut s2 = vec![0.0; p];
        for i in 0..n {
            for r in 0..p {
                let d = self.x_tilde.get(i, r) - bar[r];
                s2[r] += d * d;
            }
        }
        for v in s2.iter_mut() {
            *v /= (n - 1) as f64;
        }
        s2
    }
}

/// Per-bin regression output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinFit {
    pub bin_index: usize,
    /// Observations in this bin.
    pub count: usize,
    /// Raw coefficients, intercept first, length p+1.
    pub beta: Vec<f64>,
    /// Bin means of the distorted predictors, length p.
    pub x_bar_bin: Vec<f64>,
    /// Inverse of the bin's normalized Gram, (p+1)×(p+1).
    pub inverse_gram: Matrix,
    /// Per-predictor sums of squared distorted values in the bin, length p.
    pub sum_x_sq_bin: Vec<f64>,
    /// Bin residual sum of squares.
    pub rss: f64,
}

/// A bin excluded from fitting, with the reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedBin {
    pub bin_index: usize,
    pub count: usize,
    pub code: String,
    pub reason: String,
}

/// The combined fit: recovered coefficients plus everything the variance
/// estimators need.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CarFit {
    /// Recovered coefficients, intercept first, length p+1.
    pub gamma_hat: Vec<f64>,
    /// Global distorted-predictor means over all n observations.
    pub x_bar_global: Vec<f64>,
    /// Sample variances of the distorted predictors (n−1 denominator).
    pub x_sample_variance: Vec<f64>,
    pub bin_fits: Vec<BinFit>,
    pub skipped_bins: Vec<SkippedBin>,
    pub partition: BinPartition,
    /// Total observations in the dataset.
    pub n: usize,
    /// Observations inside fitted bins; the weight denominator.
    pub n_fitted: usize,
}

impl CarFit {
    pub fn p(&self) -> usize {
        self.gamma_hat.len() - 1
    }
}

/// Design matrix [1, x̃] restricted to the rows of one bin.
fn bin_design(data: &Dataset, members: &[usize]) -> Matrix {
    let p = data.p();
    let mut design = Matrix::zeros(members.len(), p + 1);
    for (row, &i) in members.iter().enumerate() {
        design.set(row, 0, 1.0);
        for r in 0..p {
            design.set(row, r + 1, data.x_tilde().get(i, r));
        }
    }
    design
}

fn fit_one_bin(
    data: &Dataset,
    members: &[usize],
    bin_index: usize,
    det_threshold: f64,
) -> std::result::Result<BinFit, SkippedBin> {
    let p = data.p();
    let count = members.len();
    let skip = |e: &Error| SkippedBin {
        bin_index,
        count,
        code: e.code().to_string(),
        reason: e.to_string(),
    };
    if count < p + 1 {
        return Err(skip(&Error::InsufficientData(format!(
            "bin {} has {} observations for {} parameters",
            bin_index,
            count,
            p + 1
        ))));
    }
    let design = bin_design(data, members);
    let response: Vec<f64> = members.iter().map(|&i| data.y_tilde()[i]).collect();
    let ols = match guarded_ols(&design, &response, det_threshold) {
        Ok(f) => f,
        Err(e @ (Error::SingularBin { .. } | Error::InsufficientData(_))) => {
            return Err(skip(&e))
        }
        Err(e) => return Err(skip(&e)),
    };

    let mut x_bar_bin = vec![0.0; p];
    let mut sum_x_sq_bin = vec![0.0; p];
    for &i in members {
        for r in 0..p {
            let v = data.x_tilde().get(i, r);
            x_bar_bin[r] += v;
            sum_x_sq_bin[r] += v * v;
        }
    }
    for b in x_bar_bin.iter_mut() {
        *b /= count as f64;
    }

    Ok(BinFit {
        bin_index,
        count,
        beta: ols.coefficients,
        x_bar_bin,
        inverse_gram: ols.inverse_gram,
        sum_x_sq_bin,
        rss: ols.residual_sum_squares,
    })
}

/// Fit the per-bin regressions. Bins failing the determinant guard (or too
/// small to fit) are recorded as skipped, not fitted. Bins are processed in
/// parallel; the output is ordered by bin index regardless of scheduling.
pub fn fit_bins(
    data: &Dataset,
    partition: &BinPartition,
    det_threshold: f64,
) -> Result<(Vec<BinFit>, Vec<SkippedBin>)> {
    if partition.n() != data.n() {
        return Err(Error::InvalidInput(
            "partition was built over a different sample".into(),
        ));
    }
    let m = partition.num_bins();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, &a) in partition.assignments.iter().enumerate() {
        members[a].push(i);
    }

    let results: Vec<std::result::Result<BinFit, SkippedBin>> = members
        .par_iter()
        .enumerate()
        .map(|(j, mem)| fit_one_bin(data, mem, j, det_threshold))
        .collect();

    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r {
            Ok(f) => fits.push(f),
            Err(s) => skipped.push(s),
        }
    }
    if fits.is_empty() {
        return Err(Error::NoUsableBins);
    }
    Ok((fits, skipped))
}

/// Combine per-bin fits into the recovered coefficients.
///
/// Weights are L_j over the fitted-bin total, so they renormalize when bins
/// were skipped; the global predictor means always use all n observations.
pub fn estimate_gamma(
    bin_fits: Vec<BinFit>,
    skipped_bins: Vec<SkippedBin>,
    partition: BinPartition,
    data: &Dataset,
) -> Result<CarFit> {
    if bin_fits.is_empty() {
        return Err(Error::NoUsableBins);
    }
    let p = data.p();
    let x_bar_global = data.x_bar_global();
    for (r, &bar) in x_bar_global.iter().enumerate() {
        if bar.abs() < 1e-10 {
            return Err(Error::MeanNearZero {
                index: r + 1,
                mean: bar,
            });
        }
    }
    let n_fitted: usize = bin_fits.iter().map(|f| f.count).sum();

    let mut gamma_hat = vec![0.0; p + 1];
    for fit in &bin_fits {
        let w = fit.count as f64 / n_fitted as f64;
        gamma_hat[0] += w * fit.beta[0];
        for r in 1..=p {
            gamma_hat[r] += w * fit.beta[r] * fit.x_bar_bin[r - 1];
        }
    }
    for r in 1..=p {
        gamma_hat[r] /= x_bar_global[r - 1];
    }
    if gamma_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite coefficient estimate".into()));
    }

    Ok(CarFit {
        gamma_hat,
        x_bar_global,
        x_sample_variance: data.x_sample_variance(),
        bin_fits,
        skipped_bins,
        partition,
        n: data.n(),
        n_fitted,
    })
}

/// One row of the raw-coefficient export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawCoefficientRow {
    pub midpoint: f64,
    pub count: usize,
    pub beta: f64,
}

/// Raw per-bin estimates of coefficient `r` against bin midpoints, ordered
/// by midpoint. One row per fitted bin.
pub fn export_raw_coefficients(fit: &CarFit, r: usize) -> Result<Vec<RawCoefficientRow>> {
    let p = fit.p();
    if r > p {
        return Err(Error::IndexOutOfRange { index: r, p });
    }
    let mut rows: Vec<RawCoefficientRow> = fit
        .bin_fits
        .iter()
        .map(|f| RawCoefficientRow {
            midpoint: fit.partition.midpoints[f.bin_index],
            count: f.count,
            beta: f.beta[r],
        })
        .collect();
    rows.sort_by(|a, b| a.midpoint.total_cmp(&b.midpoint));
    Ok(rows)
}

/// Bin, merge, fit, and combine in one call.
pub fn car_fit(
    data: &Dataset,
    m: usize,
    min_bin_size: usize,
    det_threshold: f64,
) -> Result<CarFit> {
    let partition = crate::binning::make_bins(data.u(), m)?;
    let partition = crate::binning::merge_sparse_bins(&partition, min_bin_size)?;
    let (fits, skipped) = fit_bins(data, &partition, det_threshold)?;
    estimate_gamma(fits, skipped, partition, data)
}

/// Default minimum bin occupancy: p+2, the smallest size leaving a residual
/// degree of freedom in every bin (an exactly determined fit has zero
/// residual and an inverse Gram with no finite mean, which poisons the
/// plug-in variance estimates).
pub fn default_min_bin_size(p: usize) -> usize {
    p + 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::{make_bins, merge_sparse_bins};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset_from_rows(u: Vec<f64>, x_rows: Vec<Vec<f64>>, y: Vec<f64>) -> Dataset {
        let n = x_rows.len();
        let p = x_rows[0].len();
        let flat: Vec<f64> = x_rows.into_iter().flatten().collect();
        Dataset::new(u, Matrix::new(n, p, flat).unwrap(), y).unwrap()
    }

    /// y = 4 − x1, no noise, no distortion; u independent of everything.
    fn exact_line_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let ui = rng.random::<f64>() * 4.0 + 2.0;
            let xi = rng.random::<f64>() * 3.0;
            u.push(ui);
            x.push(vec![xi]);
            y.push(4.0 - xi);
        }
        dataset_from_rows(u, x, y)
    }

    fn global_ols(data: &Dataset) -> Vec<f64> {
        let members: Vec<usize> = (0..data.n()).collect();
        let design = bin_design(data, &members);
        guarded_ols(&design, data.y_tilde(), 1e-12)
            .unwrap()
            .coefficients
    }

    #[test]
    fn single_bin_equals_global_ols() {
        let data = exact_line_dataset(40, 3);
        let fit = car_fit(&data, 1, 2, 1e-10).unwrap();
        let ols = global_ols(&data);
        for (a, b) in fit.gamma_hat.iter().zip(&ols) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_recovery_per_bin_without_noise() {
        let data = exact_line_dataset(60, 4);
        let partition = make_bins(data.u(), 5).unwrap();
        let partition = merge_sparse_bins(&partition, 3).unwrap();
        let (fits, skipped) = fit_bins(&data, &partition, 1e-10).unwrap();
        assert!(skipped.is_empty());
        for f in &fits {
            assert!((f.beta[0] - 4.0).abs() < 1e-9, "bin {}", f.bin_index);
            assert!((f.beta[1] + 1.0).abs() < 1e-9, "bin {}", f.bin_index);
        }
    }

    #[test]
    fn per_bin_fits_match_restricted_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 30;
        let mut u = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let ui: f64 = rng.random::<f64>() * 10.0;
            let x1: f64 = rng.random::<f64>() * 4.0 - 2.0;
            let x2: f64 = rng.random::<f64>() * 4.0 - 2.0;
            u.push(ui);
            x.push(vec![x1, x2]);
            y.push(1.0 + 2.0 * x1 - x2 + rng.random::<f64>());
        }
        let data = dataset_from_rows(u, x, y);
        let partition = make_bins(data.u(), 3).unwrap();
        let (fits, _) = fit_bins(&data, &partition, 1e-12).unwrap();
        for f in &fits {
            let members: Vec<usize> = partition
                .assignments
                .iter()
                .enumerate()
                .filter(|(_, &a)| a == f.bin_index)
                .map(|(i, _)| i)
                .collect();
            let design = bin_design(&data, &members);
            let resp: Vec<f64> = members.iter().map(|&i| data.y_tilde()[i]).collect();
            // independent normal-equations route on this bin's rows
            let oracle = guarded_ols(&design, &resp, 1e-14).unwrap();
            for (a, b) in f.beta.iter().zip(&oracle.coefficients) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn noiseless_multi_predictor_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 200;
        let mut u = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let x1: f64 = rng.random::<f64>() * 2.0 + 0.5;
            let x2: f64 = rng.random::<f64>() * 3.0;
            let x3: f64 = rng.random::<f64>() - 0.5;
            u.push(rng.random::<f64>() * 4.0 + 2.0);
            x.push(vec![x1, x2, x3]);
            y.push(4.0 - x1 + 0.3 * x2 + 3.0 * x3);
        }
        let data = dataset_from_rows(u, x, y);
        for m in [1, 4, 8] {
            let fit = car_fit(&data, m, 5, 1e-10).unwrap();
            let expect = [4.0, -1.0, 0.3, 3.0];
            for (a, b) in fit.gamma_hat.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-8, "m={}: {:?}", m, fit.gamma_hat);
            }
        }
    }

    #[test]
    fn mean_near_zero_is_surfaced() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 30;
        let mut u = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let xi = if i % 2 == 0 { 1.0 } else { -1.0 }; // mean exactly zero
            u.push(rng.random::<f64>());
            x.push(vec![xi]);
            y.push(2.0 * xi);
        }
        let data = dataset_from_rows(u, x, y);
        match car_fit(&data, 1, 2, 1e-12) {
            Err(Error::MeanNearZero { index: 1, .. }) => {}
            other => panic!("expected MeanNearZero, got {:?}", other),
        }
    }

    #[test]
    fn permutation_invariance_of_gamma() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 120;
        let mut u = Vec::new();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let ui: f64 = rng.random::<f64>() * 4.0 + 2.0;
            let x1: f64 = rng.random::<f64>() + 1.0;
            let x2: f64 = rng.random::<f64>() + 0.5;
            u.push(ui);
            x.push(vec![x1 * (ui / 4.0), x2]);
            y.push((2.0 + x1 - 0.5 * x2 + 0.1 * rng.random::<f64>()) * (0.5 + ui / 8.0));
        }
        let data = dataset_from_rows(u.clone(), x.clone(), y.clone());
        let base = car_fit(&data, 6, 4, 1e-10).unwrap();

        // rotate the observation order
        let rot = |v: &Vec<f64>| {
            let mut w = v.clone();
            w.rotate_left(37);
            w
        };
        let mut xr = x.clone();
        xr.rotate_left(37);
        let shuffled = dataset_from_rows(rot(&u), xr, rot(&y));
        let perm = car_fit(&shuffled, 6, 4, 1e-10).unwrap();
        for (a, b) in base.gamma_hat.iter().zip(&perm.gamma_hat) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn weights_sum_to_one_without_skips() {
        let data = exact_line_dataset(80, 8);
        let fit = car_fit(&data, 6, 3, 1e-12).unwrap();
        assert!(fit.skipped_bins.is_empty());
        assert_eq!(fit.n, fit.n_fitted);
        let total: f64 = fit
            .bin_fits
            .iter()
            .map(|f| f.count as f64 / fit.n_fitted as f64)
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn export_single_bin_row() {
        let data = exact_line_dataset(25, 9);
        let fit = car_fit(&data, 1, 2, 1e-12).unwrap();
        let rows = export_raw_coefficients(&fit, 0).unwrap();
        assert_eq!(rows.len(), 1);
        let lo = data.u().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = data.u().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((rows[0].midpoint - 0.5 * (lo + hi)).abs() < 1e-12);
        assert_eq!(rows[0].count, 25);
    }

    #[test]
    fn export_constant_column_without_distortion() {
        let data = exact_line_dataset(90, 10);
        let fit = car_fit(&data, 6, 3, 1e-12).unwrap();
        let rows = export_raw_coefficients(&fit, 1).unwrap();
        assert!(rows.len() > 1);
        for row in &rows {
            assert!((row.beta + 1.0).abs() < 1e-9);
        }
        // ordered by midpoint
        for w in rows.windows(2) {
            assert!(w[0].midpoint < w[1].midpoint);
        }
    }

    #[test]
    fn export_rejects_bad_index() {
        let data = exact_line_dataset(25, 12);
        let fit = car_fit(&data, 1, 2, 1e-12).unwrap();
        match export_raw_coefficients(&fit, 5) {
            Err(Error::IndexOutOfRange { index: 5, p: 1 }) => {}
            other => panic!("expected IndexOutOfRange, got {:?}", other),
        }
    }
}
