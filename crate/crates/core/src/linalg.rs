//! Dense linear algebra for small (p+1)×(p+1) systems.
//!
//! Everything here is sized for regression designs with a handful of
//! columns: Gram matrices, determinants and inverses via partially pivoted
//! LU, and a guarded least-squares solve. The determinant guard is applied
//! to the *normalized* Gram (1/rows)·XᵀX so that the threshold is
//! scale-comparable across bins of different sizes.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Build a matrix from row-major entries. Fails on a size mismatch or
    /// any non-finite entry.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Flat row-major view of the entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Maximum absolute asymmetry, for diagnostics and tests.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Result of a guarded ordinary least-squares fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OlsResult {
    /// Fitted coefficients, intercept first when the design carries an
    /// intercept column in position 0.
    pub coefficients: Vec<f64>,
    /// Inverse of the normalized Gram (1/rows)·XᵀX.
    pub inverse_gram: Matrix,
    /// Determinant of the normalized Gram.
    pub gram_determinant: f64,
    /// Sum of squared residuals.
    pub residual_sum_squares: f64,
}

/// Normalized Gram matrix (1/rows)·designᵀ·design.
pub fn gram(design: &Matrix) -> Result<Matrix> {
    if design.rows() == 0 {
        return Err(Error::InvalidInput("design has no rows".into()));
    }
    let (n, k) = (design.rows(), design.cols());
    let mut g = Matrix::zeros(k, k);
    for row in 0..n {
        let r = design.row(row);
        for i in 0..k {
            for j in i..k {
                let v = g.get(i, j) + r[i] * r[j];
                g.set(i, j, v);
            }
        }
    }
    let scale = 1.0 / n as f64;
    for i in 0..k {
        for j in i..k {
            let v = g.get(i, j) * scale;
            g.set(i, j, v);
            g.set(j, i, v);
        }
    }
    Ok(g)
}

/// LU decomposition with partial pivoting, in place.
/// Returns the pivot permutation and the number of row swaps, or `None`
/// when a pivot is exactly zero (structurally singular).
fn lu_decompose(a: &mut Matrix) -> Option<(Vec<usize>, usize)> {
    let n = a.rows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut swaps = 0;
    for col in 0..n {
        let mut pivot = col;
        let mut best = a.get(col, col).abs();
        for r in col + 1..n {
            let v = a.get(r, col).abs();
            if v > best {
                best = v;
                pivot = r;
            }
        }
        if best == 0.0 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                let tmp = a.get(col, j);
                a.set(col, j, a.get(pivot, j));
                a.set(pivot, j, tmp);
            }
            perm.swap(col, pivot);
            swaps += 1;
        }
        let d = a.get(col, col);
        for r in col + 1..n {
            let factor = a.get(r, col) / d;
            a.set(r, col, factor);
            for j in col + 1..n {
                let v = a.get(r, j) - factor * a.get(col, j);
                a.set(r, j, v);
            }
        }
    }
    Some((perm, swaps))
}

fn lu_determinant(lu: &Matrix, swaps: usize) -> f64 {
    let mut det = if swaps.is_multiple_of(2) { 1.0 } else { -1.0 };
    for i in 0..lu.rows() {
        det *= lu.get(i, i);
    }
    det
}

/// Solve LU x = P b for one right-hand side.
fn lu_solve(lu: &Matrix, perm: &[usize], b: &[f64]) -> Vec<f64> {
    let n = lu.rows();
    let mut x: Vec<f64> = perm.iter().map(|&pi| b[pi]).collect();
    for i in 1..n {
        for j in 0..i {
            x[i] -= lu.get(i, j) * x[j];
        }
    }
    for i in (0..n).rev() {
        for j in i + 1..n {
            x[i] -= lu.get(i, j) * x[j];
        }
        x[i] /= lu.get(i, i);
    }
    x
}

/// Determinant and inverse of a small square matrix via pivoted LU.
pub fn det_and_inverse(a: &Matrix) -> Result<(f64, Matrix)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::InvalidInput("matrix not square".into()));
    }
    let mut lu = a.clone();
    let Some((perm, swaps)) = lu_decompose(&mut lu) else {
        return Err(Error::SingularBin {
            det: 0.0,
            threshold: 0.0,
        });
    };
    let det = lu_determinant(&lu, swaps);
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for col in 0..n {
        e[col] = 1.0;
        let x = lu_solve(&lu, &perm, &e);
        for row in 0..n {
            inv.set(row, col, x[row]);
        }
        e[col] = 0.0;
    }
    Ok((det, inv))
}

/// Ordinary least squares with a well-posedness guard.
///
/// Solves the normal equations for `response` on `design`, computing the
/// normalized Gram G = (1/rows)·XᵀX first. If |det G| ≤ `det_threshold`
/// the bin is rejected as numerically singular; the determinant is carried
/// in the error so callers can report it.
pub fn guarded_ols(design: &Matrix, response: &[f64], det_threshold: f64) -> Result<OlsResult> {
    let (n, k) = (design.rows(), design.cols());
    if response.len() != n {
        return Err(Error::InvalidInput(format!(
            "response length {} does not match {} design rows",
            response.len(),
            n
        )));
    }
    if response.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite response entry".into()));
    }
    if !(det_threshold > 0.0) {
        return Err(Error::InvalidInput("det_threshold must be positive".into()));
    }
    if n < k {
        return Err(Error::InsufficientData(format!(
            "{} rows for {} parameters",
            n, k
        )));
    }

    let g = gram(design)?;
    let mut lu = g.clone();
    let det = match lu_decompose(&mut lu) {
        Some((_, swaps)) => lu_determinant(&lu, swaps),
        None => 0.0,
    };
    if det.abs() <= det_threshold {
        return Err(Error::SingularBin {
            det,
            threshold: det_threshold,
        });
    }

    let (_, mut inverse_gram) = det_and_inverse(&g)?;
    // the Gram is symmetric; make its inverse exactly so
    for i in 0..k {
        for j in 0..i {
            let v = 0.5 * (inverse_gram.get(i, j) + inverse_gram.get(j, i));
            inverse_gram.set(i, j, v);
            inverse_gram.set(j, i, v);
        }
    }

    // Normalized right-hand side (1/n)·Xᵀy, so beta = G⁻¹ · (Xᵀy/n).
    let mut xty = vec![0.0; k];
    for row in 0..n {
        let r = design.row(row);
        let y = response[row];
        for j in 0..k {
            xty[j] += r[j] * y;
        }
    }
    for v in xty.iter_mut() {
        *v /= n as f64;
    }
    let coefficients = inverse_gram.mul_vec(&xty);
    if coefficients.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularBin {
            det,
            threshold: det_threshold,
        });
    }

    let mut rss = 0.0;
    for row in 0..n {
        let fitted: f64 = design
            .row(row)
            .iter()
            .zip(&coefficients)
            .map(|(a, b)| a * b)
            .sum();
        let r = response[row] - fitted;
        rss += r * r;
    }

    Ok(OlsResult {
        coefficients,
        inverse_gram,
        gram_determinant: det,
        residual_sum_squares: rss,
    })
}
