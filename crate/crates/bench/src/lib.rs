//! Shared fixtures for the benchmarks.

use carfit_core::{generate, paper_model, Dataset, Matrix};

/// One draw from the built-in simulation model.
pub fn distorted_dataset(n: usize, seed: u64) -> Dataset {
    generate(&paper_model(), n, seed).unwrap().0
}

/// A well-conditioned small design with an intercept column.
pub fn small_design(rows: usize, predictors: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut state = seed | 1;
    let mut next = move || {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 11) as f64) / (1u64 << 53) as f64
    };
    let mut design = Matrix::zeros(rows, predictors + 1);
    let mut y = Vec::with_capacity(rows);
    for i in 0..rows {
        design.set(i, 0, 1.0);
        for j in 1..=predictors {
            design.set(i, j, next() * 4.0 - 2.0);
        }
        y.push(next() * 6.0 - 3.0);
    }
    (design, y)
}
