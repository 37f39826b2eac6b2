//! Fit configuration and column mapping.

use crate::error::{CliError, CliResult};
use carfit_core::{binning, estimator};
use serde::{Deserialize, Serialize};

/// Which columns of the input hold the confounder, response, and
/// predictors. Predictor order defines the coefficient order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub u: String,
    pub y: String,
    pub x: Vec<String>,
}

impl ColumnMapping {
    pub fn new(u: &str, y: &str, x_cols: &str) -> CliResult<Self> {
        let x: Vec<String> = x_cols
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if x.is_empty() {
            return Err(CliError::Config("--x-cols names no columns".into()));
        }
        Ok(ColumnMapping {
            u: u.trim().to_string(),
            y: y.trim().to_string(),
            x,
        })
    }

    /// Coefficient labels: intercept first, then predictor names.
    pub fn labels(&self) -> Vec<String> {
        let mut l = vec!["intercept".to_string()];
        l.extend(self.x.iter().cloned());
        l
    }
}

/// Settings shared by the fitting commands.
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Initial equidistant bin count; defaults to round(2·√n).
    pub m: Option<usize>,
    /// Minimum bin occupancy after merging; defaults to p+2 so every bin
    /// keeps a residual degree of freedom.
    pub min_bin_size: Option<usize>,
    pub det_threshold: f64,
    pub level: f64,
    pub columns: ColumnMapping,
}

impl FitConfig {
    pub fn resolve_m(&self, n: usize) -> usize {
        self.m.unwrap_or_else(|| binning::default_num_bins(n))
    }

    pub fn resolve_min_bin_size(&self, p: usize) -> usize {
        self.min_bin_size
            .unwrap_or_else(|| estimator::default_min_bin_size(p))
    }

    pub fn validate(&self, p: usize) -> CliResult<()> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::Config(format!(
                "level {} is outside (0, 1)",
                self.level
            )));
        }
        if !(self.det_threshold > 0.0) {
            return Err(CliError::Config("det-threshold must be positive".into()));
        }
        if let Some(min) = self.min_bin_size {
            if min < p + 1 {
                return Err(CliError::Config(format!(
                    "min-bin-size {} cannot fit {} parameters",
                    min,
                    p + 1
                )));
            }
        }
        if self.m == Some(0) {
            return Err(CliError::Config("m must be at least 1".into()));
        }
        Ok(())
    }
}
