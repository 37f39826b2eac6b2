//! Simulation model selection: built-in names or a JSON file.
//!
//! A model file looks like
//!
//! ```json
//! {
//!   "gamma": [4.0, -1.0, 0.3, 3.0],
//!   "predictors": [
//!     {"mean": 1.5, "variance": 0.49},
//!     {"mean": 1.0, "variance": 1.44},
//!     {"mean": 0.5, "variance": 1.0}
//!   ],
//!   "noise_variance": 0.09,
//!   "u": {"min": 2.0, "max": 6.0},
//!   "distortions": "paper-5.2"
//! }
//! ```
//!
//! with `distortions` one of the catalogue names below.

use crate::error::{io_err, CliError, CliResult};
use carfit_core::{
    identity_distortions, paper_distortions, DistortionSpec, GenerativeModel, PredictorLaw, ULaw,
};
use serde::Deserialize;
use std::path::Path;

/// Catalogue names accepted on the command line.
pub const MODEL_NAMES: [&str; 2] = ["paper-5.2", "identity"];

#[derive(Debug, Deserialize)]
struct PredictorSpec {
    mean: f64,
    variance: f64,
}

#[derive(Debug, Deserialize)]
struct URange {
    min: f64,
    max: f64,
}

#[derive(Debug, Deserialize)]
struct ModelFile {
    gamma: Vec<f64>,
    predictors: Vec<PredictorSpec>,
    noise_variance: f64,
    u: URange,
    distortions: String,
}

fn catalogue(name: &str, p: usize, u_law: ULaw) -> CliResult<DistortionSpec> {
    match name {
        "paper-5.2" => {
            let spec = paper_distortions();
            if spec.p() != p {
                return Err(CliError::Config(format!(
                    "the 'paper-5.2' distortions act on {} predictors, model has {}",
                    spec.p(),
                    p
                )));
            }
            Ok(spec)
        }
        "identity" => Ok(identity_distortions(p, u_law)),
        other => Err(CliError::Config(format!(
            "unknown distortion catalogue entry '{}' (expected one of {:?})",
            other, MODEL_NAMES
        ))),
    }
}

/// Resolve `--model`: a built-in name or a path to a JSON model file.
pub fn resolve_model(spec: &str) -> CliResult<(GenerativeModel, String)> {
    match spec {
        "paper-5.2" => Ok((carfit_core::paper_model(), "paper-5.2".to_string())),
        "identity" => Ok((carfit_core::identity_model(), "identity".to_string())),
        path_str => {
            let path = Path::new(path_str);
            if !path.exists() {
                return Err(CliError::Config(format!(
                    "'{}' is neither a built-in model ({:?}) nor an existing file",
                    path_str, MODEL_NAMES
                )));
            }
            let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            let file: ModelFile = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("bad model file: {}", e)))?;
            let p = file.predictors.len();
            if file.gamma.len() != p + 1 {
                return Err(CliError::Config(format!(
                    "model file has {} coefficients for {} predictors",
                    file.gamma.len(),
                    p
                )));
            }
            if !(file.u.min < file.u.max) {
                return Err(CliError::Config("model file needs u.min < u.max".into()));
            }
            if file.predictors.iter().any(|s| !(s.variance > 0.0)) {
                return Err(CliError::Config(
                    "model file predictor variances must be positive".into(),
                ));
            }
            if !(file.noise_variance >= 0.0) {
                return Err(CliError::Config(
                    "model file noise_variance must be nonnegative".into(),
                ));
            }
            let u_law = ULaw::Uniform {
                min: file.u.min,
                max: file.u.max,
            };
            let model = GenerativeModel {
                gamma: file.gamma,
                predictor_laws: file
                    .predictors
                    .iter()
                    .map(|s| PredictorLaw::Normal {
                        mean: s.mean,
                        variance: s.variance,
                    })
                    .collect(),
                noise_variance: file.noise_variance,
                distortions: catalogue(&file.distortions, p, u_law)?,
            };
            model.validate().map_err(CliError::Core)?;
            Ok((model, path_str.to_string()))
        }
    }
}
