//! CLI error taxonomy with stable codes and process exit codes.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 numerical failure.

use carfit_core::Error as CoreError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing column '{column}' in input header")]
    Schema { column: String },

    #[error("cannot parse row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("identifiability validation failed: {0}")]
    ValidationFailed(String),

    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn code(&self) -> String {
        match self {
            CliError::Config(_) => "CONFIG_ERROR".into(),
            CliError::Schema { .. } => "SCHEMA_ERROR".into(),
            CliError::Parse { .. } => "PARSE_ERROR".into(),
            CliError::Data(_) => "DATA_ERROR".into(),
            CliError::Io { .. } => "IO_ERROR".into(),
            CliError::ValidationFailed(_) => "IDENTIFIABILITY_FAILED".into(),
            CliError::Core(e) => e.code().into(),
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Schema { .. }
            | CliError::Parse { .. }
            | CliError::Data(_)
            | CliError::Io { .. } => 3,
            CliError::ValidationFailed(_) => 4,
            CliError::Core(e) => match e {
                CoreError::InvalidInput(_)
                | CoreError::TooManyBins { .. }
                | CoreError::IndexOutOfRange { .. }
                | CoreError::InvalidLevel(_) => 2,
                CoreError::InsufficientData(_)
                | CoreError::DegenerateRange { .. }
                | CoreError::CannotSatisfy { .. } => 3,
                CoreError::SingularBin { .. }
                | CoreError::NoUsableBins
                | CoreError::MeanNearZero { .. }
                | CoreError::InvalidDistortion { .. }
                | CoreError::SingularDesignLimit { .. } => 4,
            },
        }
    }

    /// Machine-readable error body for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body {
            error: Inner,
        }
        #[derive(Serialize)]
        struct Inner {
            code: String,
            message: String,
            exit_code: i32,
        }
        serde_json::to_string(&Body {
            error: Inner {
                code: self.code(),
                message: self.to_string(),
                exit_code: self.exit_code(),
            },
        })
        .expect("serializable")
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}
