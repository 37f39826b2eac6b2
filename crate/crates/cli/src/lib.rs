//! Library backing the `carfit` binary: CSV ingestion, configuration,
//! command implementations, and report rendering. The binary in `main.rs`
//! only parses arguments and maps errors to exit codes.

#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;
pub mod model_spec;
pub mod ols;

pub use commands::{
    cmd_bins, cmd_fit, cmd_simulate, cmd_validate, render_fit, render_simulate, render_validation,
    simulate_csv, simulate_json, write_fit_json, FitOutput, SimulateArgs, SimulateOutput,
};
pub use config::{ColumnMapping, FitConfig};
pub use csv_io::{load_csv, write_dataset_csv};
pub use error::{CliError, CliResult};
