//! Covariate-adjusted regression from the command line.

use carfit_cli::{
    cmd_bins, cmd_fit, cmd_simulate, cmd_validate, render_fit, render_simulate, render_validation,
    write_fit_json, CliError, ColumnMapping, FitConfig, SimulateArgs,
};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "carfit",
    about = "Covariate-adjusted regression: recover regression coefficients when \
             response and predictors are multiplicatively distorted by an observed confounder",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FitFlags {
    /// Input CSV file with a header row
    input: PathBuf,
    /// Column holding the confounder
    #[arg(long = "u-col")]
    u_col: String,
    /// Column holding the response
    #[arg(long = "y-col")]
    y_col: String,
    /// Comma-separated predictor columns, in coefficient order
    #[arg(long = "x-cols")]
    x_cols: String,
    /// Initial number of equidistant bins [default: round(2*sqrt(n))]
    #[arg(long)]
    m: Option<usize>,
    /// Minimum observations per bin after merging [default: p+2]
    #[arg(long = "min-bin-size")]
    min_bin_size: Option<usize>,
    /// Determinant guard on each bin's normalized Gram matrix
    #[arg(long = "det-threshold", default_value_t = 1e-8)]
    det_threshold: f64,
    /// Confidence level in (0, 1)
    #[arg(long, default_value_t = 0.95)]
    level: f64,
}

impl FitFlags {
    fn config(&self) -> Result<FitConfig, CliError> {
        Ok(FitConfig {
            m: self.m,
            min_bin_size: self.min_bin_size,
            det_threshold: self.det_threshold,
            level: self.level,
            columns: ColumnMapping::new(&self.u_col, &self.y_col, &self.x_cols)?,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit the adjusted regression and print it next to naive least squares
    Fit {
        #[command(flatten)]
        flags: FitFlags,
        /// Write the machine-readable report (JSON) here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo coverage study of the full pipeline
    Simulate {
        /// Built-in model name (paper-5.2, identity) or a JSON model file
        #[arg(long)]
        model: String,
        /// Sample size per replicate
        #[arg(long)]
        n: usize,
        /// Number of replicates
        #[arg(long)]
        replicates: usize,
        /// Number of equidistant bins
        #[arg(long)]
        m: usize,
        /// Minimum observations per bin after merging [default: p+2]
        #[arg(long = "min-bin-size")]
        min_bin_size: Option<usize>,
        /// Determinant guard on each bin's normalized Gram matrix
        #[arg(long = "det-threshold", default_value_t = 1e-8)]
        det_threshold: f64,
        /// Confidence level in (0, 1)
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// RNG seed; replicate k draws from stream (seed, k)
        #[arg(long)]
        seed: u64,
        /// Output prefix: writes <out>.json and <out>.csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export raw per-bin coefficient estimates against bin midpoints
    Bins {
        #[command(flatten)]
        flags: FitFlags,
        /// Coefficient index: 0 = intercept, 1..=p = predictors
        #[arg(long)]
        r: usize,
        /// Write the CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the unit-mean normalization of a catalogue distortion
    #[command(name = "validate-distortion")]
    ValidateDistortion {
        /// Catalogue name: paper-5.2 or identity
        name: String,
        /// Monte Carlo sample count
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Tolerance on |mean - 1|
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
        /// RNG seed
        #[arg(long)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit { flags, out } => {
            let config = flags.config()?;
            let output = cmd_fit(&config, &flags.input)?;
            print!("{}", render_fit(&output));
            if let Some(path) = out {
                write_fit_json(&output, &path)?;
                println!("\nreport written to {}", path.display());
            }
            Ok(())
        }
        Command::Simulate {
            model,
            n,
            replicates,
            m,
            min_bin_size,
            det_threshold,
            level,
            seed,
            out,
        } => {
            let args = SimulateArgs {
                model,
                n,
                replicates,
                m,
                min_bin_size,
                det_threshold,
                level,
                seed,
            };
            let output = cmd_simulate(&args, out.as_deref())?;
            print!("{}", render_simulate(&output));
            if let Some(prefix) = out {
                println!(
                    "reports written to {}.json and {}.csv",
                    prefix.display(),
                    prefix.display()
                );
            }
            Ok(())
        }
        Command::Bins { flags, r, out } => {
            let config = flags.config()?;
            let csv = cmd_bins(&config, &flags.input, r, out.as_deref())?;
            match out {
                Some(path) => println!("raw coefficients written to {}", path.display()),
                None => print!("{}", csv),
            }
            Ok(())
        }
        Command::ValidateDistortion {
            name,
            samples,
            tol,
            seed,
        } => {
            let report = cmd_validate(&name, samples, tol, seed)?;
            print!("{}", render_validation(&report));
            if report.passed {
                Ok(())
            } else {
                Err(CliError::ValidationFailed(format!(
                    "mean distorting effect deviates from 1 by more than {}",
                    report.tol
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
