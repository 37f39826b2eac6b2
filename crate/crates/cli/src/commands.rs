//! Command implementations. Every number the binary prints comes from a
//! library call in this module or in `carfit-core`, so the whole surface is
//! testable without spawning a process.

use crate::config::FitConfig;
use crate::csv_io::{load_csv, raw_coefficients_csv};
use crate::error::{io_err, CliError, CliResult};
use crate::model_spec::resolve_model;
use crate::ols::ols_with_t_intervals;
use carfit_core::{
    estimator, inference, run_monte_carlo, validate_identifiability, CoefficientReport,
    IdentifiabilityReport, SimulationConfig, SimulationReport,
};
use serde::Serialize;
use std::path::Path;

/// Adjusted and unadjusted estimates side by side, plus fit metadata.
#[derive(Debug, Clone, Serialize)]
pub struct FitOutput {
    pub n: usize,
    pub p: usize,
    pub m_initial: usize,
    pub m_final: usize,
    pub min_bin_size: usize,
    pub det_threshold: f64,
    pub level: f64,
    pub bins_used: usize,
    pub bins_skipped: usize,
    pub car: Vec<CoefficientReport>,
    pub ols: Vec<CoefficientReport>,
}

/// Fit the adjusted model and the naive least-squares comparison.
pub fn cmd_fit(config: &FitConfig, input: &Path) -> CliResult<FitOutput> {
    let data = load_csv(input, &config.columns)?;
    let p = data.p();
    config.validate(p)?;
    if config.columns.x.len() != p {
        return Err(CliError::Config("column mapping mismatch".into()));
    }
    let labels = config.columns.labels();
    let m_initial = config.resolve_m(data.n());
    let min_bin_size = config.resolve_min_bin_size(p);

    let fit = estimator::car_fit(&data, m_initial, min_bin_size, config.det_threshold)?;
    let variances = inference::estimate_variances(&fit)?;
    let report = inference::build_report(
        &fit,
        &variances,
        config.level,
        m_initial,
        config.det_threshold,
        &labels,
    )?;
    let ols = ols_with_t_intervals(&data, config.level, config.det_threshold, &labels)?;

    Ok(FitOutput {
        n: report.n,
        p,
        m_initial,
        m_final: report.m_final,
        min_bin_size,
        det_threshold: config.det_threshold,
        level: config.level,
        bins_used: report.bins_used,
        bins_skipped: report.bins_skipped,
        car: report.coefficients,
        ols,
    })
}

/// Aligned human-readable fit table, unadjusted next to adjusted.
pub fn render_fit(out: &FitOutput) -> String {
    let mut s = format!(
        "n = {}, p = {}, bins {} -> {} (used {}, skipped {}), level {:.0}%\n\n",
        out.n,
        out.p,
        out.m_initial,
        out.m_final,
        out.bins_used,
        out.bins_skipped,
        100.0 * out.level
    );
    let label_w = out
        .car
        .iter()
        .map(|c| c.label.len())
        .max()
        .unwrap_or(10)
        .max("coefficient".len());
    s.push_str(&format!(
        "{:label_w$}  {:>30}   {:>30}\n",
        "", "least squares", "covariate adjusted"
    ));
    s.push_str(&format!(
        "{:label_w$}  {:>9} {:>9} {:>9}   {:>9} {:>9} {:>9}\n",
        "coefficient", "lower", "estimate", "upper", "lower", "estimate", "upper"
    ));
    for (ols, car) in out.ols.iter().zip(&out.car) {
        s.push_str(&format!(
            "{:label_w$}  {:>9.4} {:>9.4} {:>9.4}   {:>9.4} {:>9.4} {:>9.4}\n",
            car.label, ols.lower, ols.estimate, ols.upper, car.lower, car.estimate, car.upper
        ));
    }
    s
}

/// A simulation report tagged with the model it ran.
#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutput {
    pub model: String,
    #[serde(flatten)]
    pub report: SimulationReport,
}

pub struct SimulateArgs {
    pub model: String,
    pub n: usize,
    pub replicates: usize,
    pub m: usize,
    pub min_bin_size: Option<usize>,
    pub det_threshold: f64,
    pub level: f64,
    pub seed: u64,
}

/// Run a Monte Carlo coverage study; write `<out>.json` and `<out>.csv`
/// when an output prefix is given.
pub fn cmd_simulate(args: &SimulateArgs, out_prefix: Option<&Path>) -> CliResult<SimulateOutput> {
    let (model, model_name) = resolve_model(&args.model)?;
    if let Some(min) = args.min_bin_size {
        if min < model.p() + 1 {
            return Err(CliError::Config(format!(
                "min-bin-size {} cannot fit {} parameters",
                min,
                model.p() + 1
            )));
        }
    }
    let config = SimulationConfig {
        n: args.n,
        replicates: args.replicates,
        m: args.m,
        min_bin_size: args.min_bin_size,
        det_threshold: args.det_threshold,
        level: args.level,
        seed: args.seed,
    };
    let report = run_monte_carlo(&model, &config)?;
    let output = SimulateOutput {
        model: model_name,
        report,
    };
    if let Some(prefix) = out_prefix {
        let json_path = with_suffix(prefix, "json");
        let csv_path = with_suffix(prefix, "csv");
        std::fs::write(&json_path, simulate_json(&output)).map_err(|e| io_err(&json_path, e))?;
        std::fs::write(&csv_path, simulate_csv(&output)).map_err(|e| io_err(&csv_path, e))?;
    }
    Ok(output)
}

fn with_suffix(prefix: &Path, ext: &str) -> std::path::PathBuf {
    let mut name = prefix.as_os_str().to_os_string();
    name.push(".");
    name.push(ext);
    std::path::PathBuf::from(name)
}

pub fn simulate_json(out: &SimulateOutput) -> String {
    let mut s = serde_json::to_string_pretty(out).expect("serializable");
    s.push('\n');
    s
}

/// Coverage-table CSV: one row, a (coverage, length) pair per coefficient.
pub fn simulate_csv(out: &SimulateOutput) -> String {
    let p = out.report.per_coefficient.len() - 1;
    format!(
        "{}\n{}\n",
        SimulationReport::table_csv_header(p),
        out.report.table_csv_row()
    )
}

pub fn render_simulate(out: &SimulateOutput) -> String {
    let r = &out.report;
    let mut s = format!(
        "model {}  n={}  replicates={}  m={}  min-bin-size={}  level={}  seed={}  failures={}\n",
        out.model, r.n, r.replicates, r.m_used, r.min_bin_size, r.level, r.seed, r.failures
    );
    s.push_str(&format!(
        "{:<12} {:>9} {:>12} {:>14} {:>9}\n",
        "coefficient", "coverage", "mean length", "mean estimate", "sd"
    ));
    for (i, c) in r.per_coefficient.iter().enumerate() {
        s.push_str(&format!(
            "gamma{:<7} {:>8.2}% {:>12.4} {:>14.4} {:>9.4}\n",
            i,
            100.0 * c.coverage_fraction,
            c.mean_ci_length,
            c.mean_estimate,
            c.sd_estimate
        ));
    }
    s
}

/// Export the raw per-bin estimates of coefficient `r` as CSV; write to
/// `out` when given.
pub fn cmd_bins(
    config: &FitConfig,
    input: &Path,
    r: usize,
    out: Option<&Path>,
) -> CliResult<String> {
    let data = load_csv(input, &config.columns)?;
    let p = data.p();
    config.validate(p)?;
    let m_initial = config.resolve_m(data.n());
    let min_bin_size = config.resolve_min_bin_size(p);
    let fit = estimator::car_fit(&data, m_initial, min_bin_size, config.det_threshold)?;
    let rows = estimator::export_raw_coefficients(&fit, r)?;
    let csv = raw_coefficients_csv(&rows);
    if let Some(path) = out {
        std::fs::write(path, &csv).map_err(|e| io_err(path, e))?;
    }
    Ok(csv)
}

/// Check the unit-mean normalization of a catalogue distortion by Monte
/// Carlo sampling.
pub fn cmd_validate(
    name: &str,
    samples: usize,
    tol: f64,
    seed: u64,
) -> CliResult<IdentifiabilityReport> {
    let spec = match name {
        "paper-5.2" => carfit_core::paper_distortions(),
        "identity" => {
            carfit_core::identity_distortions(3, carfit_core::ULaw::Uniform { min: 2.0, max: 6.0 })
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown distortion catalogue entry '{}' (expected 'paper-5.2' or 'identity')",
                other
            )))
        }
    };
    validate_identifiability(&spec, samples, tol, seed).map_err(CliError::Core)
}

pub fn render_validation(rep: &IdentifiabilityReport) -> String {
    let mut s = format!(
        "samples={}  tol={}  result: {}\n",
        rep.samples,
        rep.tol,
        if rep.passed { "PASS" } else { "FAIL" }
    );
    s.push_str(&format!("  mean psi  = {:.6}\n", rep.psi_mean));
    for (r, m) in rep.phi_means.iter().enumerate() {
        s.push_str(&format!("  mean phi{} = {:.6}\n", r + 1, m));
    }
    if !rep.phi_means.is_empty() {
        s.push_str(&format!("  min sampled phi = {:.6}\n", rep.min_phi));
    }
    s
}

/// Default paths for fit/bins JSON output: the shared `--out` flag.
pub fn write_fit_json(out: &FitOutput, path: &Path) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(out).expect("serializable");
    s.push('\n');
    std::fs::write(path, s).map_err(|e| io_err(path, e))
}
