//! CSV ingestion and emission.
//!
//! Numeric parsing is locale-independent (period decimal separator, as
//! `f64::from_str`); machine outputs use the shortest representation that
//! round-trips, so nothing is lost to formatting.

use crate::config::ColumnMapping;
use crate::error::{io_err, CliError, CliResult};
use carfit_core::{Dataset, Matrix, RawCoefficientRow};
use std::path::Path;

/// Load a dataset from a headered CSV file using the column mapping.
/// Rows are kept in file order; `row` in parse errors is the 1-based data
/// row (the header is row 0).
pub fn load_csv(path: &Path, mapping: &ColumnMapping) -> CliResult<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| CliError::Data(e.to_string()))?
        .clone();
    let find = |name: &str| -> CliResult<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Schema {
                column: name.to_string(),
            })
    };
    let u_idx = find(&mapping.u)?;
    let y_idx = find(&mapping.y)?;
    let x_idx: Vec<usize> = mapping
        .x
        .iter()
        .map(|c| find(c))
        .collect::<CliResult<_>>()?;

    let parse = |record: &csv::StringRecord, idx: usize, row: usize, col: &str| -> CliResult<f64> {
        let cell = record.get(idx).unwrap_or("");
        if cell.is_empty() {
            return Err(CliError::Parse {
                row,
                column: col.to_string(),
                message: "empty cell".into(),
            });
        }
        let v: f64 = cell.parse().map_err(|_| CliError::Parse {
            row,
            column: col.to_string(),
            message: format!("'{}' is not a number", cell),
        })?;
        if !v.is_finite() {
            return Err(CliError::Parse {
                row,
                column: col.to_string(),
                message: format!("'{}' is not finite", cell),
            });
        }
        Ok(v)
    };

    let mut u = Vec::new();
    let mut y = Vec::new();
    let mut x_flat = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(e.to_string()))?;
        let row = i + 1;
        u.push(parse(&record, u_idx, row, &mapping.u)?);
        y.push(parse(&record, y_idx, row, &mapping.y)?);
        for (r, &idx) in x_idx.iter().enumerate() {
            x_flat.push(parse(&record, idx, row, &mapping.x[r])?);
        }
    }

    let p = mapping.x.len();
    let n = u.len();
    if n < p + 2 {
        return Err(CliError::Data(format!(
            "{} data rows cannot identify {} coefficients",
            n,
            p + 1
        )));
    }
    let x = Matrix::new(n, p, x_flat).map_err(CliError::Core)?;
    Dataset::new(u, x, y).map_err(CliError::Core)
}

/// Write a dataset back out, for fixtures and round-trip checks.
pub fn write_dataset_csv(path: &Path, data: &Dataset, mapping: &ColumnMapping) -> CliResult<()> {
    let mut out = String::new();
    out.push_str(&mapping.u);
    out.push(',');
    out.push_str(&mapping.y);
    for c in &mapping.x {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for i in 0..data.n() {
        out.push_str(&format!("{},{}", data.u()[i], data.y_tilde()[i]));
        for r in 0..data.p() {
            out.push_str(&format!(",{}", data.x_tilde().get(i, r)));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Raw per-bin coefficient table: `midpoint,count,beta`.
pub fn raw_coefficients_csv(rows: &[RawCoefficientRow]) -> String {
    let mut out = String::from("midpoint,count,beta\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.midpoint, r.count, r.beta));
    }
    out
}
