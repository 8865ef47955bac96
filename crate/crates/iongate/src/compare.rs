//! Row-by-row comparison of two result tables.

use std::path::Path;

use crate::table::{fmt, read_csv, write_csv};
use crate::CliError;

pub const COMPARE_COLUMNS: [&str; 3] = ["row", "t_g_ratio", "eps_total_ratio"];

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// (t_g ratio, ε ratio) per row, second file over first.
    pub rows: Vec<(f64, f64)>,
    /// Same ratios between the lowest-ε rows of each file.
    pub optimum: (f64, f64),
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize, CliError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Schema(format!("{} has no `{name}` column", path.display())))
}

fn values(rows: &[Vec<String>], col: usize, path: &Path) -> Result<Vec<f64>, CliError> {
    rows.iter()
        .enumerate()
        .map(|(k, r)| {
            r.get(col)
                .and_then(|v| v.trim().parse::<f64>().ok())
                .ok_or_else(|| CliError::Schema(format!("{} row {}: not a number", path.display(), k + 1)))
        })
        .collect()
}

fn table(path: &Path) -> Result<(Vec<String>, Vec<f64>, Vec<f64>), CliError> {
    let (header, rows) = read_csv(path)?;
    let t = values(&rows, column(&header, "t_g_us", path)?, path)?;
    let e = values(&rows, column(&header, "eps_total", path)?, path)?;
    if t.is_empty() {
        return Err(CliError::Schema(format!("{} has no rows", path.display())));
    }
    Ok((header, t, e))
}

fn argmin(v: &[f64]) -> usize {
    let mut k = 0;
    for (j, x) in v.iter().enumerate() {
        if *x < v[k] {
            k = j;
        }
    }
    k
}

/// Ratios `b / a`. Both files need identical headers and row counts.
pub fn compare(a: &Path, b: &Path) -> Result<Comparison, CliError> {
    let (ha, ta, ea) = table(a)?;
    let (hb, tb, eb) = table(b)?;
    if ha != hb {
        return Err(CliError::Schema(format!("headers differ: {ha:?} vs {hb:?}")));
    }
    if ta.len() != tb.len() {
        return Err(CliError::Schema(format!("row counts differ: {} vs {}", ta.len(), tb.len())));
    }
    let rows = (0..ta.len()).map(|k| (tb[k] / ta[k], eb[k] / ea[k])).collect();
    let (ka, kb) = (argmin(&ea), argmin(&eb));
    Ok(Comparison { rows, optimum: (tb[kb] / ta[ka], eb[kb] / ea[ka]) })
}

pub fn write_comparison(c: &Comparison, path: &Path) -> Result<(), CliError> {
    let mut rows: Vec<Vec<String>> =
        c.rows.iter().enumerate().map(|(k, &(t, e))| vec![(k + 1).to_string(), fmt(t), fmt(e)]).collect();
    rows.push(vec!["optimum".into(), fmt(c.optimum.0), fmt(c.optimum.1)]);
    write_csv(path, &COMPARE_COLUMNS, &rows)
}
