//! Fixed-format CSV output.

use std::path::Path;

use anyhow::Context;
use iongate_core::consts::ordinary;
use iongate_core::errors::sweep::SweepPoint;
use iongate_core::errors::ErrorBudget;

use crate::CliError;

/// Column set of every `result.csv`.
pub const RESULT_COLUMNS: [&str; 7] = [
    "t_g_us",
    "eps_total",
    "eps_carr",
    "eps_mot",
    "eps_deph",
    "rabi_over_2pi_MHz",
    "detuning_over_2pi_kHz",
];

/// 12 significant digits.
pub fn fmt(x: f64) -> String {
    format!("{x:.11e}")
}

/// One `result.csv` row. `rabi` and `bus_detuning` in rad/s.
pub fn result_row(budget: &ErrorBudget, rabi: f64, bus_detuning: f64) -> Vec<String> {
    vec![
        fmt(budget.gate_time * 1e6),
        fmt(budget.eps_total),
        fmt(budget.eps_carr),
        fmt(budget.eps_mot),
        fmt(budget.eps_deph),
        fmt(ordinary(rabi) / 1e6),
        fmt(ordinary(bus_detuning) / 1e3),
    ]
}

pub fn point_row(p: &SweepPoint) -> Vec<String> {
    result_row(&p.budget, p.rabi, p.bus_detuning)
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(header).context("csv write")?;
    for r in rows {
        w.write_record(r).context("csv write")?;
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn write_results(path: &Path, rows: &[Vec<String>]) -> Result<(), CliError> {
    write_csv(path, &RESULT_COLUMNS, rows)
}

/// Header and rows of a CSV file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let header = r
        .headers()
        .with_context(|| format!("cannot read header of {}", path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.with_context(|| format!("malformed row in {}", path.display()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}
