//! Run artifacts: the JSON summary and the two CSV tables.
//!
//! Numbers in the CSVs are printed with 17 significant digits so the text
//! round-trips to the same doubles, and a fixed run produces byte-identical
//! files.

use nlcontact_core::fd::GridFunction;
use nlcontact_core::iterate::SolveReport;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub mode: String,
    /// Canonical config text; loading it reproduces this run.
    pub config_echo: String,
    pub iterations: usize,
    pub q_hat: Option<f64>,
    pub q_bound: f64,
    pub final_abs_error: Option<f64>,
    pub final_rel_error: Option<f64>,
    pub warnings: Vec<String>,
    pub timings: Timings,
}

/// Wall-clock phases in seconds. `emit_s` covers the CSV files only; the
/// JSON summary itself is written last.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Timings {
    pub build_s: f64,
    pub solve_s: f64,
    pub emit_s: f64,
}

fn cell(v: f64) -> String {
    format!("{:.16e}", v)
}

pub const ITERATIONS_HEADER: &str = "k,trace_delta,abs_error,rel_error\n";

/// One row per sweep; the error columns stay empty without an exact
/// reference.
pub fn iterations_csv(report: &SolveReport) -> String {
    let mut s = String::from(ITERATIONS_HEADER);
    for (idx, &delta) in report.deltas.iter().enumerate() {
        let abs = report.abs_errors.get(idx).map(|&v| cell(v)).unwrap_or_default();
        let rel = report.rel_errors.get(idx).map(|&v| cell(v)).unwrap_or_default();
        s.push_str(&format!("{},{},{},{}\n", idx + 1, cell(delta), abs, rel));
    }
    s
}

/// Every stored node including the boundary, x2 varying slowest.
pub fn solution_csv(u: &GridFunction) -> String {
    let grid = *u.grid();
    let mut s = String::from("x1,x2,u\n");
    for j in 0..=grid.n2 + 1 {
        for i in u.col_range() {
            s.push_str(&format!(
                "{},{},{}\n",
                cell(grid.x1(i)),
                cell(grid.x2(j)),
                cell(u.get(i, j))
            ));
        }
    }
    s
}
