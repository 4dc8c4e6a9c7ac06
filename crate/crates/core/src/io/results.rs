//! Campaign output: `runs.csv`, `summary.csv` and the plot-ready `binned.tsv`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use csv::WriterBuilder;

use crate::error::{Error, Result};
use crate::simulation::{BinnedRow, CampaignResults, RunRow, SummaryRow};
use crate::theory::TheoryReport;

pub const RUN_COLUMNS: [&str; 20] = [
    "run_index",
    "cell",
    "seed",
    "agent",
    "kernel",
    "value",
    "phase",
    "corruption",
    "alpha",
    "alignment_full",
    "alignment_pers",
    "alignment_cross",
    "mean_reward",
    "bad_actions",
    "non_optimal_actions",
    "unique_actions",
    "iterations_to_convergence",
    "converged",
    "steps",
    "error",
];

pub const SUMMARY_COLUMNS: [&str; 7] = ["cell", "phase", "alignment_variant", "metric", "n", "spearman", "p_value"];

pub const BINNED_COLUMNS: [&str; 8] = ["cell", "phase", "metric", "bin_width", "bin_center", "mean", "standard_error", "count"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn run_record(row: &RunRow) -> Vec<String> {
    let m = row.metrics.as_ref();
    vec![
        row.run_index.to_string(),
        row.cell.clone(),
        row.seed.to_string(),
        row.agent.to_string(),
        row.kernel.clone(),
        row.value.clone(),
        row.phase.name().to_string(),
        opt(row.corruption),
        opt(row.alpha),
        opt(row.alignment_full),
        opt(row.alignment_pers),
        opt(row.alignment_cross),
        opt(m.map(|m| m.mean_reward)),
        opt(m.map(|m| m.bad_actions)),
        opt(m.map(|m| m.non_optimal_actions)),
        opt(m.map(|m| m.unique_actions)),
        opt(m.and_then(|m| m.iterations_to_convergence)),
        opt(m.map(|m| m.converged)),
        opt(m.map(|m| m.steps)),
        row.error.clone().unwrap_or_default(),
    ]
}

fn summary_record(row: &SummaryRow) -> Vec<String> {
    vec![
        row.cell.clone(),
        row.phase.name().to_string(),
        row.alignment_variant.clone(),
        row.metric.clone(),
        row.n.to_string(),
        opt(row.spearman),
        opt(row.p_value),
    ]
}

fn binned_record(row: &BinnedRow) -> Vec<String> {
    vec![
        row.cell.clone(),
        row.phase.name().to_string(),
        row.metric.clone(),
        row.bin_width.to_string(),
        row.center.to_string(),
        row.mean.to_string(),
        row.standard_error.to_string(),
        row.count.to_string(),
    ]
}

fn write_table<W: Write>(out: W, delimiter: u8, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> std::result::Result<(), csv::Error> {
    let mut w = WriterBuilder::new().delimiter(delimiter).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_runs<W: Write>(out: W, rows: &[RunRow]) -> std::result::Result<(), csv::Error> {
    write_table(out, b',', &RUN_COLUMNS, rows.iter().map(run_record))
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> std::result::Result<(), csv::Error> {
    write_table(out, b',', &SUMMARY_COLUMNS, rows.iter().map(summary_record))
}

pub fn write_binned<W: Write>(out: W, rows: &[BinnedRow]) -> std::result::Result<(), csv::Error> {
    write_table(out, b'\t', &BINNED_COLUMNS, rows.iter().map(binned_record))
}

/// Writes the three result files into `out_dir`, creating it if needed.
pub fn emit_results(results: &CampaignResults, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let open = |name: &str| -> Result<(PathBuf, fs::File)> {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok((path, file))
    };
    let (runs, f) = open("runs.csv")?;
    write_runs(f, &results.runs).map_err(|e| Error::io(&runs, e))?;
    let (summary, f) = open("summary.csv")?;
    write_summary(f, &results.summary).map_err(|e| Error::io(&summary, e))?;
    let (binned, f) = open("binned.tsv")?;
    write_binned(f, &results.binned).map_err(|e| Error::io(&binned, e))?;
    Ok(vec![runs, summary, binned])
}

/// Plain-text pass/fail table for the theory suite.
pub fn write_theory_report<W: Write>(mut out: W, report: &TheoryReport) -> std::io::Result<()> {
    for row in &report.rows {
        let status = match (row.passed, row.informational) {
            (true, _) => "PASS",
            (false, true) => "INFO",
            (false, false) => "FAIL",
        };
        writeln!(out, "{status}  {}  [{}]", row.name, row.detail)?;
    }
    writeln!(
        out,
        "{} checks, {} failed, {:.2}s",
        report.rows.iter().filter(|r| !r.informational).count(),
        report.rows.iter().filter(|r| !r.passed && !r.informational).count(),
        report.seconds
    )
}
