//! Delimited-text formats for actions, value scores and kernels.
//!
//! * actions: header `id,description`, ids `0..N` in order, RFC-4180 quoting.
//! * scores: header `action_id,value_name,score`, any number of values per file.
//! * kernels: first row lists the action ids `0..N`, then `N` rows of `N` numbers.

use std::fs;
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};

use crate::domain::{ActionSet, Provenance, SimilarityMatrix, ValueScale, ValueScores};
use crate::error::{Error, Result};

/// Asymmetry above which parsing a kernel logs a warning before symmetrizing.
pub const ASYMMETRY_WARN: f64 = 1e-9;

const DEFAULT_ACTIONS: &str = include_str!("../../data/actions.csv");

fn parse_err(origin: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse { path: origin.to_string(), line, message: message.into() }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| parse_err(&path.display().to_string(), 0, format!("cannot read file: {e}")))
}

fn line_of(record: &StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

fn records(text: &str, origin: &str, expected_header: &[&str]) -> Result<Vec<StringRecord>> {
    let mut reader = ReaderBuilder::new().has_headers(true).flexible(true).from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(origin, 1, e.to_string()))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != expected_header {
        return Err(parse_err(origin, 1, format!("expected header `{}`, found `{}`", expected_header.join(","), names.join(","))));
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(origin, line, e.to_string())
        })?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != expected_header.len() {
            return Err(parse_err(origin, line_of(&rec), format!("expected {} fields, found {}", expected_header.len(), rec.len())));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_actions_str(text: &str, origin: &str) -> Result<ActionSet> {
    let rows = records(text, origin, &["id", "description"])?;
    if rows.is_empty() {
        return Err(parse_err(origin, 1, "no actions after the header"));
    }
    let mut descriptions = Vec::with_capacity(rows.len());
    for (expected, rec) in rows.iter().enumerate() {
        let line = line_of(rec);
        let id: usize = rec[0].trim().parse().map_err(|_| parse_err(origin, line, format!("invalid id `{}`", &rec[0])))?;
        if id != expected {
            return Err(parse_err(origin, line, format!("expected id {expected}, found {id}")));
        }
        if rec[1].trim().is_empty() {
            return Err(parse_err(origin, line, "empty description"));
        }
        descriptions.push(rec[1].to_string());
    }
    ActionSet::new(descriptions)
}

pub fn parse_actions(path: impl AsRef<Path>) -> Result<ActionSet> {
    let path = path.as_ref();
    parse_actions_str(&read(path)?, &path.display().to_string())
}

/// The bundled catalog of 50 action descriptions.
pub fn default_actions() -> ActionSet {
    parse_actions_str(DEFAULT_ACTIONS, "data/actions.csv").expect("bundled action file is valid")
}

/// Scores for one value. With `n_actions` unset, N is one past the largest id seen.
pub fn parse_scores_str(
    text: &str,
    origin: &str,
    value_name: &str,
    n_actions: Option<usize>,
    scale: ValueScale<f64>,
) -> Result<ValueScores<f64>> {
    let rows = records(text, origin, &["action_id", "value_name", "score"])?;
    let mut found: Vec<(usize, f64, u64)> = Vec::new();
    for rec in &rows {
        if rec[1].trim() != value_name {
            continue;
        }
        let line = line_of(rec);
        let id: usize = rec[0].trim().parse().map_err(|_| parse_err(origin, line, format!("invalid action id `{}`", &rec[0])))?;
        let score: f64 = rec[2].trim().parse().map_err(|_| parse_err(origin, line, format!("invalid score `{}`", &rec[2])))?;
        if !scale.contains(score) {
            return Err(parse_err(origin, line, format!("score {score} outside [{}, {}]", scale.min, scale.max)));
        }
        found.push((id, score, line));
    }
    if found.is_empty() {
        return Err(parse_err(origin, 0, format!("no rows for value `{value_name}`")));
    }
    let n = n_actions.unwrap_or_else(|| found.iter().map(|f| f.0).max().unwrap_or(0) + 1);
    let mut scores: Vec<Option<f64>> = vec![None; n];
    for (id, score, line) in found {
        if id >= n {
            return Err(parse_err(origin, line, format!("action id {id} out of range for {n} actions")));
        }
        if scores[id].replace(score).is_some() {
            return Err(parse_err(origin, line, format!("duplicate row for action {id}")));
        }
    }
    let missing: Vec<usize> = (0..n).filter(|&i| scores[i].is_none()).collect();
    if !missing.is_empty() {
        return Err(parse_err(origin, 0, format!("value `{value_name}` is missing action ids {missing:?}")));
    }
    ValueScores::new(value_name, scores.into_iter().map(Option::unwrap).collect(), scale)
}

pub fn parse_scores(
    path: impl AsRef<Path>,
    value_name: &str,
    n_actions: Option<usize>,
    scale: ValueScale<f64>,
) -> Result<ValueScores<f64>> {
    let path = path.as_ref();
    parse_scores_str(&read(path)?, &path.display().to_string(), value_name, n_actions, scale)
}

/// Distinct value names in a scores file, in order of first appearance.
pub fn score_value_names(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let rows = records(&read(path)?, &path.display().to_string(), &["action_id", "value_name", "score"])?;
    let mut names: Vec<String> = Vec::new();
    for rec in rows {
        let name = rec[1].trim();
        if !names.iter().any(|n| n == name) {
            names.push(name.to_string());
        }
    }
    Ok(names)
}

/// A parsed kernel and the largest asymmetry that was averaged away.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedKernel {
    pub kernel: SimilarityMatrix<f64>,
    pub asymmetry: f64,
}

pub fn parse_kernel_str(text: &str, origin: &str, expected_n: Option<usize>) -> Result<ParsedKernel> {
    let mut reader = ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut rows: Vec<StringRecord> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| parse_err(origin, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        rows.push(rec);
    }
    let Some((header, body)) = rows.split_first() else {
        return Err(parse_err(origin, 0, "empty kernel file"));
    };
    let n = header.len();
    for (i, cell) in header.iter().enumerate() {
        if cell.trim().parse::<usize>().ok() != Some(i) {
            return Err(parse_err(origin, 1, format!("header column {i} should be id {i}, found `{cell}`")));
        }
    }
    if let Some(expected) = expected_n {
        if n != expected {
            return Err(Error::DimensionMismatch { expected, found: n });
        }
    }
    if body.len() != n {
        return Err(parse_err(origin, 0, format!("expected {n} rows of similarities, found {}", body.len())));
    }
    let mut values = Vec::with_capacity(n * n);
    for rec in body {
        let line = line_of(rec);
        if rec.len() != n {
            return Err(parse_err(origin, line, format!("expected {n} columns, found {}", rec.len())));
        }
        for cell in rec.iter() {
            let v: f64 = cell.trim().parse().map_err(|_| parse_err(origin, line, format!("non-numeric cell `{cell}`")))?;
            if !v.is_finite() {
                return Err(parse_err(origin, line, format!("non-finite cell `{cell}`")));
            }
            values.push(v);
        }
    }
    let raw = SimilarityMatrix::from_matrix(nalgebra::DMatrix::from_row_slice(n, n, &values), Provenance::File)?;
    let (kernel, asymmetry) = raw.symmetrized();
    if asymmetry > ASYMMETRY_WARN {
        log::warn!("{origin}: kernel asymmetric by up to {asymmetry:e}; using (m + mᵀ)/2");
    }
    Ok(ParsedKernel { kernel, asymmetry })
}

pub fn parse_kernel(path: impl AsRef<Path>, expected_n: Option<usize>) -> Result<ParsedKernel> {
    let path = path.as_ref();
    parse_kernel_str(&read(path)?, &path.display().to_string(), expected_n)
}

fn writer_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::io(path, e)
}

pub fn write_actions(path: impl AsRef<Path>, actions: &ActionSet) -> Result<()> {
    let path = path.as_ref();
    let mut w = WriterBuilder::new().from_path(path).map_err(|e| writer_err(path, e))?;
    w.write_record(["id", "description"]).map_err(|e| writer_err(path, e))?;
    for (id, text) in actions.iter() {
        w.write_record([id.to_string().as_str(), text]).map_err(|e| writer_err(path, e))?;
    }
    w.flush().map_err(|e| writer_err(path, e))
}

/// Writes one or more values to a single scores file.
pub fn write_scores(path: impl AsRef<Path>, values: &[&ValueScores<f64>]) -> Result<()> {
    let path = path.as_ref();
    let mut w = WriterBuilder::new().from_path(path).map_err(|e| writer_err(path, e))?;
    w.write_record(["action_id", "value_name", "score"]).map_err(|e| writer_err(path, e))?;
    for v in values {
        for (id, s) in v.scores().iter().enumerate() {
            w.write_record([id.to_string(), v.value_name().to_string(), s.to_string()])
                .map_err(|e| writer_err(path, e))?;
        }
    }
    w.flush().map_err(|e| writer_err(path, e))
}

/// Shortest round-trip decimal for every entry, so re-parsing is bit-exact.
pub fn write_kernel(path: impl AsRef<Path>, kernel: &SimilarityMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let n = kernel.n();
    let mut w = WriterBuilder::new().from_path(path).map_err(|e| writer_err(path, e))?;
    w.write_record((0..n).map(|i| i.to_string())).map_err(|e| writer_err(path, e))?;
    for i in 0..n {
        w.write_record((0..n).map(|j| kernel.get(i, j).to_string())).map_err(|e| writer_err(path, e))?;
    }
    w.flush().map_err(|e| writer_err(path, e))
}

#[cfg(test)]
mod tests;
