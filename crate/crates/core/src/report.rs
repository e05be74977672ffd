//! Tabular and JSON output for run results.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::linalg::Mat;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("table `{table}`: row {row} has {got} cells, header has {expected}")]
    Ragged { table: String, row: usize, got: usize, expected: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }

    /// Tables are embedded in `summary.json`.
    pub fn json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }
}

/// A named table of numbers; `None` cells are written empty (CSV) or null (JSON).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: Vec<String>) -> Self {
        Self { name: name.into(), header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        self.rows.push(row);
    }

    pub fn push_values(&mut self, row: impl IntoIterator<Item = f64>) {
        self.rows.push(row.into_iter().map(Some).collect());
    }

    fn check(&self) -> Result<(), ReportError> {
        for (row, cells) in self.rows.iter().enumerate() {
            if cells.len() != self.header.len() {
                return Err(ReportError::Ragged {
                    table: self.name.clone(),
                    row,
                    got: cells.len(),
                    expected: self.header.len(),
                });
            }
        }
        Ok(())
    }
}

/// Column names `prefix[i,j]` for a row-major flattening of an `r × c` matrix.
pub fn matrix_columns(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    if rows == 1 && cols == 1 {
        return vec![prefix.to_string()];
    }
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            out.push(format!("{prefix}[{i},{j}]"));
        }
    }
    out
}

pub fn flatten(m: &Mat) -> impl Iterator<Item = f64> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| m[(i, j)]))
}

/// One row per time: `s`, then each matrix family flattened in order.
pub fn path_table(name: &str, times: &[f64], families: &[(&str, &[Mat])]) -> Table {
    let mut header = vec!["s".to_string()];
    for (prefix, values) in families {
        let (r, c) = values.first().map_or((0, 0), |m| m.shape());
        header.extend(matrix_columns(prefix, r, c));
    }
    let mut table = Table::new(name, header);
    for (k, &s) in times.iter().enumerate() {
        let mut row = vec![s];
        for (_, values) in families {
            row.extend(flatten(&values[k]));
        }
        table.push_values(row);
    }
    table
}

fn io_error(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io { path: path.display().to_string(), source }
}

/// Writes `<dir>/<name>.csv`; floats use Rust's shortest round-trip form.
pub fn write_csv(dir: &Path, table: &Table) -> Result<PathBuf, ReportError> {
    table.check()?;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join(format!("{}.csv", table.name));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()))?;
    }
    w.flush().map_err(|e| io_error(&path, e))?;
    Ok(path)
}

pub fn write_summary(dir: &Path, summary: &serde_json::Value) -> Result<PathBuf, ReportError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(summary)?;
    fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))?;
    Ok(path)
}

/// Writes the tables and the summary according to `format`; returns the files written.
pub fn write_outputs(
    dir: &Path,
    format: OutputFormat,
    summary: &serde_json::Value,
    tables: &[Table],
) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    if format.csv() {
        for t in tables {
            written.push(write_csv(dir, t)?);
        }
    }
    let mut summary = summary.clone();
    if format.json() {
        if let serde_json::Value::Object(map) = &mut summary {
            map.insert("tables".into(), serde_json::to_value(tables)?);
        }
    }
    written.push(write_summary(dir, &summary)?);
    Ok(written)
}
