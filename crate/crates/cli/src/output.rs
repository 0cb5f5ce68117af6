//! Verdicts, CSV tables and the on-disk layout of a report directory.
//!
//! A report directory holds `report.json` (deterministic given config and
//! seed), `timings.json` (wall-clock only) and one CSV per table. CSV columns
//! are fixed per table name; floats use the shortest round-trip form.

use crate::error::{CliError, Result};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: Option<f64>,
    pub threshold: Option<f64>,
    pub detail: String,
}

impl Verdict {
    /// Passes when `value ≤ threshold`.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Verdict { name: name.into(), passed: value <= threshold, value: Some(value), threshold: Some(threshold), detail: String::new() }
    }

    /// Passes when `value ≥ threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Verdict { name: name.into(), passed: value >= threshold, value: Some(value), threshold: Some(threshold), detail: String::new() }
    }

    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Verdict { name: name.into(), passed, value: None, threshold: None, detail: detail.into() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: &[&'static str]) -> Self {
        Table { name: name.into(), header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width of table {}", self.name);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            for (k, cell) in row.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                match cell {
                    Cell::Int(v) => write!(s, "{v}").unwrap(),
                    Cell::Real(v) => write!(s, "{}", format_real(*v)).unwrap(),
                    Cell::Text(t) if t.contains([',', '"', '\n']) => write!(s, "\"{}\"", t.replace('"', "\"\"")).unwrap(),
                    Cell::Text(t) => s.push_str(t),
                }
            }
            s.push('\n');
        }
        s
    }
}

fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Serializes with non-finite floats mapped to `null` by serde_json.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Config(format!("cannot serialize report: {e}")))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Writes the report directory. Everything is rendered first, so a failure
/// to serialize leaves no files behind.
pub fn write_report_dir(dir: &Path, report_json: &str, timings_json: &str, tables: &[Table]) -> Result<Vec<PathBuf>> {
    let rendered: Vec<(PathBuf, String)> = std::iter::once((dir.join("report.json"), report_json.to_string()))
        .chain(std::iter::once((dir.join("timings.json"), timings_json.to_string())))
        .chain(tables.iter().map(|t| (dir.join(format!("{}.csv", t.name)), t.to_csv())))
        .collect();
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::with_capacity(rendered.len());
    for (path, text) in rendered {
        std::fs::write(&path, text).map_err(io_err(&path))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rendering() {
        let mut t = Table::new("t", &["a", "b", "c"]);
        t.push(vec![1usize.into(), 0.5.into(), "x,y".into()]);
        t.push(vec![2usize.into(), f64::INFINITY.into(), "plain".into()]);
        assert_eq!(t.to_csv(), "a,b,c\n1,5e-1,\"x,y\"\n2,inf,plain\n");
    }

    #[test]
    fn verdict_thresholds() {
        assert!(Verdict::at_most("x", 1.0, 1.0).passed);
        assert!(!Verdict::at_least("x", 0.9, 1.0).passed);
        assert!(!Verdict::at_most("x", f64::NAN, 1.0).passed);
    }
}
