//! Artifact assembly: CSV tables, JSON documents and the human summary.

use std::fmt::Write as _;
use std::path::Path;

use matscat::fmt_float;
use matscat::linalg::CMat;
use serde_json::{json, Value};

use crate::config::Format;
use crate::CliError;

/// What a command produced.
pub struct Report {
    pub csv: String,
    pub json: Value,
    pub summary: String,
    /// Set when the command ran but its verdict is a failure, e.g. an invalid boundary condition.
    pub failure: Option<CliError>,
}

impl Report {
    pub fn new(csv: String, json: Value, summary: String) -> Self {
        Report { csv, json, summary, failure: None }
    }
}

/// A CSV table with a fixed header.
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Csv { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    /// `name,value` pairs for reports without a natural table shape.
    pub fn key_values(pairs: &[(&str, f64)]) -> Self {
        let mut csv = Csv::new(["name", "value"]);
        for (k, v) in pairs {
            csv.rows.push(vec![k.to_string(), fmt_float(*v)]);
        }
        csv
    }

    pub fn push(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.rows.push(cells);
    }

    pub fn push_floats(&mut self, cells: impl IntoIterator<Item = f64>) {
        self.push(cells.into_iter().map(fmt_float).collect());
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

/// Column names `re_{name}_ij, im_{name}_ij` in row-major order.
pub fn matrix_columns(name: &str, n: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            cols.push(format!("re_{name}_{i}{j}"));
            cols.push(format!("im_{name}_{i}{j}"));
        }
    }
    cols
}

/// Entries matching [`matrix_columns`].
pub fn matrix_cells(m: &CMat) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

/// Row-major `[[[re, im], …], …]`.
pub fn matrix_json(m: &CMat) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|i| Value::Array((0..m.ncols()).map(|j| json!([m[(i, j)].re, m[(i, j)].im])).collect()))
            .collect(),
    )
}

pub fn write_artifacts(dir: &Path, command: &str, report: &Report, formats: &[Format]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    if formats.contains(&Format::Csv) {
        std::fs::write(dir.join(format!("{command}.csv")), &report.csv)?;
    }
    if formats.contains(&Format::Json) {
        let mut text = serde_json::to_string_pretty(&report.json).expect("JSON values always serialise");
        text.push('\n');
        std::fs::write(dir.join(format!("{command}.json")), text)?;
    }
    std::fs::write(dir.join("summary.txt"), &report.summary)?;
    Ok(())
}

/// Summary text: a title line followed by aligned `name: value` lines.
pub fn summary(title: &str, lines: &[(&str, String)]) -> String {
    let width = lines.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    let mut s = format!("{title}\n");
    for (k, v) in lines {
        let _ = writeln!(s, "  {k:<width$}  {v}");
    }
    s
}
