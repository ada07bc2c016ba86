//! Run artifacts: a CSV time series and a JSON summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMESERIES_FILE: &str = "timeseries.csv";
pub const TOOL_NAME: &str = "shortcut-forge";

/// Formats a float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Lowercase snake_case: `[a-z][a-z0-9_]*`.
pub fn is_snake_case(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some('a'..='z'))
        && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

/// A numeric table with named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        for c in &columns {
            debug_assert!(is_snake_case(c), "column {c}");
        }
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| format_float(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses CSV written by [`Table::to_csv`]: a header of distinct
    /// snake_case names followed by rows of floats of the same width.
    pub fn parse_csv(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CliError::Artifact("empty csv".into()))?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        for (i, c) in columns.iter().enumerate() {
            if !is_snake_case(c) {
                return Err(CliError::Artifact(format!("bad column name {c:?}")));
            }
            if columns[..i].contains(c) {
                return Err(CliError::Artifact(format!("duplicate column {c:?}")));
            }
        }
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|cell| {
                    cell.parse::<f64>().map_err(|_| {
                        CliError::Artifact(format!("row {}: bad number {cell:?}", n + 1))
                    })
                })
                .collect::<Result<Vec<f64>, CliError>>()?;
            if row.len() != columns.len() {
                return Err(CliError::Artifact(format!(
                    "row {}: {} cells for {} columns",
                    n + 1,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }
}

/// Scalar results of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub scenario_hash: String,
    pub system: String,
    pub method: String,
    pub final_fidelity: f64,
    pub slopes: BTreeMap<String, f64>,
    pub residuals: BTreeMap<String, f64>,
    pub columns: Vec<String>,
    pub default_tolerance: f64,
    pub tolerances: BTreeMap<String, f64>,
}

impl Summary {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Artifact(format!("summary: {e}")))
    }

    pub fn tolerance(&self, column: &str) -> f64 {
        self.tolerances
            .get(column)
            .copied()
            .unwrap_or(self.default_tolerance)
    }
}

/// Everything a run writes.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifacts {
    pub summary: Summary,
    pub timeseries: Table,
    /// Additional tables written as `<name>.csv`.
    pub extra: Vec<(String, Table)>,
}

impl Artifacts {
    /// File names and contents, in write order.
    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = vec![(TIMESERIES_FILE.to_string(), self.timeseries.to_csv())];
        for (name, table) in &self.extra {
            out.push((format!("{name}.csv"), table.to_csv()));
        }
        out.push((SUMMARY_FILE.to_string(), self.summary.to_json()));
        out
    }

    /// Writes all files into `dir`, each through a temporary name so that an
    /// interrupted write never leaves a truncated artifact.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (name, content) in self.files() {
            let tmp = dir.join(format!(".{name}.tmp"));
            let path = dir.join(&name);
            fs::write(&tmp, content).map_err(|e| CliError::io(&tmp, e))?;
            fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Reads the summary and time series of a run directory.
pub fn read_run(dir: &Path) -> Result<(Summary, Table), CliError> {
    let s = dir.join(SUMMARY_FILE);
    let t = dir.join(TIMESERIES_FILE);
    let summary = Summary::parse(&fs::read_to_string(&s).map_err(|e| CliError::io(&s, e))?)?;
    let table = Table::parse_csv(&fs::read_to_string(&t).map_err(|e| CliError::io(&t, e))?)?;
    Ok((summary, table))
}
