//! Column-by-column comparison of two run directories.

use std::fmt::Write as _;
use std::path::Path;

use crate::artifacts::{format_float, read_run, Summary, Table};
use crate::error::CliError;

/// Maximum absolute difference of one column against its tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnDiff {
    pub name: String,
    pub max_abs_diff: f64,
    pub tolerance: f64,
}

impl ColumnDiff {
    pub fn within(&self) -> bool {
        self.max_abs_diff <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub scenario_a: String,
    pub scenario_b: String,
    pub method_a: String,
    pub method_b: String,
    pub columns: Vec<ColumnDiff>,
}

impl Comparison {
    pub fn same_scenario(&self) -> bool {
        self.scenario_a == self.scenario_b
    }

    /// True when both runs describe one scenario and every shared column
    /// agrees within its tolerance.
    pub fn passed(&self) -> bool {
        self.same_scenario() && self.columns.iter().all(ColumnDiff::within)
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "methods: {} vs {}", self.method_a, self.method_b);
        if self.same_scenario() {
            let _ = writeln!(out, "scenario: {}", self.scenario_a);
        } else {
            let _ = writeln!(
                out,
                "scenario mismatch: {} vs {}",
                self.scenario_a, self.scenario_b
            );
        }
        let width = self.columns.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.columns {
            let _ = writeln!(
                out,
                "{:<width$}  max_abs_diff {}  tolerance {}  {}",
                c.name,
                format_float(c.max_abs_diff),
                format_float(c.tolerance),
                if c.within() { "ok" } else { "EXCEEDED" },
            );
        }
        let _ = writeln!(out, "{}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }
}

/// Compares two loaded runs. Columns present in only one run are ignored;
/// the time columns and row counts must agree for rows to be comparable.
/// Tolerances come from the first run.
pub fn compare_tables(
    a: (&Summary, &Table),
    b: (&Summary, &Table),
) -> Result<Comparison, CliError> {
    let (sa, ta) = a;
    let (sb, tb) = b;
    if ta.rows().len() != tb.rows().len() {
        return Err(CliError::Artifact(format!(
            "runs have {} and {} rows",
            ta.rows().len(),
            tb.rows().len()
        )));
    }
    if ta.columns().first().map(String::as_str) != Some("time")
        || tb.columns().first().map(String::as_str) != Some("time")
    {
        return Err(CliError::Artifact("time must be the first column".into()));
    }
    let mut columns = vec![ColumnDiff {
        name: "final_fidelity".into(),
        max_abs_diff: (sa.final_fidelity - sb.final_fidelity).abs(),
        tolerance: sa.tolerance("final_fidelity"),
    }];
    for name in ta.columns() {
        let Some(yb) = tb.column(name) else { continue };
        let ya = ta.column(name).expect("own column");
        let max_abs_diff = ya
            .iter()
            .zip(&yb)
            .map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() })
            .fold(0.0, f64::max);
        columns.push(ColumnDiff {
            name: name.clone(),
            max_abs_diff,
            tolerance: sa.tolerance(name),
        });
    }
    Ok(Comparison {
        scenario_a: sa.scenario_hash.clone(),
        scenario_b: sb.scenario_hash.clone(),
        method_a: sa.method.clone(),
        method_b: sb.method.clone(),
        columns,
    })
}

/// Reads and compares two run directories.
pub fn compare_runs(a: &Path, b: &Path) -> Result<Comparison, CliError> {
    let (sa, ta) = read_run(a)?;
    let (sb, tb) = read_run(b)?;
    compare_tables((&sa, &ta), (&sb, &tb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn run(scenario: &str, fid: f64, tol: f64) -> (Summary, Table) {
        let mut t = Table::new(vec!["time".into(), "fidelity".into()]);
        t.push(vec![0.0, 1.0]);
        t.push(vec![1.0, fid]);
        let s = Summary {
            tool: "t".into(),
            version: "0".into(),
            config_hash: "c".into(),
            scenario_hash: scenario.into(),
            system: "s".into(),
            method: "m".into(),
            final_fidelity: fid,
            slopes: BTreeMap::new(),
            residuals: BTreeMap::new(),
            columns: t.columns().to_vec(),
            default_tolerance: tol,
            tolerances: BTreeMap::new(),
        };
        (s, t)
    }

    #[test]
    fn identical_runs_have_zero_differences() {
        let (s, t) = run("x", 0.5, 0.0);
        let c = compare_tables((&s, &t), (&s, &t)).unwrap();
        assert!(c.passed());
        assert!(c.columns.iter().all(|d| d.max_abs_diff == 0.0));
    }

    #[test]
    fn differences_are_judged_against_first_run_tolerance() {
        let (sa, ta) = run("x", 0.5, 1e-3);
        let (sb, tb) = run("x", 0.5005, 0.0);
        assert!(compare_tables((&sa, &ta), (&sb, &tb)).unwrap().passed());
        let (sa, ta) = run("x", 0.5, 1e-4);
        assert!(!compare_tables((&sa, &ta), (&sb, &tb)).unwrap().passed());
    }

    #[test]
    fn scenario_mismatch_fails() {
        let (sa, ta) = run("x", 0.5, 1.0);
        let (sb, tb) = run("y", 0.5, 1.0);
        let c = compare_tables((&sa, &ta), (&sb, &tb)).unwrap();
        assert!(!c.same_scenario());
        assert!(!c.passed());
        assert!(c.report().contains("scenario mismatch"));
    }

    #[test]
    fn row_count_mismatch_is_an_error() {
        let (sa, ta) = run("x", 0.5, 1.0);
        let (sb, mut tb) = run("x", 0.5, 1.0);
        tb.push(vec![2.0, 0.5]);
        assert!(compare_tables((&sa, &ta), (&sb, &tb)).is_err());
    }
}
