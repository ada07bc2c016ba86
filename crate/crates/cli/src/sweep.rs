//! Parameter sweeps: one run per value of a dotted configuration path.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde_json::Value;

use crate::artifacts::{format_float, Artifacts};
use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::scenario::execute;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SHORTCUT_FORGE_THREADS";
pub const SWEEP_FILE: &str = "sweep.csv";

/// Parses a comma-separated value list. A list that starts with `[` is read
/// as a JSON array; otherwise each item is read as JSON and falls back to a
/// string.
pub fn parse_values(text: &str) -> Result<Vec<Value>, CliError> {
    let text = text.trim();
    let values = if text.starts_with('[') {
        match serde_json::from_str(text) {
            Ok(Value::Array(v)) => v,
            _ => return Err(CliError::Config(format!("bad value list {text:?}"))),
        }
    } else {
        text.split(',')
            .map(str::trim)
            .map(|item| serde_json::from_str(item).unwrap_or_else(|_| Value::String(item.into())))
            .collect()
    };
    if values.is_empty() || values.iter().any(|v| v.as_str() == Some("")) {
        return Err(CliError::Config(
            "sweep needs at least one nonempty value".into(),
        ));
    }
    Ok(values)
}

/// Sets `path` (dot-separated keys) inside a JSON object. Every key before
/// the last must name an existing object.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad parameter path {path:?}")));
    }
    let (last, parents) = keys.split_last().expect("split yields one key");
    let mut node = root;
    for key in parents {
        node = node
            .get_mut(*key)
            .filter(|v| v.is_object())
            .ok_or_else(|| {
                CliError::Config(format!("parameter path {path:?}: no object {key:?}"))
            })?;
    }
    node.as_object_mut()
        .ok_or_else(|| CliError::Config(format!("parameter path {path:?} is not in an object")))?
        .insert((*last).to_string(), value);
    Ok(())
}

/// Worker count from [`THREADS_ENV`], or `None` for the rayon default.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {s:?}"
            ))),
        },
    }
}

/// Builds one validated configuration per value.
pub fn sweep_configs(
    base: &ScenarioConfig,
    param: &str,
    values: &[Value],
) -> Result<Vec<ScenarioConfig>, CliError> {
    let template = serde_json::to_value(base).expect("config serializes");
    values
        .iter()
        .map(|v| {
            let mut doc = template.clone();
            set_path(&mut doc, param, v.clone())?;
            let cfg: ScenarioConfig = serde_json::from_value(doc)
                .map_err(|e| CliError::Config(format!("{param} = {v}: {e}")))?;
            cfg.validate()
                .map_err(|e| CliError::Config(format!("{param} = {v}: {e}")))?;
            Ok(cfg)
        })
        .collect()
}

/// Runs every configuration, at most `threads` at a time, keeping the input
/// order. The first failure in input order is returned.
pub fn run_all(
    configs: &[ScenarioConfig],
    threads: Option<usize>,
) -> Result<Vec<Artifacts>, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let results: Vec<Result<Artifacts, CliError>> =
        pool.install(|| configs.par_iter().map(execute).collect());
    results.into_iter().collect()
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Number(n) => n.as_f64().map_or_else(|| n.to_string(), format_float),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// The sweep index table: one row per value with the final fidelity, every
/// slope reported by any run and the config hash.
pub fn sweep_table(values: &[Value], runs: &[Artifacts]) -> String {
    let mut slope_names: Vec<&String> = runs.iter().flat_map(|r| r.summary.slopes.keys()).collect();
    slope_names.sort();
    slope_names.dedup();
    let mut out = String::from("index,value,final_fidelity");
    for s in &slope_names {
        let _ = write!(out, ",slope_{s}");
    }
    out.push_str(",config_hash\n");
    for (i, (v, r)) in values.iter().zip(runs).enumerate() {
        let cell = csv_cell(v);
        let cell = if cell.contains(',') || cell.contains('"') {
            format!("\"{}\"", cell.replace('"', "\"\""))
        } else {
            cell
        };
        let _ = write!(out, "{i},{cell},{}", format_float(r.summary.final_fidelity));
        for s in &slope_names {
            let x = r.summary.slopes.get(*s).copied().unwrap_or(f64::NAN);
            let _ = write!(out, ",{}", format_float(x));
        }
        let _ = writeln!(out, ",{}", r.summary.config_hash);
    }
    out
}

pub fn run_dir_name(index: usize) -> String {
    format!("run_{index:03}")
}

/// Writes each run into `out/run_NNN/` and the index table into
/// `out/sweep.csv`.
pub fn write_sweep(out: &Path, values: &[Value], runs: &[Artifacts]) -> Result<(), CliError> {
    for (i, r) in runs.iter().enumerate() {
        r.write(&out.join(run_dir_name(i)))?;
    }
    let path = out.join(SWEEP_FILE);
    let tmp = out.join(format!(".{SWEEP_FILE}.tmp"));
    fs::write(&tmp, sweep_table(values, runs)).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))
}
