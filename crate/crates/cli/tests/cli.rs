use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shortcut_forge_cli::artifacts::{is_snake_case, read_run, Table};

const BIN: &str = env!("CARGO_BIN_EXE_shortcut-forge");

const LZ_EXACT: &str = r#"{
    "hbar": 1.0, "duration": 1.0,
    "system": {"type": "landau_zener", "delta": 1.0, "lambda_start": -5.0, "lambda_end": 5.0},
    "method": {"type": "exact_cd"}
}"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn shortcut_forge(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("SHORTCUT_FORGE_THREADS", n),
        None => cmd.env_remove("SHORTCUT_FORGE_THREADS"),
    };
    cmd.output().unwrap()
}

fn run(config: &Path, out: &Path) -> Output {
    shortcut_forge(
        &[
            "run",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    )
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn random_config(seed: u64, method: &str) -> String {
    format!(
        r#"{{
        "hbar": 1.0, "duration": 2.0, "time_points": 41,
        "system": {{"type": "random_hermitian", "dim": 4, "seed": {seed}}},
        "method": {method},
        "compare": {{"default_tolerance": 1e-7}}
    }}"#
    )
}

#[test]
fn landau_zener_exact_run_tracks_ground_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "lz.json", LZ_EXACT);
    let out = tmp.path().join("out");
    let o = run(&cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let (summary, table) = read_run(&out).unwrap();
    assert!(summary.final_fidelity >= 1.0 - 1e-6);
    assert!(table
        .column("fidelity")
        .unwrap()
        .iter()
        .all(|&f| f >= 1.0 - 1e-6));
    assert_eq!(summary.tool, "shortcut-forge");
    assert_eq!(summary.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(summary.config_hash.len(), 64);
}

#[test]
fn csv_layout_follows_conventions() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "lz.json", LZ_EXACT);
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out).status.success());
    let text = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header[0], "time");
    assert!(header.iter().all(|c| is_snake_case(c)));
    for cell in text.lines().nth(1).unwrap().split(',') {
        let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 17, "{cell}");
    }
    assert_eq!(Table::parse_csv(&text).unwrap().rows().len(), 201);
}

#[test]
fn trotter_run_reports_second_order_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "trotter.json",
        r#"{
        "hbar": 1.0, "duration": 10.0,
        "system": {"type": "landau_zener", "delta": 1.0, "lambda_start": -5.0, "lambda_end": 5.0},
        "method": {"type": "trotter", "slices": [8, 16, 32, 64, 128, 256]}
    }"#,
    );
    let out = tmp.path().join("out");
    let o = run(&cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let (summary, _) = read_run(&out).unwrap();
    let slope = summary.slopes["infidelity_vs_slices"];
    assert!((-2.3..=-1.7).contains(&slope), "slope {slope}");
    let scaling = Table::parse_csv(&fs::read_to_string(out.join("scaling.csv")).unwrap()).unwrap();
    assert_eq!(
        scaling.column("slices").unwrap(),
        vec![8.0, 16.0, 32.0, 64.0, 128.0, 256.0]
    );
}

#[test]
fn config_errors_exit_two_without_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = [
        LZ_EXACT.replace("exact_cd", "exact_counterdiabatic"),
        LZ_EXACT.replace("\"hbar\": 1.0", "\"hbar\": -1.0"),
        LZ_EXACT.replace("\"duration\": 1.0,", "\"duration\": 1.0, \"colour\": 3,"),
        random_config(1, r#"{"type": "krylov"}"#).replace(", \"seed\": 1", ""),
        "{ not json".to_string(),
    ];
    for (i, text) in bad.iter().enumerate() {
        let cfg = write_config(tmp.path(), &format!("bad{i}.json"), text);
        let out = tmp.path().join(format!("out{i}"));
        let o = run(&cfg, &out);
        assert_eq!(o.status.code(), Some(2), "case {i}: {}", stderr(&o));
        assert!(!out.exists(), "case {i} left artifacts");
        assert!(stderr(&o).contains("config error"));
    }
    let o = run(&tmp.path().join("missing.json"), &tmp.path().join("m"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_three_with_module_name() {
    let tmp = tempfile::tempdir().unwrap();
    // Without fields the Ising ground state is doubly degenerate.
    let cfg = write_config(
        tmp.path(),
        "degenerate.json",
        r#"{
        "hbar": 1.0, "duration": 1.0,
        "system": {"type": "tfim_chain", "n_sites": 3, "coupling": 1.0,
                   "g_start": 0.0, "g_end": 1.0, "h_start": 0.0, "h_end": 0.0},
        "method": {"type": "exact_cd"}
    }"#,
    );
    let out = tmp.path().join("out");
    let o = run(&cfg, &out);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(
        stderr(&o).contains("shortcut_forge::spectral"),
        "{}",
        stderr(&o)
    );
    assert!(!out.exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "r.json",
        &random_config(3, r#"{"type": "variational"}"#),
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&cfg, &a).status.success());
    assert!(run(&cfg, &b).status.success());
    for f in ["timeseries.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn comparing_a_run_with_itself_shows_zero_differences() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "lz.json", LZ_EXACT);
    let out = tmp.path().join("out");
    assert!(run(&cfg, &out).status.success());
    let p = out.to_str().unwrap();
    let o = shortcut_forge(&["compare", p, p], None);
    assert_eq!(o.status.code(), Some(0));
    let report = String::from_utf8(o.stdout).unwrap();
    let diffs: Vec<&str> = report
        .lines()
        .filter(|l| l.contains("max_abs_diff"))
        .collect();
    assert!(!diffs.is_empty());
    assert!(
        diffs
            .iter()
            .all(|l| l.contains("max_abs_diff 0.0000000000000000e0")),
        "{report}"
    );
}

#[test]
fn variational_and_krylov_agree_on_one_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let va = write_config(
        tmp.path(),
        "v.json",
        &random_config(5, r#"{"type": "variational"}"#),
    );
    let kr = write_config(
        tmp.path(),
        "k.json",
        &random_config(5, r#"{"type": "krylov"}"#),
    );
    let (a, b) = (tmp.path().join("v"), tmp.path().join("k"));
    assert!(run(&va, &a).status.success());
    assert!(run(&kr, &b).status.success());
    let o = shortcut_forge(&["compare", a.to_str().unwrap(), b.to_str().unwrap()], None);
    let report = String::from_utf8(o.stdout).unwrap();
    assert_eq!(o.status.code(), Some(0), "{report}");
    assert!(report.contains("cd_im_0_1"));
}

#[test]
fn different_seeds_are_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    let c1 = write_config(
        tmp.path(),
        "1.json",
        &random_config(1, r#"{"type": "krylov"}"#),
    );
    let c2 = write_config(
        tmp.path(),
        "2.json",
        &random_config(2, r#"{"type": "krylov"}"#),
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&c1, &a).status.success());
    assert!(run(&c2, &b).status.success());
    let o = shortcut_forge(&["compare", a.to_str().unwrap(), b.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stdout)
        .unwrap()
        .contains("scenario mismatch"));
}

#[test]
fn sweep_writes_ordered_runs_independent_of_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "lz.json", LZ_EXACT);
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = tmp.path().join(format!("sweep{threads}"));
        let o = shortcut_forge(
            &[
                "sweep",
                cfg.to_str().unwrap(),
                "--param",
                "system.delta",
                "--values",
                "0.5,1,2",
                "--out",
                out.to_str().unwrap(),
            ],
            Some(threads),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(out);
    }
    let index = fs::read_to_string(outputs[0].join("sweep.csv")).unwrap();
    assert_eq!(
        index,
        fs::read_to_string(outputs[1].join("sweep.csv")).unwrap()
    );
    assert_eq!(index.lines().count(), 4);
    assert!(index.starts_with("index,value,final_fidelity,config_hash\n"));
    for i in 0..3 {
        let run = format!("run_{i:03}");
        for f in ["timeseries.csv", "summary.json"] {
            assert_eq!(
                fs::read(outputs[0].join(&run).join(f)).unwrap(),
                fs::read(outputs[1].join(&run).join(f)).unwrap()
            );
        }
    }
    let (first, _) = read_run(&outputs[0].join("run_000")).unwrap();
    let (last, _) = read_run(&outputs[0].join("run_002")).unwrap();
    assert_eq!(first.scenario_hash.len(), 64);
    assert_ne!(first.scenario_hash, last.scenario_hash);
}

#[test]
fn sweep_rejects_bad_values_before_running() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "lz.json", LZ_EXACT);
    let out = tmp.path().join("sweep");
    let args = |param: &'static str, values: &'static str| {
        vec![
            "sweep".to_string(),
            cfg.to_str().unwrap().to_string(),
            "--param".into(),
            param.into(),
            "--values".into(),
            values.into(),
            "--out".into(),
            out.to_str().unwrap().to_string(),
        ]
    };
    for (param, values) in [
        ("system.delta", "1,0"),
        ("system.colour", "1"),
        ("nope.delta", "1"),
    ] {
        let a = args(param, values);
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        let o = shortcut_forge(&a, None);
        assert_eq!(o.status.code(), Some(2), "{param}={values}: {}", stderr(&o));
        assert!(!out.exists());
    }
    let a = args("system.delta", "1");
    let a: Vec<&str> = a.iter().map(String::as_str).collect();
    let o = shortcut_forge(&a, Some("0"));
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}
