//! End-to-end tests of the binary: exit codes, option precedence, and the
//! determinism guarantee (same seed + config => byte-identical reports).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_micsel"))
}

fn tmpdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("micsel-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_small_dataset(dir: &Path) -> (PathBuf, PathBuf) {
    // y = 2 * x1 with a deterministic wiggle; 12 rows, 3 features.
    let mut x = String::new();
    let mut y = String::new();
    for i in 0..12 {
        let a = (i as f64 * 0.7).sin();
        let b = (i as f64 * 1.3).cos();
        let c = (i as f64 * 0.37).sin() * (i as f64 * 0.11).cos();
        x.push_str(&format!("{a},{b},{c}\n"));
        y.push_str(&format!("{}\n", 2.0 * b + 0.01 * a));
    }
    let x_path = dir.join("x.csv");
    let y_path = dir.join("y.csv");
    fs::write(&x_path, x).unwrap();
    fs::write(&y_path, y).unwrap();
    (x_path, y_path)
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn no_args_prints_usage_with_code_2() {
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr);
    assert!(text.contains("Usage"), "stderr: {text}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = bin().args(["select", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_is_a_runtime_error() {
    let dir = tmpdir("missing");
    let (_, y) = write_small_dataset(&dir);
    let out = bin()
        .args(["select", "--x", "/definitely/not/here.csv", "--y"])
        .arg(&y)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn select_runs_and_reports_support() {
    let dir = tmpdir("select");
    let (x, y) = write_small_dataset(&dir);
    let out = bin()
        .args(["select", "--scheme", "partial-mic", "--bpc", "2"])
        .arg("--X")
        .arg(&x)
        .arg("--Y")
        .arg(&y)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["params"]["scheme"], "partial-mic");
    assert_eq!(report["params"]["bpc"], 2.0);
    // Feature 1 drives the response.
    let support = report["support"].as_array().unwrap();
    assert!(support.iter().any(|t| t["feature"] == 1));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn cli_flag_overrides_config_file() {
    let dir = tmpdir("precedence");
    let (x, y) = write_small_dataset(&dir);
    let config = dir.join("config.json");
    fs::write(&config, r#"{"bpc": 0.1, "scheme": "full-mic"}"#).unwrap();

    // Config alone applies.
    let out = bin()
        .args(["select", "--x"])
        .arg(&x)
        .arg("--y")
        .arg(&y)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["params"]["bpc"], 0.1);
    assert_eq!(report["params"]["scheme"], "full-mic");

    // Flag wins over the file.
    let out = bin()
        .args(["select", "--bpc", "2", "--x"])
        .arg(&x)
        .arg("--y")
        .arg(&y)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["params"]["bpc"], 2.0);

    // Environment sits between flag and file.
    let out = bin()
        .args(["select", "--x"])
        .arg(&x)
        .arg("--y")
        .arg(&y)
        .arg("--config")
        .arg(&config)
        .env("MICSEL_BPC", "1.5")
        .output()
        .unwrap();
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["params"]["bpc"], 1.5);
    fs::remove_dir_all(dir).ok();
}

#[test]
fn unknown_config_key_is_named() {
    let dir = tmpdir("unknown-key");
    let (x, y) = write_small_dataset(&dir);
    let config = dir.join("config.json");
    fs::write(&config, r#"{"bqc": 0.1}"#).unwrap();
    let out = bin()
        .args(["select", "--x"])
        .arg(&x)
        .arg("--y")
        .arg(&y)
        .arg("--config")
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bqc"));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn out_of_range_value_names_the_key() {
    let dir = tmpdir("bad-value");
    let (x, y) = write_small_dataset(&dir);
    let out = bin()
        .args(["select", "--scheme", "lasso", "--x"])
        .arg(&x)
        .arg("--y")
        .arg(&y)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scheme"));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn generate_writes_dataset_files() {
    let dir = tmpdir("generate");
    let out_dir = dir.join("ds");
    let out = bin()
        .args([
            "generate",
            "--scenario",
            "partial",
            "--m",
            "30",
            "--h",
            "8",
            "--n",
            "25",
            "--test-size",
            "10",
            "--seed",
            "5",
            "--binarize",
            "--out-dir",
        ])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "x_train.csv",
        "y_train.csv",
        "x_test.csv",
        "y_test.csv",
        "y_train_binary.csv",
        "beta_true.csv",
        "manifest.json",
    ] {
        assert!(out_dir.join(name).exists(), "{name} missing");
    }
    // beta_true triples have the 4 shared features with the documented
    // coverage pattern (h = 8 -> 8, 6, 4, 2).
    let beta = fs::read_to_string(out_dir.join("beta_true.csv")).unwrap();
    let count = |f: usize| beta.lines().filter(|l| l.starts_with(&format!("{f},"))).count();
    assert_eq!(count(0), 8);
    assert_eq!(count(1), 6);
    assert_eq!(count(2), 4);
    assert_eq!(count(3), 2);
    fs::remove_dir_all(dir).ok();
}

#[test]
fn acceptance_criterion_8_byte_identical_reruns() {
    // Determinism: the same seed and config produce byte-identical JSON for
    // every command that involves randomness, and reports carry no
    // timestamps.
    let dir = tmpdir("determinism");
    let plan_path = dir.join("plan.json");
    fs::write(
        &plan_path,
        serde_json::json!({
            "generator": {
                "source": "scenario",
                "kind": "partial",
                "m": 40, "h": 4, "n": 50,
                "seed": 0
            },
            "methods": [
                {"kind": "stepwise", "scheme": "partial-mic"},
                {"kind": "bonferroni", "alpha": 0.05},
                {"kind": "bonf-mic", "scheme": "partial-mic"}
            ],
            "replicates": 3,
            "test_size": 200,
            "seed": 11,
            "threads": 2
        })
        .to_string(),
    )
    .unwrap();

    let run = |out_path: &Path| {
        let out = bin()
            .args(["experiment", "--plan"])
            .arg(&plan_path)
            .arg("--out")
            .arg(out_path)
            .output()
            .unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        fs::read(out_path).unwrap()
    };
    let a = run(&dir.join("a.json"));
    let b = run(&dir.join("b.json"));
    assert_eq!(a, b, "experiment reruns differ");

    // Same for the selection command on generated CSVs.
    let ds = dir.join("ds");
    let gen = bin()
        .args([
            "generate", "--scenario", "full", "--m", "20", "--h", "3", "--n", "30", "--seed",
            "9", "--out-dir",
        ])
        .arg(&ds)
        .output()
        .unwrap();
    assert_eq!(gen.status.code(), Some(0));
    let select = |path: &Path| {
        let out = bin()
            .args(["select", "--x"])
            .arg(ds.join("x_train.csv"))
            .arg("--y")
            .arg(ds.join("y_train.csv"))
            .arg("--seed")
            .arg("3")
            .arg("--out")
            .arg(path)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        fs::read(path).unwrap()
    };
    let sa = select(&dir.join("sa.json"));
    let sb = select(&dir.join("sb.json"));
    assert_eq!(sa, sb, "selection reruns differ");
    println!("PASS criterion 8: byte-identical reports across reruns");
    fs::remove_dir_all(dir).ok();
}

#[test]
fn experiment_csv_format_renders_table() {
    let dir = tmpdir("expcsv");
    let plan_path = dir.join("plan.json");
    fs::write(
        &plan_path,
        serde_json::json!({
            "generator": {"source": "scenario", "kind": "full", "m": 20, "h": 2, "n": 40, "seed": 0},
            "methods": [{"kind": "true-model"}, {"kind": "bh", "alpha": 0.1}],
            "replicates": 2,
            "test_size": 100,
            "seed": 1
        })
        .to_string(),
    )
    .unwrap();
    let out = bin()
        .args(["experiment", "--format", "csv", "--plan"])
        .arg(&plan_path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_str(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3, "expected header + 2 method rows: {text}");
    assert!(lines[1].starts_with("true-model"));
    assert!(lines[2].starts_with("bh(alpha=0.1)"));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn sweep_command_picks_a_grid_point() {
    let dir = tmpdir("sweep");
    let plan_path = dir.join("sweep.json");
    fs::write(
        &plan_path,
        serde_json::json!({
            "plan": {
                "generator": {"source": "scenario", "kind": "independent", "m": 30, "h": 3, "n": 60, "seed": 0},
                "methods": [],
                "replicates": 2,
                "test_size": 0,
                "seed": 7
            },
            "reference": {"kind": "bonf-mic", "scheme": "partial-mic"},
            "sweep": {
                "template": {"kind": "bonferroni", "alpha": 0.05},
                "param": "alpha",
                "grid": [0.01, 0.05, 0.2]
            }
        })
        .to_string(),
    )
    .unwrap();
    let out = bin().args(["sweep", "--plan"]).arg(&plan_path).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let chosen = report["metrics"]["chosen"].as_f64().unwrap();
    assert!([0.01, 0.05, 0.2].contains(&chosen));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn test_command_reports_procedure() {
    let dir = tmpdir("test-cmd");
    let ds = dir.join("ds");
    let gen = bin()
        .args([
            "generate", "--scenario", "full", "--m", "25", "--h", "4", "--n", "60", "--seed",
            "2", "--out-dir",
        ])
        .arg(&ds)
        .output()
        .unwrap();
    assert_eq!(gen.status.code(), Some(0));
    let out = bin()
        .args(["test", "--method", "bh", "--alpha", "0.05", "--x"])
        .arg(ds.join("x_train.csv"))
        .arg("--y")
        .arg(ds.join("y_train.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(report["method"], "bh(alpha=0.05)");
    assert!(report["metrics"]["n_coeff_selected"].as_u64().unwrap() > 0);
    fs::remove_dir_all(dir).ok();
}
