use std::path::Path;
use std::process::{Command, Output};

fn dynfpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynfpa")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{
  "params": {"n": 3, "T": 2000, "epsilon": 0.3, "delta": 0.3, "rho": 0.0060025},
  "distribution": {"kind": "uniform", "lo": 0, "hi": 1},
  "agents": [
    {"id": 0, "kind": "lookahead"},
    {"id": 1, "kind": "myopic"},
    {"id": 2, "kind": "expert", "expert": "zero"}
  ],
  "seed": 11,
  "replications": 8
}"#;

#[test]
fn inspect_prints_uniform_scalars() {
    let out = dynfpa(&[
        "inspect",
        "--dist",
        r#"{"kind":"uniform","lo":0,"hi":1}"#,
        "--m",
        "2",
        "--n",
        "3",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["q"].as_f64().unwrap(), 0.5);
    assert!((v["q_dagger"].as_f64().unwrap() - 0.75).abs() < 1e-9);
    assert!((v["theta"].as_f64().unwrap() - 0.375).abs() < 1e-9);
    assert!((v["p"].as_f64().unwrap() - 0.625).abs() < 1e-9);
    assert!((v["rev_mye"].as_f64().unwrap() - 17.0 / 32.0).abs() < 1e-9);
}

#[test]
fn simulate_writes_one_summary_row_per_replication() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = dynfpa(&[
        "simulate",
        "--config",
        &cfg,
        "--seed",
        "5",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rows = csv::Reader::from_path(out_dir.join("summary.csv")).unwrap();
    let labels: Vec<String> = rows.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(labels.len(), 9);
    assert_eq!(labels.last().unwrap(), "aggregate");
    for rep in 0..8 {
        assert!(out_dir.join(format!("trajectory_{rep}.jsonl")).exists());
    }
    assert!(out_dir.join("epochs.csv").exists());
}

#[test]
fn bounds_reports_epoch_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dynfpa(&["bounds", "--config", &cfg]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["H"], 54);
    assert_eq!(v["report"]["n_soph"], 1);
    assert_eq!(v["report"]["n_naive"], 2);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(dynfpa(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"params": {"n": 0}}"#);
    let out = dynfpa(&["bounds", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let out = dynfpa(&["verify", "--suite", "no-such-suite", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_exit_status_follows_the_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dynfpa(&["verify", "--suite", "myerson-oracle", "--config", &cfg]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout)
        .lines()
        .all(|l| l.starts_with("PASS")));

    // Ten rounds never complete an epoch, so the floor check has nothing to test.
    let short = SMALL.replace(r#""T": 2000"#, r#""T": 10"#);
    let cfg = write_config(dir.path(), &short);
    let out = dynfpa(&["verify", "--suite", "lemma-b1", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL completed epochs"));
}
