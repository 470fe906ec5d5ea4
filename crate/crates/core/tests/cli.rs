use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cone-sobolev")).args(args).output().expect("binary runs")
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timestamp(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

#[test]
fn constant_reports_the_sharp_norm() {
    let out = run(&["constant", "--cone", "halfplane-x1", "--p", "1", "--q", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let norm = v["outputs"]["embedding_norm"].as_f64().unwrap();
    assert!((norm - 0.5 * 1.5f64.powf(1.0 / 3.0)).abs() < 1e-12);
    assert_eq!(v["pass"], Value::Bool(true));
    assert_eq!(v["config"]["seed"], 0);
    assert_eq!(v["config"]["options"]["quadrature"], "product");
}

#[test]
fn monte_carlo_constant_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for path in [&a, &b] {
        let out = run(&[
            "constant",
            "--cone",
            "quadrant-x1x2",
            "--quadrature",
            "monte-carlo",
            "--samples",
            "200000",
            "--seed",
            "9",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (ra, rb) = (report(&a), report(&b));
    assert_eq!(ra["outputs"]["estimate"]["config_echo"]["seed"], 9);
    let mut rb = without_timestamp(rb);
    rb["config"]["out"] = ra["config"]["out"].clone();
    assert_eq!(without_timestamp(ra), rb);
}

#[test]
fn bernstein_example_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let system = dir.path().join("system.json");
    let args = [
        "bernstein",
        "--m",
        "6",
        "--lambda-frac",
        "0.9",
        "--eps1",
        "0.05",
        "--eps2",
        "0.05",
        "--alpha-trials",
        "1000",
        "--out",
        path.to_str().unwrap(),
        "--system-out",
        system.to_str().unwrap(),
    ];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let first = report(&path);
    assert!(first["verdicts"].as_object().unwrap().values().all(|v| v == &Value::Bool(true)));
    let e = first["outputs"]["embedding_norm"].as_f64().unwrap();
    let bound = first["outputs"]["lower_bound"]["bound"].as_f64().unwrap();
    assert!((bound - (0.9 * e / 1.05 - 0.05)).abs() < 1e-14);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(&system).unwrap()).unwrap();
    assert_eq!(saved["shells"].as_array().unwrap().len(), 6);

    let out = run(&args);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(without_timestamp(first), without_timestamp(report(&path)));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"command": "alvino", "cone": "quadrant-x1x2", "p": 2.0, "q": 1.0, "seed": 4,
            "options": {"ratios": [10.0, 1000.0]}}"#,
    )
    .unwrap();
    let out = run(&["alvino", "--config", cfg.to_str().unwrap(), "--q", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["cone"], "quadrant-x1x2");
    assert_eq!(v["config"]["p"], 2.0);
    assert_eq!(v["config"]["q"], 2.0);
    assert_eq!(v["config"]["seed"], 4);
    assert_eq!(v["config"]["options"]["ratios"], serde_json::json!([10.0, 1000.0]));

    let wrong = run(&["quotient", "--config", cfg.to_str().unwrap()]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn inline_cone_spec_in_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"cone": {"d": 3, "exponents": [{"axis": 3, "power": 2.0}]}}"#).unwrap();
    let out = run(&["constant", "--config", cfg.to_str().unwrap(), "--p", "2", "--q", "1.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outputs"]["big_d"], 5.0);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["constant", "--cone", "cylinder"]).status.code(), Some(2));
    assert_eq!(run(&["constant", "--p", "7"]).status.code(), Some(2));
    assert_eq!(run(&["constant", "--p", "1", "--q", "2"]).status.code(), Some(2));
    assert_eq!(run(&["bernstein", "--lambda-frac", "1.2"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let mutated = run(&["polya-szego", "--grid", "24", "--fields", "2", "--mode", "unsorted"]);
    assert_eq!(mutated.status.code(), Some(1));
    let underflow =
        run(&["bernstein", "--p", "2", "--q", "1.5", "--m", "6", "--directions", "10", "--alpha-trials", "10"]);
    assert_eq!(underflow.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&underflow.stderr).contains("resource"));
}

#[test]
fn norm_of_steps_and_rearrangement_export() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("f.csv");
    let sorted = dir.path().join("sorted.csv");
    std::fs::write(&csv, "t,value\n1,0.5\n1.5,3\n4,1\n").unwrap();
    let out = run(&[
        "norm",
        "--steps",
        csv.to_str().unwrap(),
        "--p",
        "3",
        "--q",
        "2",
        "--rearrangement-csv",
        sorted.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdicts"]["formulas_agree"], true);
    assert_eq!(std::fs::read_to_string(&sorted).unwrap(), "t,value\n0.5,3\n3,1\n4,0.5\n");
}

#[test]
fn quotient_of_profile_file() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("u.json");
    std::fs::write(
        &profile,
        r#"{"cone": {"d": 2, "exponents": [{"axis": 1, "power": 1.0}]},
            "segments": [{"t0": 0.0, "t1": 2.0, "law": "affine", "params": [1.0, -0.5]}]}"#,
    )
    .unwrap();
    let out = run(&["quotient", "--profile", profile.to_str().unwrap(), "--p", "1.5", "--q", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["outputs"]["ratio"].as_f64().unwrap() < 1.0);
    let clash = run(&["quotient", "--profile", profile.to_str().unwrap(), "--cone", "plane"]);
    assert_eq!(clash.status.code(), Some(2));
}

#[test]
fn polya_szego_with_chain_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    let out = run(&[
        "polya-szego",
        "--grid",
        "32",
        "--fields",
        "3",
        "--chain-points",
        "4",
        "--p",
        "2",
        "--q",
        "1",
        "--curve-csv",
        curve.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["outputs"]["reports"].as_array().unwrap().len(), 3);
    assert_eq!(v["outputs"]["chain"].as_array().unwrap().len(), 4);
    assert!(std::fs::read_to_string(&curve).unwrap().starts_with("t,value\n"));
}

#[test]
fn selftest_subset() {
    let out = run(&["selftest", "--criteria", "2,4,8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdicts"].as_object().unwrap().len(), 3);
}
