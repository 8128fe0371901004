use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critmorse")).args(args).output().unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn saddle_under_negative_ma_gate_passes_with_index_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--gallery", "quad-saddle", "--gate", "ma-neg", "--delta", "0.5", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["verdict"], "pass");
    assert_eq!(r["metrics"]["index"], 1.0);
    assert_eq!(r["histogram"].as_object().unwrap().keys().collect::<Vec<_>>(), ["1"]);
    assert_eq!(r["parameters"]["delta"], 0.5);
    assert_eq!(r["parameters"]["gate"], "ma-neg");
    assert!(dir.path().join("index.svg").exists() && dir.path().join("det.svg").exists());
}

#[test]
fn lewicka_reports_a_violated_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--gallery", "lewicka", "--delta", "0.01", "--strict", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path());
    assert_eq!(r["verdict"], "hypothesis-violated");
    assert_eq!(r["histogram"].as_object().unwrap().keys().collect::<Vec<_>>(), ["0", "2"]);
    assert_eq!(r["hypothesis"]["ma"], false);
}

#[test]
fn strict_mode_turns_a_failure_into_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["verify", "--gallery", "quad-saddle", "--check", "gate", "--delta", "0.5", "--out", &out_arg(dir.path())];
    assert_eq!(run(&args).status.code(), Some(0));
    assert_eq!(report(dir.path())["verdict"], "fail");
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(run(&strict).status.code(), Some(1));
}

#[test]
fn punctured_grid_homology() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["homology", "--shape", "9,9", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), r#"{"betti":[0,0,1],"torsion":[[],[],[]]}"#);
    assert_eq!(report(dir.path())["homology"]["betti"], serde_json::json!([0, 0, 1]));
}

#[test]
fn usage_and_input_errors_exit_two_without_a_backtrace() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--gallery", "quad-min", "--delta", "zero"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--delta"));

    let out = run(&["index", "--gallery", "no-such-entry", "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let bad = dir.path().join("bad.cmf");
    std::fs::write(&bad, "critmorse-field v1\ndim=2 kind=scalar\nshape=3,3\nbounds=0,1;0,1\nencoding=csv\n1\n2\n").unwrap();
    let out = run(&["index", "--input", bad.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("value count mismatch"), "{err}");
    assert!(!err.contains("backtrace") && !err.contains("panicked"), "{err}");
}

#[test]
fn sampled_fields_feed_back_into_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    assert!(run(&["sample", "--gallery", "quad-max", "--shape", "17,17", "--encoding", "f64le", "--out", &out]).status.success());
    let input = dir.path().join("field.cmf");
    let sub = dir.path().join("idx");
    assert!(run(&["index", "--input", input.to_str().unwrap(), "--out", sub.to_str().unwrap()]).status.success());
    let r = report(&sub);
    assert_eq!(r["metrics"]["index"], 2.0);
    assert_eq!(r["parameters"]["input"], input.to_str().unwrap());
}

#[test]
fn flow_writes_one_csv_per_start() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "flow", "--gallery", "quad-min", "--start", "0.5,0", "--start", "-0.25,0.5", "--level", "0.02", "--out", &out_arg(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("trajectory_1.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,u\n"));
    let r = report(dir.path());
    assert_eq!(r["verdict"], "pass");
    assert_eq!(r["histogram"]["reached_level"], 2);
    let end = r["trajectories"][0]["end_value"].as_f64().unwrap();
    assert!((end - 0.02).abs() < 1e-6, "{end}");
}
