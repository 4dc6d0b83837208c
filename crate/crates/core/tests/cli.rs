use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn silevy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_silevy"))
        .args(args)
        .env_remove("SILEVY_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SIMULATE: &str = r#"{
    "process": {"triplet": {"sigma": 1.0, "gamma": 0.5, "nu": {"type": "compound", "rate": 2.0, "marks": {"type": "normal", "mean": 0.0, "sd": 1.0}}}, "dim": 2, "level": 3},
    "regions": [{"u0": [1.0, 1.0]}, {"u0": [0.5, 1.0], "sub": [[0.25, 0.5]]}],
    "paths": 50
}"#;

#[test]
fn brownian_core_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = silevy(&["verify", "--suite", "brownian-core", "--seed", "42", "--out", out]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("brownian-core.json")).unwrap()).unwrap();
    let passing = report["tests"].as_array().unwrap().iter().filter(|t| t["pass"] == true).count();
    assert!(passing >= 6);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 42);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn negative_sigma_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"process": {"triplet": {"sigma": -1, "gamma": 0, "nu": {"type": "none"}}, "dim": 2, "level": 3}}"#,
    );
    let run = silevy(&["simulate", "--config", &config, "--seed", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("sigma"));
}

#[test]
fn unknown_keys_and_missing_seed_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = write_config(dir.path(), r#"{"paths": 10, "colour": "red"}"#);
    let run = silevy(&["verify", "--config", &bad, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("colour"));

    let config = write_config(dir.path(), SIMULATE);
    let run = silevy(&["simulate", "--config", &config, "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&run.stderr).contains("seed"));

    let run = silevy(&["verify", "--suite", "nope", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn unaligned_region_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        &SIMULATE.replace(r#"{"u0": [1.0, 1.0]}"#, r#"{"u0": [0.3, 1.0]}"#),
    );
    let run = silevy(&["simulate", "--config", &config, "--seed", "1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SIMULATE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let run = silevy(&["simulate", "--config", &config, "--seed", "9", "--out", out.to_str().unwrap(), "--threads", threads]);
        assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    }
    for name in ["increments.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(a.join("increments.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("path,region,increment"));
    assert_eq!(csv.lines().count(), 1 + 50 * 2);
}

#[test]
fn project_kernel_check_and_decompose_write_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SIMULATE);
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();

    let run = silevy(&["project", "--config", &config, "--seed", "3", "--out", o]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let csv = fs::read_to_string(out.join("projection.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 50 * 17);

    let run = silevy(&["kernel-check", "--config", &config, "--out", o]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("kernel-check.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);

    let run = silevy(&["decompose", "--config", &config, "--seed", "3", "--out", o]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let reports: Value = serde_json::from_str(&fs::read_to_string(out.join("decompose.json")).unwrap()).unwrap();
    assert!(reports[0]["reconstruction_error"].as_f64().unwrap() < 1e-12);
}

#[test]
fn failing_kernel_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"process": {"triplet": {"sigma": 1.0, "gamma": 0.0, "nu": {"type": "none"}}, "dim": 2, "level": 3},
            "tolerances": {"kernel_tol": 1e-300}, "volumes": [[0.5, 0.25]]}"#,
    );
    let run = silevy(&["kernel-check", "--config", &config, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1), "{}", String::from_utf8_lossy(&run.stderr));
}
