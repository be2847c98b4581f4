mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qutaylor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qutaylor")).args(args).output().unwrap()
}

fn write_config(dir: &Path, extra: &str) -> String {
    let paths = common::write_inputs(&dir.join("data"), 5);
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, common::config_text(&paths, &dir.join("out"), extra)).unwrap();
    cfg.to_string_lossy().into_owned()
}

#[test]
fn success_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let out = qutaylor(&["estimate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("reproducibility hash"));
    assert!(dir.path().join("out/var_coefficients.csv").exists());
    assert!(!dir.path().join("out/implied_tau.csv").exists());
}

#[test]
fn output_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let alt = dir.path().join("alt");
    let out = qutaylor(&["prepare", "-c", &cfg, "-o", alt.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(alt.join("panel.csv").exists());
}

#[test]
fn config_error_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "beta = 2\n");
    assert_eq!(qutaylor(&["rule", "-c", &cfg]).status.code(), Some(1));
    let missing = dir.path().join("nope.cfg");
    assert_eq!(qutaylor(&["rule", "-c", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn data_error_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "window = 1950Q1:2025Q2\n");
    let out = qutaylor(&["prepare", "-c", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("stage prepare") && stderr.contains("1950Q1"), "{stderr}");
    assert!(dir.path().join("out/FAILED").exists());
}

#[test]
fn numerical_error_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let paths = common::write_inputs_with(&dir.path().join("data"), 5, |_, _| 3.0);
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, common::config_text(&paths, &dir.path().join("out"), "")).unwrap();
    let out = qutaylor(&["estimate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank deficient"));
}
