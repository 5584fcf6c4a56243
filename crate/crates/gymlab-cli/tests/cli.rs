//! End-to-end checks of the `gymlab` binary: exit codes, report files,
//! and byte-identical determinism for a fixed seed.

use gymlab::gym::lift_measure;
use gymlab::{io, SpaceModel};
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gymlab"))
}

fn workdir(label: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("gymlab-cli-{label}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn validate_scenario_passes_on_wellformed_file() {
    let dir = workdir("validate");
    let space = SpaceModel::interval(0.0, 1.0, 4).unwrap();
    let mu = lift_measure(&gymlab::sample::random_measure(&space, 1, 3).unwrap()).unwrap();
    write(&dir.join("mu.json"), &io::gym_to_json(&mu).unwrap());
    write(
        &dir.join("scenario.json"),
        r#"{
  "schema": "scenario.v1",
  "command": "validate",
  "inputs": { "gym": "mu.json" },
  "params": { "seed": "0" }
}"#,
    );
    let status = bin()
        .args(["validate", "--scenario"])
        .arg(dir.join("scenario.json"))
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert!(status.success());
    let report = std::fs::read_to_string(dir.join("out/report.csv")).unwrap();
    assert!(report.starts_with("cell,lambda,defect"));
    assert_eq!(report.lines().count(), 5); // header + one row per cell
    let verdict = std::fs::read_to_string(dir.join("out/verdict.json")).unwrap();
    assert!(verdict.contains("\"status\": \"pass\""));
}

#[test]
fn pair_scenario_with_mismatched_battery_exits_two() {
    let dir = workdir("pair-mismatch");
    let space = SpaceModel::interval(0.0, 1.0, 2).unwrap();
    let mu = lift_measure(&gymlab::sample::random_measure(&space, 1, 5).unwrap()).unwrap();
    write(&dir.join("mu.json"), &io::gym_to_json(&mu).unwrap());
    // A two-dimensional linear member against a one-dimensional measure.
    write(
        &dir.join("scenario.json"),
        r#"{
  "schema": "scenario.v1",
  "command": "pair",
  "inputs": { "gym": "mu.json" },
  "battery": { "members": [
    { "kind": "linear",
      "a": { "kind": "const", "values": ["0.5", "0.5"] },
      "b": { "kind": "const", "value": "0" } }
  ] },
  "params": { "seed": "0" }
}"#,
    );
    let output = bin()
        .args(["pair", "--scenario"])
        .arg(dir.join("scenario.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn scenario_parse_error_exits_two() {
    let dir = workdir("parse-error");
    write(&dir.join("scenario.json"), "{ \"schema\": \"scenario.v1\" ");
    let output = bin()
        .args(["pair", "--scenario"])
        .arg(dir.join("scenario.json"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!output.stderr.is_empty());
}

#[test]
fn derivative_scenario_reproduces_square_wave_counterexample() {
    let dir = workdir("derivative");
    write(
        &dir.join("scenario.json"),
        r#"{
  "schema": "scenario.v1",
  "command": "derivative",
  "battery": { "builtin": 12, "dim_xi": 1 },
  "params": {
    "seed": "0",
    "t0": "1",
    "tol": "0.01",
    "schedule": ["0.125", "0.0625", "0.03125", "0.015625", "0.0078125",
                 "0.00390625", "0.001953125", "0.0009765625"],
    "oracle": {
      "builtin": "square_wave_path",
      "space": { "kind": "interval", "lo": "-1", "hi": "1", "cells": 2000 },
      "res": 4194304
    }
  }
}"#,
    );
    let status = bin()
        .args(["derivative", "--scenario"])
        .arg(dir.join("scenario.json"))
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert!(status.success());
    let verdict = std::fs::read_to_string(dir.join("out/verdict.json")).unwrap();
    assert!(verdict.contains("\"status\": \"pass\""));
    // The estimated derivative is written out and reloads as a measure with
    // per-cell two-point oscillation statistics.
    let estimate =
        io::gym_from_json(&std::fs::read_to_string(dir.join("out/derivative.gym.json")).unwrap())
            .unwrap();
    assert!(estimate.validate().passes());
    let plus = gymlab::HomFn::positive_part(gymlab::HomFn::linear_const(vec![1.0], 0.0));
    assert!((estimate.pair(&plus).unwrap() - 1.0).abs() <= 5e-3);
}

#[test]
fn suite_is_deterministic_and_detects_zero_tolerance() {
    let dir = workdir("suite");
    write(
        &dir.join("scenario.json"),
        r#"{
  "schema": "scenario.v1",
  "command": "suite",
  "params": { "seed": "0" }
}"#,
    );
    let status = bin()
        .args(["suite", "--scenario"])
        .arg(dir.join("scenario.json"))
        .arg("--out")
        .arg(dir.join("out1"))
        .status()
        .unwrap();
    assert!(status.success());
    let status = bin()
        .args(["suite", "--scenario"])
        .arg(dir.join("scenario.json"))
        .arg("--out")
        .arg(dir.join("out2"))
        .status()
        .unwrap();
    assert!(status.success());
    let a = std::fs::read(dir.join("out1/report.csv")).unwrap();
    let b = std::fs::read(dir.join("out2/report.csv")).unwrap();
    assert_eq!(a, b, "suite CSV must be byte-identical for a fixed seed");

    // Zero tolerance scale: residuals are listed and the suite fails.
    write(
        &dir.join("zero.json"),
        r#"{
  "schema": "scenario.v1",
  "command": "suite",
  "params": { "seed": "0", "tolerance_scale": "0" }
}"#,
    );
    let output = bin()
        .args(["suite", "--scenario"])
        .arg(dir.join("zero.json"))
        .arg("--out")
        .arg(dir.join("out-zero"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    let report = std::fs::read_to_string(dir.join("out-zero/report.csv")).unwrap();
    assert!(report.contains("fail"));
}
