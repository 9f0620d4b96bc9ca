use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_bec-lab");

fn bec_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

/// Path of the report printed by a run command.
fn report_path(dir: &Path, out: &Output) -> PathBuf {
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().next().expect("run prints its report path");
    dir.join(line.split_whitespace().nth(1).unwrap())
}

const SCATTERING: &str = r#"{
    "problem": {"pair_potential": {"soft_sphere": {"height": 10.0, "radius": 1.0}}},
    "experiment": {"scattering": {"tol": 1e-12}},
    "reproducible": true
}"#;

const SMALL_GP: &str = r#"{
    "problem": {
        "trap": {"dimension": 3, "kind": {"harmonic": {"stiffness": [1.0, 1.0, 1.0]}}},
        "grid": {"dimension": 3, "extent": [[-8.0, 8.0], [-8.0, 8.0], [-8.0, 8.0]], "points": [41, 41, 41]}
    },
    "experiment": {"gp": {"g": 2.0, "tol": 1e-7}},
    "reproducible": true
}"#;

const SMALL_SWEEP: &str = r#"{
    "problem": {
        "trap": {"dimension": 3, "kind": {"harmonic": {"stiffness": [1.0, 1.0, 1.0]}}},
        "pair_potential": {"soft_sphere": {"height": 0.00015094140483250642, "radius": 34.53282109590457}},
        "grid": {"dimension": 3, "extent": [[-7.0, 7.0], [-7.0, 7.0], [-7.0, 7.0]], "points": [41, 41, 41]}
    },
    "experiment": {"sweep": {"n_list": [2, 3, 4], "g": 0.5, "truncation": {"max_quanta": 2}}},
    "reproducible": true
}"#;

#[test]
fn cache_hit_serves_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "s.json", SCATTERING);
    let first = bec_lab(dir.path(), &["scattering", "--config", "s.json"]);
    assert_eq!(
        code(&first),
        0,
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let path = report_path(dir.path(), &first);
    let bytes = fs::read(&path).unwrap();
    let second = bec_lab(dir.path(), &["scattering", "--config", "s.json"]);
    assert_eq!(code(&second), 0);
    assert!(String::from_utf8_lossy(&second.stdout).contains("(cached)"));
    assert_eq!(fs::read(&path).unwrap(), bytes);
    assert!(!dir.path().join("out/.lock").exists());
}

#[test]
fn forced_reproducible_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "s.json", SCATTERING);
    let first = bec_lab(
        dir.path(),
        &["scattering", "--config", "s.json", "--out", "o"],
    );
    let run_dir = report_path(dir.path(), &first)
        .parent()
        .unwrap()
        .to_path_buf();
    let snapshot: Vec<Vec<u8>> = ["report.json", "manifest.json", "config.json"]
        .iter()
        .map(|f| fs::read(run_dir.join(f)).unwrap())
        .collect();
    let again = bec_lab(
        dir.path(),
        &["scattering", "--config", "s.json", "--out", "o", "--force"],
    );
    assert_eq!(code(&again), 0);
    assert!(!String::from_utf8_lossy(&again.stdout).contains("(cached)"));
    for (f, old) in ["report.json", "manifest.json", "config.json"]
        .iter()
        .zip(&snapshot)
    {
        assert_eq!(&fs::read(run_dir.join(f)).unwrap(), old, "{f} changed");
    }
    let manifest: Value = serde_json::from_slice(&snapshot[1]).unwrap();
    assert!(manifest["wall_time_seconds"].is_null());
}

#[test]
fn unreproducible_runs_record_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "s.json",
        &SCATTERING.replace(r#""reproducible": true"#, r#""reproducible": false"#),
    );
    let out = bec_lab(dir.path(), &["scattering", "--config", "s.json"]);
    let manifest: Value = serde_json::from_slice(
        &fs::read(report_path(dir.path(), &out).with_file_name("manifest.json")).unwrap(),
    )
    .unwrap();
    assert!(manifest["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    let report = fs::read_to_string(report_path(dir.path(), &out)).unwrap();
    assert!(!report.contains("wall_time"));
}

#[test]
fn seed_flag_changes_the_run_key() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "s.json", SCATTERING);
    let a = report_path(
        dir.path(),
        &bec_lab(dir.path(), &["scattering", "--config", "s.json"]),
    );
    let b = report_path(
        dir.path(),
        &bec_lab(
            dir.path(),
            &["scattering", "--config", "s.json", "--seed", "9"],
        ),
    );
    assert_ne!(a, b);
    let report: Value = serde_json::from_slice(&fs::read(&b).unwrap()).unwrap();
    assert_eq!(report["seed"], 9);
}

#[test]
fn tampered_reports_fail_verification() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "g.json", SMALL_GP);
    let run = bec_lab(dir.path(), &["gp", "--config", "g.json"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stdout));
    let ok = bec_lab(dir.path(), &["verify", "--config", "g.json"]);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));

    let path = report_path(dir.path(), &run);
    let mut report: Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    let e = report["results"]["gp"]["energy_kinetic"].as_f64().unwrap();
    report["results"]["gp"]["energy_kinetic"] = Value::from(e * 1.01);
    fs::write(&path, serde_json::to_vec_pretty(&report).unwrap()).unwrap();
    let bad = bec_lab(dir.path(), &["verify", path.to_str().unwrap()]);
    assert_eq!(code(&bad), 4);
    let text = String::from_utf8_lossy(&bad.stdout);
    assert!(
        text.contains("FAIL") && text.contains("component_sum"),
        "{text}"
    );

    fs::write(&path, b"{ not json").unwrap();
    assert_eq!(
        code(&bec_lab(dir.path(), &["verify", path.to_str().unwrap()])),
        4
    );
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "typo.json",
        &SCATTERING.replace(r#""tol""#, r#""tolerance""#),
    );
    let out = bec_lab(dir.path(), &["scattering", "--config", "typo.json"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment.scattering"));

    write_config(dir.path(), "s.json", SCATTERING);
    assert_eq!(code(&bec_lab(dir.path(), &["gp", "--config", "s.json"])), 2);
    assert_eq!(
        code(&bec_lab(
            dir.path(),
            &["scattering", "--config", "missing.json"]
        )),
        2
    );
    assert_eq!(code(&bec_lab(dir.path(), &["scattering"])), 2);
    assert_eq!(
        code(&bec_lab(dir.path(), &["explode", "--config", "s.json"])),
        2
    );
    assert_eq!(
        code(&bec_lab(
            dir.path(),
            &["scattering", "--config", "s.json", "--seed", "x"]
        )),
        2
    );
    let nonpositive = SCATTERING.replace(r#""height": 10.0"#, r#""height": -1.0"#);
    write_config(dir.path(), "neg.json", &nonpositive);
    assert_eq!(
        code(&bec_lab(
            dir.path(),
            &["scattering", "--config", "neg.json"]
        )),
        2
    );
    assert_eq!(code(&bec_lab(dir.path(), &["--help"])), 0);
}

#[test]
fn solver_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // the condensate does not fit in a box this small
    let cramped = SMALL_GP.replace("-8.0, 8.0", "-2.0, 2.0");
    write_config(dir.path(), "g.json", &cramped);
    let out = bec_lab(dir.path(), &["gp", "--config", "g.json"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn a_held_lock_refuses_a_second_run() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "s.json", SCATTERING);
    fs::create_dir_all(dir.path().join("out")).unwrap();
    fs::write(dir.path().join("out/.lock"), b"").unwrap();
    let out = bec_lab(dir.path(), &["scattering", "--config", "s.json"]);
    assert_ne!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stderr).contains("lock"));
}

#[test]
fn sweep_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "w.json", SMALL_SWEEP);
    let out = bec_lab(dir.path(), &["sweep", "--config", "w.json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let run_dir = report_path(dir.path(), &out)
        .parent()
        .unwrap()
        .to_path_buf();
    let csv = fs::read_to_string(run_dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "N,a,g,E_qm_per_N,E_gp,gp_overlap,trace_distance,momentum_l1,kin,pot,int,kin_pred,pot_pred,int_pred,s"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("2,"));
    let manifest: Value =
        serde_json::from_slice(&fs::read(run_dir.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["files"]["sweep.csv"].is_string());
    assert_eq!(manifest["seed"], 0);
    assert!(manifest["config_hash"].as_str().unwrap().len() == 64);
    assert!(manifest["versions"]["bec-lab"].is_string());
    assert_eq!(
        code(&bec_lab(dir.path(), &["verify", "--config", "w.json"])),
        0
    );

    // a row edited in the CSV alone is caught
    let edited = csv.replacen("\n2,", "\n7,", 1);
    fs::write(run_dir.join("sweep.csv"), edited).unwrap();
    let bad = bec_lab(dir.path(), &["verify", "--config", "w.json"]);
    assert_eq!(code(&bad), 4);
    assert!(String::from_utf8_lossy(&bad.stdout).contains("csv_matches_rows"));
}

#[test]
fn weighted_poincare_reads_a_gp_dump_and_keys_on_it() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "g.json", SMALL_GP);
    let gp = bec_lab(dir.path(), &["gp", "--config", "g.json"]);
    assert_eq!(code(&gp), 0);
    let dump = report_path(dir.path(), &gp).with_file_name("phi.json");
    let rel = dump
        .strip_prefix(dir.path())
        .unwrap()
        .to_str()
        .unwrap()
        .to_string();
    let body = format!(
        r#"{{"experiment": {{"poincare": {{"region": {{"shape": "ball", "radius": 2.0}}, "dimension": 3,
            "cells": 12, "trials": 60, "weight": {{"gp_dump": {{"path": "{rel}"}}}}}}}},
            "output_dir": "pout", "reproducible": true}}"#
    );
    write_config(dir.path(), "p.json", &body);
    let first = bec_lab(dir.path(), &["poincare", "--config", "p.json"]);
    assert_eq!(
        code(&first),
        0,
        "{}",
        String::from_utf8_lossy(&first.stdout)
    );
    let path = report_path(dir.path(), &first);
    let report: Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    assert_eq!(report["results"]["poincare"]["weighted"]["holds_all"], true);
    assert_eq!(
        code(&bec_lab(dir.path(), &["verify", path.to_str().unwrap()])),
        0
    );

    // a different dump under the same path is a different run
    let bin = dump.with_file_name("phi.bin");
    let mut data = fs::read(&bin).unwrap();
    data[8 * 200] ^= 1;
    fs::write(&bin, data).unwrap();
    let second = bec_lab(dir.path(), &["poincare", "--config", "p.json"]);
    assert_eq!(code(&second), 0);
    assert_ne!(report_path(dir.path(), &second), path);
}
