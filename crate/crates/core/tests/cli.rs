use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn quadrom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadrom")).args(args).output().unwrap()
}

fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name).display().to_string()
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn lines(path: PathBuf) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

fn run_ok(args: &[&str]) -> Output {
    let out = quadrom(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn toy_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config("toy.json");
    for cmd in ["generate", "learn", "validate"] {
        run_ok(&[cmd, "--config", &cfg, "--out", out]);
    }
    assert_eq!(lines(dir.path().join("dataset.csv")), 41);
    assert_eq!(lines(dir.path().join("dense_errors.csv")), 501);
    let learn = json(dir.path().join("learn_summary.json"));
    assert_eq!(learn["order"], 2);
    assert_eq!(learn["converged"], true);
    assert!(learn["q_error"].as_f64().unwrap() < 1e-10);
    let resolved = json(dir.path().join("config.resolved.json"));
    assert_eq!(resolved["output"], out);

    let first = run_ok(&["report", "--out", out]);
    let report = fs::read(dir.path().join("report.json")).unwrap();
    let second = run_ok(&["report", "--out", out]);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(report, fs::read(dir.path().join("report.json")).unwrap());
}

#[test]
fn one_step_flag_skips_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config("toy.json");
    run_ok(&["generate", "--config", &cfg, "--out", out]);
    run_ok(&["learn", "--config", &cfg, "--out", out, "--one-step"]);
    let learn = json(dir.path().join("learn_summary.json"));
    assert_eq!(learn["one_step"], true);
    assert_eq!(learn["iterations"], 0);
}

#[test]
fn seed_override_controls_noise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("small.json");
    fs::write(
        &cfg_path,
        r#"{
            "system": { "kind": "burgers", "n": 12, "viscosity": 0.05, "boundary_gain": 0.1 },
            "grid": { "a": 0.1, "b": 100.0, "n": 20 },
            "noise": { "snr_db": 40.0, "seed": 1 }
        }"#,
    )
    .unwrap();
    let cfg = cfg_path.to_str().unwrap();
    let gen = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        run_ok(&["generate", "--config", cfg, "--out", out.to_str().unwrap(), "--seed", seed]);
        let meta = json(out.join("dataset.meta.json"));
        assert_eq!(meta["seed"].as_u64().unwrap().to_string(), seed);
        fs::read(out.join("dataset.csv")).unwrap()
    };
    let a = gen("a", "7");
    let b = gen("b", "7");
    let c = gen("c", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn missing_inputs_exit_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let report = quadrom(&["report", "--out", out]);
    assert_eq!(report.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&report.stderr);
    assert!(msg.contains("dataset.csv") && msg.contains("model.json"), "{msg}");

    let learn = quadrom(&["learn", "--config", &config("toy.json"), "--out", out]);
    assert_eq!(learn.status.code(), Some(3));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{ "system": { "kind": "toy" }, "grid": { "a": 1.0, "b": 0.5, "n": 10 } }"#).unwrap();
    let generate = quadrom(&["generate", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(generate.status.code(), Some(3));

    let unknown = dir.path().join("unknown.json");
    fs::write(&unknown, r#"{ "system": { "kind": "toy" }, "grid": { "a": 0.1, "b": 1.0, "n": 10 }, "colour": 1 }"#)
        .unwrap();
    let generate = quadrom(&["generate", "--config", unknown.to_str().unwrap(), "--out", out]);
    assert_eq!(generate.status.code(), Some(3));
}
