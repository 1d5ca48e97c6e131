use std::fs;
use std::path::Path;
use std::process::Command;

use nvpoly_cli::{run, EXIT_IDENTITY, EXIT_NO_INPUT, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};
use serde_json::Value;
use tempfile::TempDir;

fn nvpoly(dir: &Path, args: &[&str]) -> i32 {
    let mut all = vec!["nvpoly", "--out", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    run(all)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn solve_writes_a_stamped_profile() {
    let dir = TempDir::new().unwrap();
    assert_eq!(nvpoly(dir.path(), &["solve", "--k", "1", "--a", "-1"]), EXIT_OK);
    let text = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    let mut lines = text.lines();
    let first = lines.next().unwrap();
    assert!(first.starts_with("# config-sha256 "));
    assert_eq!(first.len(), "# config-sha256 ".len() + 64);
    assert!(lines.count() > 10);
}

#[test]
fn sweep_finds_the_threshold_and_is_thread_independent() {
    let one = TempDir::new().unwrap();
    let four = TempDir::new().unwrap();
    assert_eq!(nvpoly(one.path(), &["--jobs", "1", "sweep", "--points", "20"]), EXIT_OK);
    assert_eq!(nvpoly(four.path(), &["--jobs", "4", "sweep", "--points", "20"]), EXIT_OK);
    let a = fs::read_to_string(one.path().join("sweep.csv")).unwrap();
    let b = fs::read_to_string(four.path().join("sweep.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.lines().nth(1).unwrap().starts_with("a,r0,"));
}

#[test]
fn verify_passes_on_a_default_state() {
    let dir = TempDir::new().unwrap();
    assert_eq!(nvpoly(dir.path(), &["verify", "--k", "1", "--a", "-1"]), EXIT_OK);
    let v = read_json(&dir.path().join("verify.json"));
    assert_eq!(v["passed"], Value::Bool(true));
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
    let names: Vec<&str> = v["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    for n in ["exterior_law", "virial", "greens_agreement", "closed_form_k1"] {
        assert!(names.contains(&n), "missing {n}");
    }
}

#[test]
fn physical_writes_multipliers() {
    let dir = TempDir::new().unwrap();
    assert_eq!(nvpoly(dir.path(), &["physical", "--k", "0.5", "--a", "-0.3", "--c", "2"]), EXIT_OK);
    let v = read_json(&dir.path().join("multipliers.json"));
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == Value::Bool(true)));
}

#[test]
fn minimize_and_dispersion_round_trip() {
    let dir = TempDir::new().unwrap();
    let args = ["minimize", "--k", "1", "--a", "-0.5", "--nr", "32", "--np", "32"];
    assert_eq!(nvpoly(dir.path(), &args), EXIT_OK);
    let state = dir.path().join("minimizer.json");
    assert!(read_json(&state)["kkt"]["rank_correlation"].as_f64().unwrap() > 0.99);
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().nth(1), Some("iter,energy,kkt_residual"));

    let code = nvpoly(dir.path(), &["dispersion", "--input", state.to_str().unwrap(), "--t-max", "20"]);
    assert_eq!(code, EXIT_OK);
    assert!(dir.path().join("dispersion.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(nvpoly(d, &["bogus"]), EXIT_USAGE);
    assert_eq!(nvpoly(d, &[]), EXIT_USAGE);
    assert_eq!(nvpoly(d, &["solve", "--k", "3"]), EXIT_VALIDATION);
    assert_eq!(nvpoly(d, &["solve", "--a", "0.5"]), EXIT_VALIDATION);
    assert_eq!(nvpoly(d, &["--jobs", "0", "solve"]), EXIT_VALIDATION);
    assert_eq!(nvpoly(d, &["--config", "/nonexistent/cfg.json", "solve"]), EXIT_NO_INPUT);
    assert_eq!(nvpoly(d, &["dispersion", "--input", "/nonexistent/state.json"]), EXIT_NO_INPUT);

    let bad = d.join("bad.json");
    fs::write(&bad, r#"{"k": 1.0, "colour": "red"}"#).unwrap();
    assert_eq!(nvpoly(d, &["--config", bad.to_str().unwrap(), "solve"]), EXIT_NO_INPUT);
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(nvpoly(d, &["--config", bad.to_str().unwrap(), "solve"]), EXIT_NO_INPUT);
}

#[test]
fn flags_override_the_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"k": 0.5, "a": -0.3, "sweep": {"points": 5}}"#).unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(nvpoly(dir.path(), &["--config", c, "solve"]), EXIT_OK);
    let from_file = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert_eq!(nvpoly(dir.path(), &["--config", c, "solve", "--a", "-0.4"]), EXIT_OK);
    let overridden = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert_ne!(from_file.lines().next(), overridden.lines().next());
    let psi0: f64 = overridden.lines().nth(2).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(psi0, -0.4);
}

#[test]
fn config_from_environment_and_identity_failures() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("env.json");
    fs::write(&cfg, r#"{"k": 1.0, "a": -1.0, "grid": {"nr": 8, "np": 4}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_nvpoly"))
        .args(["--out", dir.path().to_str().unwrap(), "verify"])
        .env("NVPOLY_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_IDENTITY));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let line = stderr.lines().find(|l| l.starts_with('{')).unwrap();
    let doc: Value = serde_json::from_str(line).unwrap();
    let failures = doc["failures"].as_array().unwrap();
    assert!(failures.iter().any(|f| f["name"] == "virial"));
}
