use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn mcfhomog(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcfhomog")).args(args).env_remove("MCFHOMOG_WORKERS").output().unwrap()
}

fn run_ok(scenario: &str, config: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec![scenario, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = mcfhomog(&args);
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    for f in manifest["outputs"].as_array().unwrap() {
        assert!(out.join(f.as_str().unwrap()).exists(), "missing {f}");
    }
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn dry_run_prints_plan_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = mcfhomog(&["simulate", "--config", configs().join("planar.toml").to_str().unwrap(), "--out", out.to_str().unwrap(), "--dry-run"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for key in ["nodes", "steps", "memory_bytes"] {
        assert!(text.lines().any(|l| l.starts_with(key) && l.contains(" = ")), "{key} missing from:\n{text}");
    }
    assert!(!out.exists());
}

#[test]
fn validation_errors_are_one_line_with_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let planar = fs::read_to_string(configs().join("planar.toml")).unwrap();
    let cases = [
        ("simulate", planar.replace("horizon = 1.0", "horizon = -1.0")),
        ("simulate", planar.replace("seed = 1", "seed = 1\nbogus = 3")),
        ("finger", planar.clone()),
        ("simulate", planar.replace("directions = [[0.0, 1.0]]", "directions = [[0.0, 2.0]]")),
    ];
    for (scenario, body) in cases {
        let cfg = write_config(tmp.path(), &body);
        let o = mcfhomog(&[scenario, "--config", cfg.to_str().unwrap(), "--dry-run"]);
        let err = String::from_utf8(o.stderr).unwrap();
        assert_eq!(o.status.code(), Some(2), "{err}");
        assert_eq!(err.lines().count(), 1, "{err}");
        assert!(err.starts_with("error kind="), "{err}");
    }
}

#[test]
fn zero_workers_rejected() {
    let o = mcfhomog(&["simulate", "--config", configs().join("planar.toml").to_str().unwrap(), "--workers", "0", "--dry-run"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn planar_simulation_has_unit_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let s = run_ok("simulate", &configs().join("planar.toml"), tmp.path(), &[]);
    let slope = s["head_slope"].as_f64().unwrap();
    assert!((slope - 1.0).abs() <= 0.02, "slope {slope}");
    let csv = fs::read_to_string(tmp.path().join("front.csv")).unwrap();
    assert!(csv.starts_with("t,head,tail"));
}

#[test]
fn sweep_speeds_are_ordered() {
    let tmp = tempfile::tempdir().unwrap();
    let body = fs::read_to_string(configs().join("sweep.toml")).unwrap().replace("count = 16", "count = 4");
    let cfg = write_config(tmp.path(), &body);
    let s = run_ok("sweep", &cfg, &tmp.path().join("out"), &["--workers", "2"]);
    assert_eq!(s["all_ordered"], Value::Bool(true));
    let rows = fs::read_to_string(tmp.path().join("out/sweep.csv")).unwrap().lines().count();
    assert_eq!(rows, 5);
}

#[test]
fn laminar_corollary_report_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let s = run_ok("laminar", &configs().join("laminar.toml"), tmp.path(), &["--corollary"]);
    assert_eq!(s["passed"], Value::Bool(true));
    let rate = s["rate"].as_f64().unwrap();
    assert!(rate >= s["required_rate"].as_f64().unwrap());
}

#[test]
fn discrepancy_run_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("discrepancy.toml");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let sa = run_ok("discrepancy", &cfg, &a, &["--workers", "1"]);
    let sb = run_ok("discrepancy", &cfg, &b, &["--workers", "2"]);
    assert_eq!(sa, sb);
    assert_eq!(sa["random_failures"], Value::from(0));
    assert_eq!(fs::read(a.join("random_cases.csv")).unwrap(), fs::read(b.join("random_cases.csv")).unwrap());
}
