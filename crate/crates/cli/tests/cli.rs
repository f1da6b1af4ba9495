use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_schwarz-rand"));
    c.env_remove("SCHWARZ_RAND_THREADS");
    c
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"{
  "instance": { "kind": "orthonormal", "dim": 4, "weights": { "kind": "geometric", "ratio": 0.7 } },
  "target": { "kind": "hs_element", "s": 0.5, "seed": 1 },
  "solver": { "kind": "random" },
  "m_max": 6,
  "runs": 300
}"#;

fn run_small(dir: &TempDir, tag: &str, extra: &[&str]) -> (Output, PathBuf, PathBuf) {
    let cfg = write(dir, "small.json", SMALL);
    let csv = dir.path().join(format!("{tag}.csv"));
    let json = dir.path().join(format!("{tag}.json"));
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--seed", "42", "--csv"])
        .arg(&csv)
        .arg("--json")
        .arg(&json)
        .args(extra)
        .output()
        .unwrap();
    (out, csv, json)
}

#[test]
fn run_is_deterministic_across_schedules() {
    let dir = TempDir::new().unwrap();
    let (a, csv_a, json_a) = run_small(&dir, "a", &[]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    let (b, csv_b, json_b) = run_small(&dir, "b", &["--threads", "3"]);
    assert_eq!(code(&b), 0);
    let (c, csv_c, _) = run_small(&dir, "c", &["--sequential"]);
    assert_eq!(code(&c), 0);
    let ca = std::fs::read(&csv_a).unwrap();
    assert_eq!(ca, std::fs::read(&csv_b).unwrap());
    assert_eq!(ca, std::fs::read(&csv_c).unwrap());
    assert_eq!(std::fs::read(&json_a).unwrap(), std::fs::read(&json_b).unwrap());

    let text = String::from_utf8(ca).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "m,mean_sq_error,stderr,bound_ec2,bound_ec2a,bound_cg1,bound_ecvr,lower_bound"
    );
    assert_eq!(lines.count(), 7);
}

#[test]
fn json_report_carries_bounds_and_oracle() {
    let dir = TempDir::new().unwrap();
    let (o, _, json) = run_small(&dir, "r", &["--runs", "50"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(json).unwrap()).unwrap();
    assert_eq!(v["runs"], 50);
    assert_eq!(v["seed"], 42);
    assert_eq!(v["instance"]["kind"], "orthonormal");
    let bounds = v["bounds"].as_array().unwrap();
    let ec2 = bounds.iter().find(|b| b["name"] == "ec2").unwrap();
    assert_eq!(ec2["satisfied"], true);
    assert!(ec2["worst_margin_sigma"].is_number());
    assert!(v["oracle_max_deviation_sigma"].as_f64().unwrap() < 5.0);
}

#[test]
fn env_var_sets_threads() {
    let dir = TempDir::new().unwrap();
    let (a, csv_a, _) = run_small(&dir, "a", &[]);
    assert_eq!(code(&a), 0);
    let cfg = dir.path().join("small.json");
    let csv_e = dir.path().join("e.csv");
    let o = bin()
        .env("SCHWARZ_RAND_THREADS", "2")
        .args(["run", "--seed", "42", "--config"])
        .arg(&cfg)
        .arg("--csv")
        .arg(&csv_e)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(csv_a).unwrap(), std::fs::read(csv_e).unwrap());
    let o = bin()
        .env("SCHWARZ_RAND_THREADS", "0")
        .args(["run", "--seed", "42", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let (o, _, _) = run_small(&dir, "z", &["--runs", "0"]);
    assert_eq!(code(&o), 2);
    let cfg = dir.path().join("small.json");
    let o = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&o), 2, "seed is mandatory");
    let bad = write(&dir, "bad.json", r#"{"instance": 3}"#);
    let o = bin().args(["run", "--seed", "1", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(code(&o), 2);
    let o = bin().args(["run", "--seed", "1", "--config", "/nonexistent.json"]).output().unwrap();
    assert_eq!(code(&o), 2);
    let o = bin().args(["verify", "--suite", "nope"]).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn singular_gram_exits_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "singular.json",
        r#"{
  "instance": {
    "kind": "unit_dictionary",
    "dim": 2,
    "gram": [[1.0, 1.0], [1.0, 1.0]],
    "atoms": { "kind": "explicit", "vectors": [[1.0, 0.0]] },
    "weights": { "kind": "uniform" }
  },
  "target": { "kind": "basis", "index": 0 },
  "solver": { "kind": "random" },
  "m_max": 3,
  "runs": 10
}"#,
    );
    let o = bin().args(["run", "--seed", "1", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_suite_exit_codes() {
    let o = bin().args(["verify", "--suite", "enumeration"]).output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("PASS enumeration"));
    assert!(text.contains("exact-m2"));
}

#[test]
fn verify_config_with_one_run_is_low_power() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "small.json", SMALL);
    let json = dir.path().join("v.json");
    let o = bin()
        .args(["verify", "--seed", "3", "--runs", "1", "--config"])
        .arg(&cfg)
        .arg("--json")
        .arg(&json)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8(o.stdout).unwrap().contains("low power"));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(json).unwrap()).unwrap();
    assert_eq!(v["low_power"], true);
}

#[test]
fn noisy_config_has_no_bounds_to_fail() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "noisy.json",
        r#"{
  "instance": { "kind": "orthonormal", "dim": 2, "weights": { "kind": "uniform" } },
  "target": { "kind": "basis", "index": 0 },
  "solver": { "kind": "noisy", "sigma": 0.5 },
  "m_max": 40,
  "runs": 200,
  "seed": 5
}"#,
    );
    let o = bin().args(["verify", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn failing_suite_exits_4() {
    let o = bin().args(["verify", "--suite", "theorem1-orthonormal"]).output().unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), if text.contains("[FAIL]") { 4 } else { 0 }, "{text}");
}

#[test]
fn norms_prints_class_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "small.json", SMALL);
    let vec = write(&dir, "v.json", "[1.0, 0.0, 0.0, 0.0]");
    let o = bin()
        .args(["norms", "--s", "0.5", "--config"])
        .arg(&cfg)
        .arg("--vector")
        .arg(&vec)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rho0: f64 = 1.0 / (1.0 + 0.7 + 0.49 + 0.343);
    let a2 = v["a2_norm"].as_f64().unwrap();
    assert!((a2 - (1.0 / rho0).sqrt()).abs() < 1e-12);
    assert!((v["a1_upper"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["hs_norms"][0]["norm"].as_f64().unwrap() - a2).abs() < 1e-10);
}

#[test]
fn sweep_writes_one_row_per_combination() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "small.json", SMALL);
    let out = dir.path().join("sweep.csv");
    let o = bin()
        .args(["sweep", "--seed", "9", "--s", "0.25,0.5", "--skew", "0.5,0.9", "--runs", "40", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("s,beta,sigma,skew,slope"));
    assert!(lines[1].starts_with("0.25,,,0.5,"));
    let o = bin()
        .args(["sweep", "--seed", "9", "--beta", "0.5", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 2, "beta needs a greedy solver");
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    for entry in std::fs::read_dir(config("")).unwrap() {
        let path = entry.unwrap().path();
        let o = bin()
            .args(["norms", "--s", "0.5", "--config"])
            .arg(&path)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0, "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
    }
}
