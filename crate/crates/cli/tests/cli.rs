use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hitlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hitlab")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn record(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("record.json")).unwrap()).unwrap()
}

const THETA: &str = r#"{
  "kind": "theta",
  "measure": {"type": "bernoulli", "probs": ["0.3", "0.7"]},
  "point": {"eventually-periodic": {"preperiod": [], "period": [0]}}
}"#;

#[test]
fn theta_record_with_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", THETA);
    let out = tmp.path().join("out");
    let o = hitlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = record(&out);
    assert_eq!(r["results"]["theta"]["limit_exact"], "3/10");
    assert_eq!(r["results"]["theta"]["below_half"], true);
    // defaults are echoed
    assert_eq!(r["config"]["grids"]["p"], 1);
    assert!(r["config"]["curve"]["state_cap"].is_u64());
    assert!(r["config"]["hypotheses"]["epsilon"].is_f64());
    assert!(out.join("theta.csv").exists());
}

#[test]
fn survival_csv_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"measure":{"type":"bernoulli","probs":["0.5","0.5"]},"hole":["00"],"grids":{"t_max":3}}"#,
    );
    let out = tmp.path().join("out");
    let o = hitlab(&["survival", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("survival.csv")).unwrap();
    assert!(csv.starts_with("t,survival,log_survival\n"));
    assert!(csv.ends_with('\n'));
    assert!(csv.lines().any(|l| l.starts_with("3,0.5,")), "{csv}");
}

#[test]
fn invalid_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"kind":"phi","measure":{"type":"bernoulli","probs":["0.3","0.6"]}}"#,
    );
    let out = tmp.path().join("out");
    let o = hitlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn kind_mismatch_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "c.json", THETA);
    assert_eq!(hitlab(&["phi", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn cap_and_nonconvergence_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let cap = write(
        tmp.path(),
        "cap.json",
        r#"{"kind":"union-check","measure":{"type":"bernoulli","probs":["0.5","0.5"]},
            "point":{"eventually-periodic":{"preperiod":[],"period":[0]}},"enumeration_cap":4}"#,
    );
    let out = tmp.path().join("cap");
    let o = hitlab(&["run", "--config", &cap, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    // partial record with warnings
    let r = record(&out);
    assert!(!r["warnings"].as_array().unwrap().is_empty());
    assert!(r["error"].is_string());

    let nc = write(
        tmp.path(),
        "nc.json",
        r#"{"kind":"escape-rate","measure":{"type":"bernoulli","probs":["0.5","0.5"]},
            "hole":["00"],"curve":{"escape_tol":1e-300}}"#,
    );
    assert_eq!(hitlab(&["run", "--config", &nc]).status.code(), Some(4));
}

#[test]
fn replay_round_trip_and_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"kind":"survival","measure":{"type":"markov","kernel":[["0.9","0.1"],["0.2","0.8"]]},
            "hole":["01"],"grids":{"t_max":30},"monte_carlo":{"trials":2000},"master_seed":5}"#,
    );
    let out = tmp.path().join("out");
    assert!(hitlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--float"]).status.success());
    let rec = out.join("record.json");
    let o = hitlab(&["replay", rec.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    // a different seed is a configuration change
    assert_eq!(hitlab(&["replay", rec.to_str().unwrap(), "--seed", "6"]).status.code(), Some(2));

    let mut r = record(&out);
    r["results"]["monte_carlo"]["survival"][3] = Value::from(0.125);
    let bad = write(tmp.path(), "bad.json", &serde_json::to_string(&r).unwrap());
    let o = hitlab(&["replay", &bad]);
    assert_eq!(o.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&o.stderr).contains("$.monte_carlo.survival[3]"));
}

#[test]
fn seed_flag_changes_monte_carlo() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "c.json",
        r#"{"kind":"survival","measure":{"type":"bernoulli","probs":["0.5","0.5"]},
            "hole":["0"],"grids":{"t_max":5},"monte_carlo":{"trials":500}}"#,
    );
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    hitlab(&["run", "--config", &cfg, "--out", a.to_str().unwrap(), "--seed", "1"]);
    hitlab(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "2"]);
    assert_eq!(record(&a)["config"]["master_seed"], 1);
    assert_ne!(record(&a)["results"]["monte_carlo"], record(&b)["results"]["monte_carlo"]);
}

#[test]
fn phi_and_ball_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "phi.json",
        r#"{"kind":"phi","measure":{"type":"markov","kernel":[["0.9","0.1"],["0.2","0.8"]]},"grids":{"k_max":12}}"#,
    );
    let out = tmp.path().join("phi");
    assert!(hitlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--threads", "2"]).status.success());
    assert!(fs::read_to_string(out.join("phi_left.csv")).unwrap().starts_with("k,phi,envelope\n"));
    assert!(out.join("phi_right.csv").exists());

    let cfg = write(
        tmp.path(),
        "ball.json",
        r#"{"kind":"ball","system":{"type":"doubling"},"measure":{"type":"bernoulli","probs":["1/2","1/2"]},
            "ball":{"center":"1/3"},"grids":{"r_schedule":["1/12","1/24","1/48","1/96"]}}"#,
    );
    let out = tmp.path().join("ball");
    let o = hitlab(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("ball_alpha1_s1.csv")).unwrap();
    assert!(csv.starts_with("r,n,inner_mass,outer_mass,L_low,L_high\n"));
    assert_eq!(record(&out)["results"]["theta"]["limit_exact"], "1/4");
}
