use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn coachres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coachres"))
        .args(args)
        .env_remove("COACHRES_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn toy() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data/toy.json")
        .display()
        .to_string()
}

fn json_of(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.json");
    assert!(coachres(&["gen", "--builtin", "shinkansen", "-o", full.to_str().unwrap()]).status.success());
    let v = json_of(&full);
    let caps = v["coach_capacities"].as_array().unwrap();
    assert_eq!(caps.len(), 16);
    assert_eq!(caps[0], 65);

    let mini = dir.path().join("mini.json");
    assert!(coachres(&["gen", "--builtin", "shinkansen-mini", "-o", mini.to_str().unwrap()]).status.success());
    let v = json_of(&mini);
    assert_eq!(v["coach_capacities"], serde_json::json!([25, 25, 25, 25]));
    let loaded = coachres::instance::Instance::load(&mini).unwrap();
    assert_eq!(loaded, coachres::instance::Instance::builtin("shinkansen-mini").unwrap());
}

#[test]
fn gen_with_seed_embeds_arrivals() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = coachres(&["gen", "--builtin", "shinkansen-mini", "--seed", "5", "-o", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(!json_of(&a)["arrivals"].as_array().unwrap().is_empty());
}

#[test]
fn offline_toy_values() {
    let o = coachres(&["offline", "--instance", &toy(), "--json"]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["plain"]["value"], 10);
    assert_eq!(v["fcfs"]["value"], 8);
    assert_eq!(v["fcfs"]["audit_violations"], 0);
}

#[test]
fn offline_reports_gap_under_limits_and_dumps_models() {
    let dir = tempfile::tempdir().unwrap();
    let o = coachres(&[
        "offline",
        "--instance",
        "shinkansen-mini",
        "--seed",
        "3",
        "--mode",
        "fcfs",
        "--node-limit",
        "1",
        "--json",
        "--dump-lp",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["fcfs"]["gap"].is_number());
    assert!(v["plain"].is_null());
    let lp = fs::read_to_string(dir.path().join("fcfs.lp")).unwrap();
    assert!(lp.starts_with("\\ fcfs") && lp.contains("Subject To"));
}

#[test]
fn bounds_table() {
    let o = coachres(&["bounds", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["rom_ratio"].as_f64().unwrap() - 0.2950).abs() < 5e-4);
    assert!((v["optimal_q"].as_f64().unwrap() - 0.515).abs() < 1e-3);
    assert!((v["theta_star"].as_f64().unwrap() - 1.0).abs() < 1e-4);

    let o = coachres(&["bounds", "--delta", "0.01", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["theta_star"].as_f64().unwrap() - 0.9218).abs() < 1e-3);
    assert!((v["theta_star_guarantee"]["factor"].as_f64().unwrap() - 0.916).abs() < 1e-3);

    let o = coachres(&["bounds", "--delta", "1"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("delta"));
}

#[test]
fn simulate_layout_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = |parallel: &str| {
        coachres(&[
            "simulate",
            "--name",
            "smoke",
            "--policies",
            "FirstFit,RandomFit",
            "--seeds",
            "1..3",
            "--out",
            out,
            "--parallel",
            parallel,
        ])
    };
    assert!(run("1").status.success());
    let root = dir.path().join("smoke");
    let traces: usize = ["FirstFit", "RandomFit"]
        .iter()
        .map(|p| fs::read_dir(root.join(p)).unwrap().count())
        .sum();
    assert_eq!(traces, 6);
    for f in ["metrics.json", "curves.csv", "bland_altman.csv"] {
        assert!(root.join(f).exists(), "{f}");
    }
    let first = fs::read(root.join("metrics.json")).unwrap();
    assert!(run("1").status.success());
    assert_eq!(first, fs::read(root.join("metrics.json")).unwrap());

    let m = json_of(&root.join("metrics.json"));
    for p in m["report"]["policies"].as_array().unwrap() {
        assert_eq!(p["fcfs_violations"], 0);
        assert!(p["relative_revenue"]["mean"].as_f64().unwrap() <= 1.0 + 1e-9);
    }
    let report = coachres(&["report", root.to_str().unwrap()]);
    assert!(report.status.success());
    assert!(stdout(&report).contains("RandomFit"));
}

#[test]
fn simulate_config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"name": "fromfile", "policies": ["FirstFit"], "replications": 2, "seed": 4, "exact": false, "out": "{}"}}"#,
            dir.path().display()
        ),
    )
    .unwrap();
    let o = coachres(&["simulate", "--config", cfg.to_str().unwrap(), "--name", "override"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = json_of(&dir.path().join("override/metrics.json"));
    assert_eq!(m["seeds"], serde_json::json!([4, 5]));
    assert!(dir.path().join("override/FirstFit/5.trace.csv").exists());

    fs::write(&cfg, r#"{"policy": ["FirstFit"]}"#).unwrap();
    let o = coachres(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
}

#[test]
fn unknown_policy_is_an_error() {
    let o = coachres(&["simulate", "--policies", "Oracle", "--out", "/nonexistent-dir-for-test"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown policy"));
}
