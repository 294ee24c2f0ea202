use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn six_level_model(c_c: f64) -> String {
    format!(r#"{{"H":6,"lambda_o":0.2,"lambda_i":0.3,"C_o":0,"C_i":1,"C_c":{c_c},"gamma":0.9}}"#)
}

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_rpm-monitor"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn policy_rows(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| l.trim_start().starts_with("m="))
        .map(|l| l.split_whitespace().skip(1).collect())
        .collect()
}

#[test]
fn solve_low_critical_cost_is_all_ordinary() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        tmp.path(),
        &format!(r#"{{"model":{}}}"#, six_level_model(20.0)),
        &["solve", "--quiet"],
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("always_ordinary"), "{text}");
    assert_eq!(policy_rows(&text), vec!["oooooo", "oooooo"]);
}

#[test]
fn solve_high_critical_cost_is_threshold_three() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        tmp.path(),
        &format!(r#"{{"model":{}}}"#, six_level_model(60.0)),
        &["solve", "--quiet"],
    );
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(policy_rows(&stdout(&o)), vec!["iiiooo", "iiiooo"]);
}

#[test]
fn solve_json_and_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = format!(r#"{{"model":{}}}"#, six_level_model(60.0));
    let o = run(
        tmp.path(),
        &cfg,
        &["solve", "--format", "json", "--out", out.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["policy_class"]["class"], "threshold");
    assert_eq!(v["policy_class"]["h_bar"], 3);
    assert!(out.join("solve.json").exists());
    let stderr = String::from_utf8(o.stderr).unwrap();
    assert!(
        stderr.contains("seed=") && stderr.contains("ChaCha8Rng"),
        "{stderr}"
    );
}

#[test]
fn invalid_lambda_order_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"model":{"H":6,"lambda_o":0.4,"lambda_i":0.3,"C_o":0,"C_i":1,"C_c":20,"gamma":0.9}}"#;
    let o = run(tmp.path(), cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("λ_i ≥ λ_o"), "{err}");
}

#[test]
fn unknown_field_is_reported_with_path() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg =
        r#"{"model":{"H":6,"lambda_o":0.2,"lambda_i":0.3,"C_o":0,"C_i":1,"C_c":20,"gamma":0.9,"bogus":1}}"#;
    let o = run(tmp.path(), cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("model"));
}

#[test]
fn not_converged_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!(r#"{{"model":{},"max_iter":2}}"#, six_level_model(60.0));
    let o = run(tmp.path(), &cfg, &["solve"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn missing_config_exits_4() {
    let o = Command::new(env!("CARGO_BIN_EXE_rpm-monitor"))
        .args(["solve", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn check_six_level_conditions() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run(
        tmp.path(),
        &format!(r#"{{"model":{}}}"#, six_level_model(20.0)),
        &["check", "--format", "json"],
    );
    let a: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(a["ordinary_sufficient"], true);
    let b = run(
        tmp.path(),
        &format!(r#"{{"model":{}}}"#, six_level_model(60.0)),
        &["check", "--format", "json"],
    );
    let b: serde_json::Value = serde_json::from_slice(&b.stdout).unwrap();
    assert_eq!(b["cond_a"], true);
    assert_eq!(b["cond_b"], false);
    assert_eq!(b["h_prime"], 27);
}

#[test]
fn check_rejects_large_lambda_o() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"{"model":{"H":6,"lambda_o":0.6,"lambda_i":0.7,"C_o":0,"C_i":1,"C_c":20,"gamma":0.9}}"#;
    let o = run(tmp.path(), cfg, &["check"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr)
        .unwrap()
        .contains("Assumption 2(b) violated"));
}

#[test]
fn simulate_degenerate_drift_gives_discounted_critical_cost() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = r#"{"model":{"H":6,"lambda_o":0.0,"lambda_i":0.3,"C_o":0,"C_i":1,"C_c":20,"gamma":0.9},
                 "simulate":{"start":{"tier":"o","h":2},"n":1000,"policy":"ordinary"}}"#;
    let o = run(
        tmp.path(),
        cfg,
        &["simulate", "--format", "json", "--out", out.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let mean = v["mean"].as_f64().unwrap();
    assert!((mean - 0.81 * 20.0).abs() < 1e-12, "{mean}");
    assert_eq!(v["stderr"].as_f64().unwrap(), 0.0);
    assert!(out.join("estimate.json").exists());
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("step,tier,h,action,cost\n"));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"model":{},"simulate":{{"start":{{"tier":"o","h":3}},"n":500,"seed":1}}}}"#,
        six_level_model(60.0)
    );
    let base = run(tmp.path(), &cfg, &["simulate", "--format", "json"]);
    let other = run(tmp.path(), &cfg, &["simulate", "--format", "json", "--seed", "2"]);
    let a: serde_json::Value = serde_json::from_slice(&base.stdout).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&other.stdout).unwrap();
    assert_eq!(a["seed"], 1);
    assert_eq!(b["seed"], 2);
    assert_ne!(a["mean"], b["mean"]);
}

#[test]
fn sweep_writes_csv_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = r#"{"model":{"H":10,"lambda_o":0.2,"lambda_i":0.4,"C_o":0,"C_i":1,"C_c":50,"gamma":0.9},
                 "sweep":{"free":"cost_ratio","range":{"start":5,"stop":60,"step":1},"annotate_boundary":true}}"#;
    let o = run(
        tmp.path(),
        cfg,
        &["sweep", "--quiet", "--out", out.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("value,policy_class,h_bar,thm1_holds,cond_b_holds")
    );
    assert_eq!(csv.lines().filter(|l| l.contains("always_ordinary")).count(), 16);
    let svg = fs::read_to_string(out.join("sweep.svg")).unwrap();
    assert!(svg.starts_with("<svg") || svg.starts_with("<?xml"));
    assert!(svg.contains("stroke-dasharray"));
}

#[test]
fn sweep_requires_section() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(
        tmp.path(),
        &format!(r#"{{"model":{}}}"#, six_level_model(20.0)),
        &["sweep"],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn compare_writes_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = r#"{"model":{"H":5,"lambda_o":0.2,"lambda_i":0.4,"C_o":0,"C_i":1,"C_c":5,"gamma":0.9}}"#;
    let o = run(
        tmp.path(),
        cfg,
        &["compare", "--quiet", "--out", out.to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("max relative gap"), "{text}");
    let csv = fs::read_to_string(out.join("compare.csv")).unwrap();
    assert!(csv.starts_with("h,v_numeric,v_asymptotic\n"));
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.lines().nth(1).unwrap().starts_with("0,5,5"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        rpm_core::cli::RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        n += 1;
    }
    assert!(n >= 5);
}
