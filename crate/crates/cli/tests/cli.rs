use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use tempfile::TempDir;

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_with_stdin(args: &[&str], stdin: &str) -> Out {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let argv = std::iter::once("digicopy").chain(args.iter().copied());
    let code = digicopy_cli::run(argv, &mut stdin.as_bytes(), &mut stdout, &mut stderr);
    Out {
        code,
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn run(args: &[&str]) -> Out {
    run_with_stdin(args, "")
}

fn put(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const HAND: &str = "period,a,b,c\n1,1,3,1\n2,2,2,3\n3,3,1,2\n";

const RANK_ONE: &str =
    r#"{"n": 12, "periods": 10, "loadings": {"value": 1.0, "factors": 1}, "noise_sigma": 0.0, "seed": 3}"#;

const NOISY: &str = r#"{"n": 40, "periods": 14, "loadings": {"blocks": [10, 10, 20]}, "noise_sigma": 0.5, "level": 100.0, "processes": 4, "seed": 11}"#;

#[test]
fn help_and_version_exit_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.code, 0);
    assert!(out.stdout.contains("indicator"));
    assert_eq!(run(&["--version"]).code, 0);
    assert_eq!(run(&["indicator", "--help"]).code, 0);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&[]).code, 2);
    assert_eq!(run(&["frobnicate"]).code, 2);
    assert_eq!(run(&["indicator", "--k", "abc"]).code, 2);
    assert_eq!(run(&["compare", "--base", "x.csv"]).code, 2);
    assert_eq!(run(&["indicator", "--aggregate", "median"]).code, 2);
}

#[test]
fn missing_input_exits_three() {
    let out = run(&["indicator", "/nonexistent/panel.csv"]);
    assert_eq!(out.code, 3);
    assert!(out.stderr.contains("no such file"));
    assert_eq!(run(&["synth", "--spec", "/nonexistent/spec.json"]).code, 3);
}

#[test]
fn indicator_hand_panel() {
    let out = run_with_stdin(&["indicator", "--k", "3", "--threads", "2"], HAND);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert_eq!(out.stdout, "t,v_sum,a,b,c\n3,7,2.5,2.5,2\n");
}

#[test]
fn indicator_short_panel_fails_with_message() {
    let out = run_with_stdin(&["indicator"], HAND);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("panel shorter than window"), "{}", out.stderr);
}

#[test]
fn indicator_bad_cell_reports_location() {
    let out = run_with_stdin(&["indicator", "--k", "2"], "period,a,b\n1,1,2\n2,x,3\n3,2,2\n");
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("row"), "{}", out.stderr);
}

#[test]
fn indicator_json_and_mean() {
    let out = run_with_stdin(
        &["indicator", "--k", "3", "--format", "json", "--aggregate", "mean"],
        HAND,
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    let agg = v["v_agg"][0].as_f64().unwrap();
    assert!((agg - 7.0 / 3.0).abs() < 1e-12);
    assert_eq!(v["mode_label"], "basic_mode");
}

#[test]
fn synth_rank_one_pipes_into_indicator() {
    let dir = TempDir::new().unwrap();
    let spec = put(&dir, "spec.json", RANK_ONE);
    let panel = run(&["synth", "--spec", s(&spec)]);
    assert_eq!(panel.code, 0, "{}", panel.stderr);
    let out = run_with_stdin(&["indicator", "--format", "json"], &panel.stdout);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    for row in v["g"].as_array().unwrap() {
        for g in row.as_array().unwrap() {
            assert!((g.as_f64().unwrap() - 12.0).abs() < 1e-9);
        }
    }
}

#[test]
fn binary_pipeline() {
    let dir = TempDir::new().unwrap();
    let spec = put(&dir, "spec.json", RANK_ONE);
    let bin = env!("CARGO_BIN_EXE_digicopy");
    let synth = Command::new(bin).args(["synth", "--spec", s(&spec)]).output().unwrap();
    assert!(synth.status.success());
    let mut child = Command::new(bin)
        .args(["indicator", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(&synth.stdout).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    // T = 10, k = 6: points at t = 6..=10, each V = n * n.
    assert_eq!(text.lines().count(), 6);
    for line in text.lines().skip(1) {
        let v: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 144.0).abs() < 1e-9, "{line}");
    }

    let short = Command::new(bin)
        .args(["indicator", "--k", "30", s(&dir.path().join("missing.csv"))])
        .output()
        .unwrap();
    assert_eq!(short.status.code(), Some(3));
}

#[test]
fn synth_seed_override_and_meta() {
    let dir = TempDir::new().unwrap();
    let spec = put(&dir, "spec.json", NOISY);
    let meta = dir.path().join("meta.csv");
    let a = run(&["synth", "--spec", s(&spec), "--meta-out", s(&meta)]);
    let b = run(&["synth", "--spec", s(&spec)]);
    let c = run(&["synth", "--spec", s(&spec), "--seed", "12"]);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let meta = fs::read_to_string(meta).unwrap();
    assert!(meta.starts_with("param_id,process_id,kind"), "{meta}");
    assert!(meta.contains("x40,bp4,expense"));
}

#[test]
fn threads_do_not_change_output() {
    let dir = TempDir::new().unwrap();
    let spec = put(&dir, "spec.json", NOISY);
    let panel = put(&dir, "panel.csv", &run(&["synth", "--spec", s(&spec)]).stdout);
    let outs: Vec<String> = ["1", "2", "8"]
        .iter()
        .map(|t| run(&["indicator", s(&panel), "--threads", t, "--block", "7"]).stdout)
        .collect();
    assert!(!outs[0].is_empty());
    assert!(outs.iter().all(|o| *o == outs[0]));
}

#[test]
fn compare_panels_and_series() {
    let dir = TempDir::new().unwrap();
    let base = put(&dir, "base.json", NOISY);
    let ctrl = put(&dir, "ctrl.json", &NOISY.replace("\"seed\": 11", "\"seed\": 12"));
    let base = put(&dir, "base.csv", &run(&["synth", "--spec", s(&base)]).stdout);
    let ctrl = put(&dir, "ctrl.csv", &run(&["synth", "--spec", s(&ctrl)]).stdout);

    let svg = dir.path().join("chart.svg");
    let direct = run(&["compare", "--base", s(&base), "--ctrl", s(&ctrl), "--svg", s(&svg)]);
    assert_eq!(direct.code, 0, "{}", direct.stderr);
    assert!(
        direct.stdout.starts_with("t,v_basic,v_strat,delta\n"),
        "{}",
        direct.stdout
    );
    assert_eq!(direct.stdout.lines().count(), 1 + 14 - 6 + 1);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));

    // Precomputed series, CSV and JSON, give the same report.
    let sb = put(&dir, "sb.csv", &run(&["indicator", s(&base)]).stdout);
    let sc = put(
        &dir,
        "sc.json",
        &run(&["indicator", s(&ctrl), "--format", "json"]).stdout,
    );
    let via_series = run(&["compare", "--base", s(&sb), "--ctrl", s(&sc)]);
    assert_eq!(via_series.code, 0, "{}", via_series.stderr);
    assert_eq!(via_series.stdout, direct.stdout);

    let json = run(&["compare", "--base", s(&base), "--ctrl", s(&ctrl), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&json.stdout).unwrap();
    assert!(v["totals"]["delta"].is_number());
}

#[test]
fn compare_rejects_mismatched_axes() {
    let dir = TempDir::new().unwrap();
    let a = put(&dir, "a.csv", "t,v_sum\n6,1\n7,2\n");
    let b = put(&dir, "b.csv", "t,v_sum\n6,1\n8,2\n");
    let out = run(&["compare", "--base", s(&a), "--ctrl", s(&b)]);
    assert_eq!(out.code, 1);
}

#[test]
fn strategy_budget_to_the_unit() {
    let dir = TempDir::new().unwrap();
    let model = put(&dir, "m.csv", "strategy,process,cost,assigned\ndigital,bp1,27612,1\n");
    let cfg = put(&dir, "c.json", r#"{"budget": 5669054}"#);
    let out = run(&[
        "strategy",
        "--model",
        s(&model),
        "--config",
        s(&cfg),
        "--base-cost",
        "5641442",
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["plan"]["budget_check"]["slack"].as_f64(), Some(0.0));
    assert_eq!(v["plan"]["budget_check"]["feasible"], true);

    let out = run(&[
        "strategy",
        "--model",
        s(&model),
        "--config",
        s(&cfg),
        "--base-cost",
        "5641443",
    ]);
    assert_eq!(out.code, 1);
}

#[test]
fn strategy_optimize() {
    let dir = TempDir::new().unwrap();
    let model = put(
        &dir,
        "m.csv",
        "strategy,process,cost\ns1,p1,4\ns1,p2,1\ns2,p1,2\ns2,p2,1\ns3,p1,2\ns3,p2,5\n",
    );
    let cfg = put(&dir, "c.json", r#"{"budget": 10, "rule": "each_process_exactly_one"}"#);
    let out = run(&["strategy", "--model", s(&model), "--config", s(&cfg), "--optimize"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["optimized"]["status"], "feasible");
    assert_eq!(v["optimized"]["objective"].as_f64(), Some(3.0));
    assert_eq!(v["optimized"]["assign"], serde_json::json!([[0, 1], [1, 0], [0, 0]]));

    let tight = put(&dir, "t.json", r#"{"budget": 2}"#);
    let out = run(&["strategy", "--model", s(&model), "--config", s(&tight), "--optimize"]);
    assert_eq!(out.code, 1);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["optimized"]["status"], "infeasible");
}

#[test]
fn strategy_incomplete_grid_is_rejected() {
    let dir = TempDir::new().unwrap();
    let model = put(&dir, "m.csv", "strategy,process,cost\ns1,p1,4\ns2,p2,1\n");
    let cfg = put(&dir, "c.json", r#"{"budget": 10}"#);
    assert_eq!(run(&["strategy", "--model", s(&model), "--config", s(&cfg)]).code, 1);
}

#[test]
fn verify_paper_passes() {
    let out = run(&["verify-paper"]);
    assert_eq!(out.code, 0, "{}", out.stdout);
    assert!(out.stdout.contains("61/61"), "{}", out.stdout);
    assert!(!out.stdout.contains("FAIL"));
    let json = run(&["verify-paper", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&json.stdout).unwrap();
    assert_eq!(v["all_pass"], true);
    assert_eq!(v["rows"].as_array().unwrap().len(), 57);
}

#[test]
fn validate_reports_findings() {
    let clean = run_with_stdin(&["validate"], HAND);
    assert_eq!(clean.code, 0);
    assert!(clean.stdout.ends_with("0 errors, 0 warnings\n"), "{}", clean.stdout);

    let warn = run_with_stdin(&["validate"], "period,a,b\n1,1,5\n2,2,5\n");
    assert_eq!(warn.code, 0);
    assert!(warn.stdout.contains("1 warnings"), "{}", warn.stdout);

    let bad = run_with_stdin(&["validate"], "period,a,a\n2,1,5\n1,2,5\n");
    assert_eq!(bad.code, 1);
    let json = run_with_stdin(&["validate", "--format", "json"], "period,a,a\n2,1,5\n1,2,5\n");
    assert!(serde_json::from_str::<serde_json::Value>(&json.stdout).is_ok());
}
