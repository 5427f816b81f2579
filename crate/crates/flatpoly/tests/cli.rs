use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use flatpoly::ModelConfig;

fn flatpoly(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flatpoly"))
        .args(args)
        .env_remove("FLATPOLY_LOG")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_model(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.display().to_string()
}

#[test]
fn delta_table_rows() {
    let out = flatpoly(&["delta", "--max-n", "4"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().any(|l| l == "2, 0.1250"));

    assert_eq!(stdout(&flatpoly(&["delta", "--max-n", "1"])), "1, 0.0000\n");
}

#[test]
fn delta_rejects_bad_flags() {
    for args in [&["delta", "--max-n", "20"][..], &["delta", "--max-n", "0"], &["delta", "--bogus"]] {
        let out = flatpoly(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn template_round_trips() {
    let text = stdout(&flatpoly(&["template", "model"]));
    let cfg = ModelConfig::from_json(&text).unwrap();
    assert_eq!(cfg, ModelConfig::example());
    assert_eq!(cfg.to_json(), text);
}

#[test]
fn solve_writes_report_and_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "model.json", &ModelConfig::example().to_json());
    let out_path = dir.path().join("sol.json");
    let out = flatpoly(&["solve", "--model", &model, "--solver", "both", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    for solver in ["qp", "lp"] {
        let r = &report[solver];
        assert_eq!(r["status"], "optimal");
        assert!(r["alpha"].as_array().unwrap().len() == 6);
        assert!(r["max_row_value"].as_f64().unwrap() <= 1e-8);
        assert!(r["iterations"].as_u64().is_some() && r["quadratic_cost"].as_f64().is_some());
    }
    assert_eq!(report["bound"]["holds"], true);

    let csv = fs::read_to_string(dir.path().join("sol-qp.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,x1,x2,u1");
    assert_eq!(lines.len(), 201);
    assert!(lines[1].starts_with("0,1,0,"));
    assert!(lines[200].starts_with("2,"));
    assert!(!csv.contains('\r'));
    assert!(dir.path().join("sol-lp.csv").exists());
}

#[test]
fn solve_unconstrained_solvers_agree() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(
        dir.path(),
        "m.json",
        r#"{"system": {"A": [[0, 1], [0, 0]], "B": [[0], [1]]}, "x0": [1, 0], "cost": {"P": [[5, 0], [0, 5]]}}"#,
    );
    let out = flatpoly(&["solve", "--model", &model, "--solver", "both"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let alpha = |s: &str| -> Vec<f64> {
        report[s]["alpha"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect()
    };
    for (a, b) in alpha("qp").iter().zip(alpha("lp")) {
        assert!((a - b).abs() <= 1e-8);
    }
}

#[test]
fn solve_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let infeasible = write_model(
        dir.path(),
        "infeasible.json",
        r#"{"system": {"A": [[0, 1], [0, 0]], "B": [[0], [1]]}, "x0": [1, 0], "constraints": {"g0": [1]}}"#,
    );
    let not_pd = write_model(
        dir.path(),
        "npd.json",
        r#"{"system": {"A": [[0, 1], [0, 0]], "B": [[0], [1]]}, "x0": [1, 0],
            "cost": {"Q": [[0, 0], [0, 0]], "R": [[0]]}}"#,
    );
    let bad_shape = write_model(dir.path(), "shape.json", r#"{"system": {"A": [[0, 1]], "B": [[0], [1]]}, "x0": [1, 0]}"#);
    let garbage = write_model(dir.path(), "garbage.json", "{ not json");
    let missing = dir.path().join("missing.json").display().to_string();

    for (model, code) in [(&infeasible, 1), (&not_pd, 3), (&bad_shape, 2), (&garbage, 2), (&missing, 2)] {
        for solver in ["qp", "lp", "both"] {
            let out = flatpoly(&["solve", "--model", model, "--solver", solver]);
            assert_eq!(out.status.code(), Some(code), "{model} {solver}");
            let stderr = String::from_utf8(out.stderr).unwrap();
            assert_eq!(stderr.lines().count(), 1, "{stderr}");
        }
    }
}

#[test]
fn simulate_empty_run() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_model(dir.path(), "s.json", r#"{"duration": 0}"#);
    let prefix = dir.path().join("run");
    let out = flatpoly(&["simulate-pmsm", "--scenario", &scenario, "--solver", "both", "--out", prefix.to_str().unwrap()]);
    assert!(out.status.success());
    for s in ["qp", "lp"] {
        let csv = fs::read_to_string(dir.path().join(format!("run-{s}.csv"))).unwrap();
        assert_eq!(csv, "t,id,iq,vd,vq,omega,tau,tau_ref,J,iters,status\n");
    }
    let summary = stdout(&out);
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().nth(1).unwrap().starts_with("qp,0,"));
}

#[test]
fn simulate_short_run_single_solver() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_model(dir.path(), "s.json", r#"{"duration": 0.02}"#);
    let prefix = dir.path().join("short");
    let out = flatpoly(&["simulate-pmsm", "--scenario", &scenario, "--solver", "qp", "--out", prefix.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("short-qp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 201);
    assert!(!dir.path().join("short-lp.csv").exists());
    let fields: Vec<&str> = csv.lines().nth(150).unwrap().split(',').collect();
    assert_eq!(fields.len(), 11);
    assert_eq!(fields[10], "optimal");
}

#[test]
fn bad_scenario_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_model(dir.path(), "s.json", r#"{"dt": -1}"#);
    let prefix = dir.path().join("x");
    let out = flatpoly(&["simulate-pmsm", "--scenario", &scenario, "--out", prefix.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn logging_leaves_stdout_unchanged() {
    let quiet = flatpoly(&["delta", "--max-n", "3"]);
    let dir = tempfile::tempdir().unwrap();
    let model = write_model(dir.path(), "model.json", &ModelConfig::example().to_json());
    let loud = Command::new(env!("CARGO_BIN_EXE_flatpoly"))
        .args(["delta", "--max-n", "3"])
        .env("FLATPOLY_LOG", "debug")
        .output()
        .unwrap();
    assert_eq!(quiet.stdout, loud.stdout);

    let solve = Command::new(env!("CARGO_BIN_EXE_flatpoly"))
        .args(["solve", "--model", &model])
        .env("FLATPOLY_LOG", "info")
        .output()
        .unwrap();
    assert!(String::from_utf8(solve.stderr).unwrap().contains("conditioned"));
    let report: serde_json::Value = serde_json::from_slice(&solve.stdout).unwrap();
    assert_eq!(report["status"], "optimal");
}
