use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mdebif(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdebif")).args(args).output().expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stem(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

#[test]
fn criterion_verdicts() {
    let q = "3*(6 - 7*cos(t) - 10*cos(t)^2)/(10*(2 + cos(t))^2)";
    let v = json_stdout(&mdebif(&["criterion", "--q", q, "--T", "6.283185307179586"]));
    assert_eq!(v["verdict"], "unique_trivial");
    assert!((v["Qminus"].as_f64().unwrap() - 0.5135433).abs() < 1e-6);

    // sign-symmetric q has zero mean, so the hypothesis fails
    let v = json_stdout(&mdebif(&["criterion", "--q", "3*sin(t)", "--T", "6.283185307179586"]));
    assert_eq!(v["verdict"], "inconclusive");
}

#[test]
fn solve_reports_a_small_defect() {
    let out = mdebif(&["solve", "--problem", "example-5.7", "--lambda", "-0.5", "--x0", "0.2"]);
    let v = json_stdout(&out);
    assert!(v["residual_sie"].as_f64().unwrap() <= 1e-7);
    assert_eq!(v["jumps"].as_array().unwrap().len(), 1);
    assert!(v["wall_time"].as_f64().unwrap() >= 0.0);
}

fn read_csv(path: &str) -> Vec<Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect()
}

#[test]
fn liebau_path_is_the_known_periodic_solution() {
    let dir = tempfile::tempdir().unwrap();
    let s = stem(dir.path(), "liebau");
    let out = mdebif(&["solve", "--problem", "liebau", "--lambda", "0", "--x0", "27,0", "--out", &s]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&format!("{s}.csv"));
    assert!(rows.len() > 10);
    for r in &rows {
        let exact = (2.0 + r[0].cos()).powi(3);
        assert!((r[1] - exact).abs() <= 1e-6, "t = {}: {} vs {}", r[0], r[1], exact);
    }
}

#[test]
fn impulsive_scalar_path_matches_the_closed_form() {
    // between impulses 1/x solves y' = -λy - 1; the impulse maps x to x + x²
    let (lambda, x0) = (0.3f64, 0.1f64);
    let flow = |x: f64, dt: f64| 1.0 / ((1.0 / x + 1.0 / lambda) * (-lambda * dt).exp() - 1.0 / lambda);
    let left = flow(x0, 0.5);
    let right = left + left * left;
    let exact = |t: f64| if t <= 0.5 { flow(x0, t) } else { flow(right, t - 0.5) };

    let dir = tempfile::tempdir().unwrap();
    let s = stem(dir.path(), "ex");
    let out = mdebif(&["solve", "--problem", "example-5.7", "--lambda", "0.3", "--x0", "0.1", "--out", &s]);
    assert_eq!(out.status.code(), Some(0));
    for r in read_csv(&format!("{s}.csv")) {
        let want = if r[3] == 1.0 { right } else { exact(r[0]) };
        assert!((r[1] - want).abs() <= 1e-8, "t = {}: {} vs {}", r[0], r[1], want);
    }
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(format!("{s}.json")).unwrap()).unwrap();
    let jump = &summary["jumps"][0];
    assert!((jump["left"][0].as_f64().unwrap() - left).abs() <= 1e-8);
    assert!((jump["right"][0].as_f64().unwrap() - right).abs() <= 1e-8);
}

#[test]
fn degenerate_problem_scan_flags_all_zero_index() {
    let v = json_stdout(&mdebif(&["scan", "--problem", "degenerate", "--lambda-min", "-0.5", "--lambda-max", "0.5"]));
    assert_eq!(v["all_degenerate"], true);
    assert!(v["certificates"].as_array().unwrap().is_empty());
}

#[test]
fn liebau_scan_certifies_the_whole_range() {
    let v = json_stdout(&mdebif(&["scan", "--problem", "liebau", "--lambda-min", "-0.2", "--lambda-max", "0.2"]));
    assert!(v["candidates"].as_array().unwrap().is_empty());
    assert_eq!(v["certificates"].as_array().unwrap().len(), 21);
}

#[test]
fn out_stem_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let s = stem(dir.path(), "scan");
    let out = mdebif(&[
        "scan", "--problem", "example-5.7", "--lambda-min", "-0.5", "--lambda-max", "0.5", "--steps", "5", "--out", &s,
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(format!("{s}.json")).unwrap()).unwrap();
    assert_eq!(json["grid"].as_array().unwrap().len(), 5);
    assert_eq!(json["candidates"].as_array().unwrap().len(), 1);
    let csv = std::fs::read_to_string(format!("{s}.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6, "header plus one line per grid point:\n{csv}");
}

#[test]
fn json_output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<String> = (0..2)
        .map(|i| {
            let s = stem(dir.path(), &format!("mono{i}"));
            let out = mdebif(&["monodromy", "--problem", "liebau", "--lambda", "0.1", "--out", &s]);
            assert_eq!(out.status.code(), Some(0));
            std::fs::read_to_string(format!("{s}.json")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
    let v: Value = serde_json::from_str(&runs[0]).unwrap();
    assert!(v["det_I_minus_M"].as_f64().unwrap() < 0.0);
}

#[test]
fn classify_finds_the_kernel_of_the_impulsive_example() {
    let v = json_stdout(&mdebif(&["classify", "--problem", "example-5.7", "--lambda", "0"]));
    assert_eq!(v["kind"], "degenerate");
    assert_eq!(v["kernel_dim"], 1);
    assert_eq!(v["kernel_basis"][0][0], 1.0);
}

#[test]
fn periodic_from_the_branch_state() {
    let v = json_stdout(&mdebif(&["periodic", "--problem", "liebau", "--lambda", "0", "--x0", "26.5,0.3"]));
    let text = v.to_string();
    assert!(text.contains("\"converged\":true"), "{text}");
}

#[test]
fn validation_errors_exit_with_2() {
    // start outside omega
    let out = mdebif(&["solve", "--problem", "liebau", "--x0", "0,0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("outside omega"));
    // wrong dimension
    assert_eq!(mdebif(&["solve", "--problem", "liebau", "--lambda", "0", "--x0", "27"]).status.code(), Some(2));
    // lambda outside the parameter range
    assert_eq!(mdebif(&["solve", "--problem", "example-5.7", "--lambda", "5", "--x0", "0"]).status.code(), Some(2));
    assert_eq!(mdebif(&["solve", "--problem", "no-such-problem", "--lambda", "0", "--x0", "0"]).status.code(), Some(2));
    assert_eq!(mdebif(&["criterion", "--q", "sin(", "--T", "1"]).status.code(), Some(2));
    assert_eq!(mdebif(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn bad_problem_file_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, r#"{"n": 1, "T": 1, "f": ["x1"], "g": ["0"], "unknown_key": 1}"#).unwrap();
    let out = mdebif(&["solve", "--problem", path.to_str().unwrap(), "--lambda", "0", "--x0", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_3() {
    // x' = λx + x² leaves omega before t = 1 from this start
    let out = mdebif(&["solve", "--problem", "example-5.7", "--lambda", "1", "--x0", "1.5"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let out = mdebif(&["periodic", "--problem", "liebau", "--lambda", "0", "--x0", "26.5,0.3", "--max-iter", "1"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn help_exits_with_0() {
    assert_eq!(mdebif(&["--help"]).status.code(), Some(0));
}
