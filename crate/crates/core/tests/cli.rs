//! End-to-end runs of the `rmcpd` binary.

use std::path::Path;
use std::process::{Command, Output};

use rmcpd::dataset::{generate, write_panel_csv, Family, GeneratorConfig};
use serde_json::Value;

fn rmcpd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rmcpd")).args(args).output().expect("binary runs")
}

fn write_shifted_panel(path: &Path) {
    let cfg = GeneratorConfig::setting(Family::Gaussian, 3, 20, 4).unwrap();
    let cfg = GeneratorConfig {
        beta: [vec![0.0], vec![1.0]],
        ..cfg
    };
    let ds = generate(&cfg, 40, 3, 5).unwrap();
    write_panel_csv(&ds, std::fs::File::create(path).unwrap()).unwrap();
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn missing_input_exits_with_code_2() {
    let out = rmcpd(&["detect", "--input", "/nonexistent/panel.csv", "--n", "10", "--ell", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("panel.csv"));
}

#[test]
fn malformed_arguments_exit_with_code_2() {
    assert_eq!(rmcpd(&["detect", "--n", "ten", "--ell", "2"]).status.code(), Some(2));
    assert_eq!(rmcpd(&["simulate", "--settings", "7", "--replicates", "1"]).status.code(), Some(2));
}

#[test]
fn detect_reports_json_with_seed_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    write_shifted_panel(&path);
    let out = rmcpd(&["detect", "--input", path.to_str().unwrap(), "--n", "40", "--ell", "3", "--seed", "9"]);
    let v = json(&out);
    assert_eq!(v["command"], "detect");
    assert_eq!(v["seed"], 9);
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    let report = &v["report"];
    assert_eq!(report["n"], 40);
    assert_eq!(report["reject"], true);
    let tau = report["tau_hat"].as_u64().unwrap();
    assert!(tau.abs_diff(20) <= 3, "tau_hat = {tau}");
    assert!(report["p_value"].as_f64().unwrap() < 0.05);
}

#[test]
fn segment_lists_change_points() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    write_shifted_panel(&path);
    let out = rmcpd(&["segment", "--input", path.to_str().unwrap(), "--n", "40", "--ell", "3"]);
    let v = json(&out);
    let points = v["report"]["change_points"].as_array().unwrap();
    assert!(!points.is_empty());
    assert!(points.iter().any(|p| p["position"].as_u64().unwrap().abs_diff(20) <= 3));
}

#[test]
fn critical_values_table_matches_known_a1_values() {
    let out = rmcpd(&["critical-values", "--n", "200", "--n0", "10", "--n1", "190"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("2.986"), "{text}");
    assert!(text.contains("3.032"), "{text}");
}

#[test]
fn simulate_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = rmcpd(&[
            "simulate", "--settings", "1,3", "--replicates", "4", "--n", "30", "--d", "5", "--seed", "42",
            "--output", path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(path).unwrap()
    };
    let (a, b) = (run("a.json"), run("b.json"));
    assert_eq!(a, b);
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(v["seed"], 42);
    assert_eq!(v["replicates"].as_array().unwrap().len(), 8);
    // the file is a serialized SimulationReport and re-encodes to the same bytes
    let report: rmcpd::simulate::SimulationReport = serde_json::from_slice(&a).unwrap();
    assert!(report.to_json().unwrap().as_bytes() == a.trim_ascii_end(), "report does not re-encode to the same bytes");
}

#[test]
fn simulate_with_zero_replicates_succeeds() {
    let out = rmcpd(&["simulate", "--replicates", "0", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("version,seed"));
    assert!(lines.all(|l| l.ends_with(",0,0,0")));
}

#[test]
fn text_format_is_a_readable_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("panel.csv");
    write_shifted_panel(&path);
    let p = path.to_str().unwrap();
    let out = rmcpd(&["detect", "--input", p, "--n", "40", "--ell", "3", "--format", "text"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.starts_with("n = 40"), "{text}");
    assert!(text.contains("tau_hat = ") && text.contains("in_tilde"), "{text}");

    let out = rmcpd(&["segment", "--input", p, "--n", "40", "--ell", "3", "--format", "text"]);
    assert!(out.status.success());
    assert!(!String::from_utf8_lossy(&out.stdout).trim_start().starts_with('{'));
}
