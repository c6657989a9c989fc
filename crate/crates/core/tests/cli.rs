use std::path::Path;
use std::process::{Command, Output};

use dmme_core::experiments::CSV_HEADER;

fn dmme(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmme"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("DMME_G2M")
        .output()
        .expect("binary runs")
}

fn summary(dir: &Path, command: &str) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("{command}_summary.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn figure1_writes_three_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmme(dir.path(), &["figure1", "--grid", "101"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["fig1_psi3_open", "fig1_ket00_open", "fig1_ket00_closed"] {
        let csv = std::fs::read_to_string(dir.path().join(format!("{name}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.count(), 101);
    }
    let closed = summary(dir.path(), "figure1")["final_fidelities"]["fig1_ket00_closed"].as_f64().unwrap();
    assert!((closed - 0.9).abs() < 5e-3);
}

#[test]
fn output_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert_eq!(dmme(d.path(), &["simulate", "--grid", "51"]).status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("simulate_ket00.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn figure2_needs_zero_temperature() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("warm.cfg");
    std::fs::write(&cfg, "# warm bath\ntemperature = 1.0\n").unwrap();
    let out = dmme(dir.path(), &["figure2", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [("delta = 1.5\n", "delta"), ("gama = 1\n", "accepted keys"), ("grid = x\n", "grid")];
    for (text, needle) in cases {
        let cfg = dir.path().join("bad.cfg");
        std::fs::write(&cfg, text).unwrap();
        let out = dmme(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{text}");
        assert!(String::from_utf8_lossy(&out.stderr).contains(needle), "{text}");
    }
    let out = dmme(dir.path(), &["simulate", "--config", "/nonexistent/dmme.cfg"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn inadmissible_protocol_reports_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("wide.cfg");
    std::fs::write(&cfg, "g2m = 2.0\n").unwrap();
    let out = dmme(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(1));
    assert!(err.contains("inadmissible") && err.contains("t ="), "{err}");
}

#[test]
fn env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_dmme"))
        .args(["steady", "--out"])
        .arg(dir.path())
        .env("DMME_TEMPERATURE", "0.5")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(summary(dir.path(), "steady")["config"]["temperature"], "0.5");
}

#[test]
fn scan_reports_threshold_and_missing_sign_change() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmme(dir.path(), &["scan-g2m", "--resolution", "19"]);
    assert_eq!(out.status.code(), Some(0));
    let t = summary(dir.path(), "scan-g2m")["threshold"]["threshold"].as_f64().unwrap();
    assert!((t - (8.0f64 / 9.0).sqrt()).abs() < 1e-6);
    let out = dmme(dir.path(), &["scan-g2m", "--lo", "0.1", "--hi", "0.3", "--resolution", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selfcheck_passes_with_expected_failures_marked() {
    let dir = tempfile::tempdir().unwrap();
    let out = dmme(dir.path(), &["selfcheck", "--grid", "201"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(!stdout.lines().any(|l| l.starts_with("FAIL")));
    let checks = summary(dir.path(), "selfcheck")["checks"].as_array().unwrap().len();
    assert!(checks >= 20);
}
