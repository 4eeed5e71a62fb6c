use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hivnsfd_cli::{parse_config, SeriesTable};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn hivnsfd(args: &[&str], output_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hivnsfd"));
    cmd.args(args).env_remove("HIVNSFD_OUTPUT_DIR");
    if let Some(dir) = output_dir {
        cmd.env("HIVNSFD_OUTPUT_DIR", dir);
    }
    cmd.output().unwrap()
}

fn config(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_owned()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).unwrap()
}

#[test]
fn bundled_configs_parse_and_round_trip() {
    for name in ["case1.cfg", "case2.cfg", "case3.cfg", "sweep.cfg"] {
        let doc = std::fs::read_to_string(configs().join(name)).unwrap();
        let cfg = parse_config(&doc).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(parse_config(&cfg.to_document()).unwrap(), cfg, "{name}");
    }
}

#[test]
fn equilibria_of_case_two() {
    let out = hivnsfd(&["equilibria", &config("case2.cfg")], None);
    assert_eq!(out.status.code(), Some(0));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("R0 = 1.25\n"), "{stdout}");
    assert!(stdout.contains("R1 = 0.625\n"));
    assert!(stdout.contains("E* = (8, 1, 50, 0)\n"));
    assert!(stdout.contains("regime = NoImmuneEndemic\n"));
}

#[test]
fn disease_free_certificate_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = hivnsfd(
        &[
            "lyapunov",
            &config("case1.cfg"),
            "--target",
            "e0",
            "--output",
            "l.csv",
        ],
        Some(dir.path()),
    );
    let stderr = text(&out.stderr);
    assert_eq!(out.status.code(), Some(0), "{stderr}");
    assert!(stderr.contains(": PASS"), "{stderr}");
    let csv = std::fs::read_to_string(dir.path().join("l.csv")).unwrap();
    assert!(csv.starts_with("n,t,X,Y,V,Z,lyapunov\n"));
    assert_eq!(csv.lines().count(), 20_002);
}

#[test]
fn missing_target_is_a_usage_error() {
    let out = hivnsfd(&["lyapunov", &config("case1.cfg")], None);
    assert_eq!(out.status.code(), Some(1));
    // E* does not exist in the disease-free case.
    let out = hivnsfd(
        &["lyapunov", &config("case1.cfg"), "--target", "estar"],
        None,
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("not applicable"));
    let out = hivnsfd(&["lyapunov", &config("case1.cfg"), "--target", "e1"], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_file_exits_with_one() {
    let out = hivnsfd(&["simulate", "missing.cfg"], None);
    assert_eq!(out.status.code(), Some(1));
    let stderr = text(&out.stderr);
    assert!(stderr.contains("missing.cfg"), "{stderr}");
    assert!(stderr.contains("No such file"), "{stderr}");
}

#[test]
fn invalid_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    let doc = std::fs::read_to_string(configs().join("case2.cfg")).unwrap();
    std::fs::write(&path, doc.replace("beta = 0.0005\n", "")).unwrap();
    let out = hivnsfd(&["simulate", path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("`beta`"));

    let out = hivnsfd(&["frobnicate"], None);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(hivnsfd(&["--help"], None).status.code(), Some(0));
}

#[test]
fn case_two_csv_ends_at_the_endemic_state() {
    let out = hivnsfd(&["simulate", &config("case2.cfg")], None);
    assert_eq!(out.status.code(), Some(0));
    let table = SeriesTable::parse(&text(&out.stdout)).unwrap();
    assert_eq!(table.columns, ["t", "X", "Y", "V", "Z"]);
    assert_eq!(table.rows.len(), 50_001);
    let last = &table.rows.last().unwrap().values;
    for (got, want) in last[1..].iter().zip([8.0, 1.0, 50.0, 0.0]) {
        assert!((got.unwrap() - want).abs() < 1e-3, "{last:?}");
    }
}

#[test]
fn simulate_is_deterministic_and_writes_omega() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("case3.cfg");
    for name in ["a.csv", "b.csv"] {
        let out = hivnsfd(&["simulate", &cfg, "-o", name], Some(dir.path()));
        assert_eq!(out.status.code(), Some(0));
        assert!(text(&out.stderr).contains("wrote"));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let csv = text(&a);
    assert!(csv.starts_with("n,t,X,Y,V,Z,omega\n"));
    assert_eq!(csv.lines().count(), 50_002);
}

#[test]
fn small_sweep_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let doc = std::fs::read_to_string(configs().join("sweep.cfg")).unwrap();
    let doc: String = doc
        .lines()
        .map(|l| match l.split_once(" =").map(|(k, _)| k) {
            Some("beta_values") => "beta_values = 0.0001, 0.0005, 0.001".to_owned(),
            Some("c_values") => "c_values = 0.001, 0.2".to_owned(),
            _ => l.to_owned(),
        })
        .map(|l| l + "\n")
        .collect();
    let path = dir.path().join("small.cfg");
    std::fs::write(&path, doc).unwrap();
    let out = hivnsfd(
        &["sweep", path.to_str().unwrap(), "-o", "cells.csv"],
        Some(dir.path()),
    );
    let stderr = text(&out.stderr);
    assert_eq!(out.status.code(), Some(0), "{stderr}");
    assert!(stderr.contains("agreement"), "{stderr}");
    let csv = std::fs::read_to_string(dir.path().join("cells.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("beta,c,tau,r0,r1,predicted,observed,agree,near_threshold,sup_error")
    );
    assert_eq!(lines.count(), 6);
}

#[test]
fn sweep_without_axes_is_rejected() {
    let out = hivnsfd(&["sweep", &config("case1.cfg")], None);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn off_regime_certificate_fails_with_two() {
    // With R0 > 1 the trajectory leaves E0, so its Lyapunov function grows.
    let out = hivnsfd(&["lyapunov", &config("case2.cfg"), "--target", "e0"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains(": FAIL"));
    let out = hivnsfd(
        &["lyapunov", &config("case2.cfg"), "--target", "estar"],
        None,
    );
    assert_eq!(out.status.code(), Some(0));
}
