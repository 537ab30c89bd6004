//! The binary's exit codes and the byte-level determinism of its outputs.

use std::fs;
use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_vortex-wave");

const SMALL: &str = r#"
[scenario]
mode = "moving"
[[scenario.patches]]
center = [0.0, 0.0]
outer_radius = 0.5
value = 1.0
[[vortices.points]]
pos = [0.0, 0.0]
intensity = 1.0
[numerics]
dt = 0.005
t_end = 0.05
h = 0.1
[diagnostics]
constancy_alpha = 1.0
[output]
stride = 2
"#;

fn run(args: &[&str]) -> i32 {
    Command::new(BIN).args(args).output().unwrap().status.code().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_series_manifest_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert_eq!(run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    for f in ["series.csv", "manifest", "report"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let report = fs::read_to_string(out.join("report")).unwrap();
    assert!(report.contains("guard_events: 0 PASS"));
}

#[test]
fn identical_runs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert_eq!(run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    }
    for f in ["series.csv", "manifest"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn unperturbed_twins_never_separate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert_eq!(
        run(&["twin", "--config", &cfg, "--out", out.to_str().unwrap(), "--eta", "0"]),
        0
    );
    let text = fs::read_to_string(out.join("twin.csv")).unwrap();
    for line in text.lines().skip(1) {
        let r: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(r, 0.0);
    }
    assert_eq!(fs::read(out.join("series_a.csv")).unwrap(), fs::read(out.join("series_b.csv")).unwrap());
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("[output]", "[output]\nviscosity = 0.1"));
    let out = dir.path().join("out");
    assert_eq!(run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]), 2);
    let report = fs::read_to_string(out.join("report")).unwrap();
    assert!(report.contains("viscosity"), "{report}");
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let missing = dir.path().join("nope.toml");
    assert_eq!(run(&["simulate", "--config", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]), 2);
    assert_eq!(run(&["simulate", "--out", out.to_str().unwrap()]), 2);
}

#[test]
fn failed_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // a return tolerance no moving pair can meet
    let text = r#"
[scenario]
mode = "multi"
[[vortices.points]]
pos = [0.5, 0.0]
intensity = 1.0
[[vortices.points]]
pos = [-0.5, 0.0]
intensity = 1.0
[numerics]
dt = 0.01
t_end = 1.0
[diagnostics]
return_tol = 1e-9
"#;
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("out");
    assert_eq!(run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]), 1);
    let report = fs::read_to_string(out.join("report")).unwrap();
    assert!(report.contains("vortex_return:") && report.contains("FAIL"), "{report}");
}

#[test]
fn coincident_vortices_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
[scenario]
mode = "multi"
[[vortices.points]]
pos = [0.0, 0.0]
intensity = 1.0
[[vortices.points]]
pos = [1e-12, 0.0]
intensity = 1.0
[numerics]
dt = 0.01
t_end = 0.1
"#;
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("out");
    assert_eq!(run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]), 2);
    assert!(!out.join("series.csv").exists());
}
