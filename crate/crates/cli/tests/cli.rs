use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn ransig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ransig")).args(args).output().unwrap()
}

#[test]
fn missing_config_is_a_usage_error() {
    let out = ransig(&["train"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreadable_config_fails_cleanly() {
    let out = ransig(&["train", "--config", "/nonexistent/run.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn simulate_one_step_writes_a_step_of_ttis() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config();
    let o = ransig(&["simulate", "--config", cfg.to_str().unwrap(), "--steps", "1", "--out", out, "--combo", "53@5;sleep;50@25;52@15"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("simulate/seed-1/metrics.csv")).unwrap();
    assert_eq!(text.lines().count(), 101);
}

#[test]
fn bad_combo_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config();
    let o = ransig(&["simulate", "--config", cfg.to_str().unwrap(), "--steps", "1", "--out", dir.path().to_str().unwrap(), "--combo", "53@5;nap"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn short_training_then_design_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = config();
    let cfg = cfg.to_str().unwrap();
    let o = ransig(&["train", "--config", cfg, "--steps", "30", "--seed", "5", "--mode", "unassisted", "--out", out, "--emit-plots"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run_dir = dir.path().join("unassisted/seed-5");
    for f in ["training_log.csv", "metrics.csv", "report.json", "agent.ckpt", "reward.svg", "energy.svg"] {
        assert!(run_dir.join(f).exists(), "{f} missing");
    }
    let log = run_dir.join("training_log.csv");
    let o = ransig(&["design-cycle", "--config", cfg, "--log", log.to_str().unwrap(), "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("sig_snapshot.json").exists());
}

#[test]
fn validate_passes() {
    let o = ransig(&["validate"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 failed"));
}
