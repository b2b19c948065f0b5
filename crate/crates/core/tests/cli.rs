use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_seedbank-lab");

fn lab(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("SEEDBANK_LAB_THREADS").output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SERIES: &str = r#"{"experiment": "series", "torus": {"dim": 1, "side": 4}, "horizon": 1000, "replicates": 1000, "seed": 3}"#;

#[test]
fn describe_names_each_experiment() {
    for name in ["validate", "ordering", "series", "lower-bound", "activity", "meeting", "dichotomy", "lump-check", "forward"] {
        let out = lab(&["describe", name]);
        assert!(out.status.success(), "{name}");
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.starts_with(name));
        assert!(text.contains("experiment,quantity,time,estimate,std_error,censored_fraction,replicates,passed"));
    }
    let series = String::from_utf8(lab(&["describe", "series"]).stdout).unwrap();
    assert!(series.contains("Series representation"));
    let scan = String::from_utf8(lab(&["describe", "dichotomy"]).stdout).unwrap();
    assert!(scan.contains("d <= 2 vs d > 2"));
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let out = lab(&["describe", "teleport"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "UnknownExperiment");

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"experiment": "teleport", "torus": {"dim": 1, "side": 2}}"#);
    let out = lab(&["run", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_kernel_is_rejected_with_cause() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"experiment": "validate", "torus": {"dim": 1, "side": 4},
            "kernel": {"d": 1, "entries": [{"offset": [0], "rate": 0.3}, {"offset": [1], "rate": 0.2}, {"offset": [-1], "rate": 0.2}]}}"#,
    );
    let out_path = dir.path().join("never.csv");
    let out = lab(&["run", "--config", &cfg, "--out", out_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "ConfigInvalid");
    assert_eq!(err["cause"], "BadSelfRate");
    assert!(!out_path.exists());
}

#[test]
fn missing_config_is_reported() {
    let out = lab(&["run", "--config", "/nonexistent/config.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["cause"], "Unreadable");
}

#[test]
fn lump_check_passes_and_writes_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "lump.json",
        r#"{"experiment": "lump-check", "torus": {"dim": 1, "side": 2}, "field": {"per_site": {"N": [2, 3], "M": [2, 4]}}}"#,
    );
    let csv = dir.path().join("lump.csv");
    let out = lab(&["run", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("lump-check PASS"));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.contains("# config_sha256: "));
    assert!(text.contains("# seed: 0"));
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("lump-check,")).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.ends_with(",PASS") || r.ends_with(',')));
}

#[test]
fn reruns_are_byte_identical_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "series.json", SERIES);
    let path = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    assert!(lab(&["run", "--config", &cfg, "--out", &path("a.csv")]).status.success());
    assert!(lab(&["run", "--config", &cfg, "--out", &path("b.csv"), "--threads", "2"]).status.success());
    let env_run = Command::new(BIN)
        .args(["run", "--config", &cfg, "--out", &path("c.csv")])
        .env("SEEDBANK_LAB_THREADS", "3")
        .output()
        .unwrap();
    assert!(env_run.status.success());
    let a = std::fs::read(path("a.csv")).unwrap();
    assert_eq!(a, std::fs::read(path("b.csv")).unwrap());
    assert_eq!(a, std::fs::read(path("c.csv")).unwrap());

    assert!(lab(&["run", "--config", &cfg, "--out", &path("d.csv"), "--seed", "4"]).status.success());
    let d = std::fs::read_to_string(path("d.csv")).unwrap();
    assert!(d.contains("# seed: 4"));
    assert_ne!(a, d.into_bytes());
}

#[test]
fn failed_check_still_writes_output() {
    let dir = tempfile::tempdir().unwrap();
    // the activity bound is a long-time statement and fails at t = 10
    let cfg = write_config(
        dir.path(),
        "act.json",
        r#"{"experiment": "activity", "torus": {"dim": 1, "side": 4}, "t_grid": [10], "replicates": 200}"#,
    );
    let csv = dir.path().join("act.csv");
    let out = lab(&["run", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "ExperimentFailed");
    assert!(std::fs::read_to_string(&csv).unwrap().contains(",FAIL"));
}
