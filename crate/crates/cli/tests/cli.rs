use std::path::Path;
use std::process::{Command, Output};

fn cellfree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cellfree")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = r#"{ "scenario": { "num_aps": 16, "num_users": 4 }, "clustering": { "legacy_cluster_size": 4 } }"#;

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.json", SMALL);
    let out = dir.path().join("out");
    let o = cellfree(&["run", "--config", &config, "--out", out.to_str().unwrap(), "--drops", "3", "--seed", "5", "--jobs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(out.join("cdf.csv").exists() && out.join("results.json").exists());
}

#[test]
fn serial_and_parallel_runs_match() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "s.json",
        r#"{ "scenario": { "num_aps": 16, "num_users": 4 }, "num_drops": 4,
             "sweep": { "transmission_mode": ["coherent", "non_coherent", "mixed"] } }"#,
    );
    let mut tables = Vec::new();
    for jobs in ["1", "8"] {
        let out = dir.path().join(format!("j{jobs}"));
        let o = cellfree(&["sweep", "--config", &config, "--out", out.to_str().unwrap(), "--jobs", jobs]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        tables.push(std::fs::read(out.join("results.csv")).unwrap());
    }
    assert_eq!(tables[0], tables[1]);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();

    assert_eq!(cellfree(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(cellfree(&["run", "--drops", "many"]).status.code(), Some(1));

    let typo = write(dir.path(), "typo.json", r#"{ "scenario": { "num_ap": 4 } }"#);
    assert_eq!(cellfree(&["run", "--config", &typo, "--out", out]).status.code(), Some(1));
    assert_eq!(cellfree(&["run", "--config", "/nonexistent.json", "--out", out]).status.code(), Some(1));

    let small = write(dir.path(), "small.json", SMALL);
    assert_eq!(cellfree(&["sweep", "--config", &small, "--out", out]).status.code(), Some(1));

    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let blocked = dir.path().join("blocker").join("sub");
    let o = cellfree(&["run", "--config", &small, "--drops", "1", "--out", blocked.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn validate_reports_agreement() {
    let dir = tempfile::tempdir().unwrap();
    let o = cellfree(&["validate", "--instances", "1", "--samples", "20000", "--out", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("instances within tolerance"), "{stdout}");
    assert!(dir.path().join("validation.json").exists());
}
