use std::path::Path;
use std::process::{Command, Output};

const P21_SMOKE: &str = "target = \"P21\"
n_values = [10000]
replicates = 10
seed = 7

[stick]
kind = \"beta_theta_one\"
theta = 1.0
";

fn sieve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sieve")).args(args).output().expect("binary runs")
}

fn write_spec(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_p21_smoke_writes_both_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "p21.toml", P21_SMOKE);
    let out = dir.path().join("out");
    let o = sieve(&["run", "--spec", &spec, "--out", out.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("p21.csv")).unwrap();
    assert!(csv.starts_with("# generated unix-time "));
    assert!(csv.lines().nth(1).unwrap().starts_with("target,n,t,replicate,raw,normalized"));
    assert_eq!(csv.lines().filter(|l| l.starts_with("P21")).count(), 10);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("p21.report.json")).unwrap()).unwrap();
    assert_eq!(json["target"], "P21");
}

#[test]
fn csv_is_byte_identical_without_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "p21.toml", P21_SMOKE);
    let mut runs = Vec::new();
    for (i, jobs) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let o = sieve(&["emit-plot-data", "--spec", &spec, "--out", out.to_str().unwrap(), "--no-timestamp", "--jobs", jobs]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(std::fs::read(out.join("p21.csv")).unwrap());
        assert!(!out.join("p21.report.json").exists());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn seed_override_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "p21.toml", P21_SMOKE);
    let mut runs = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        let o = sieve(&["emit-plot-data", "--spec", &spec, "--out", out.to_str().unwrap(), "--no-timestamp", "--seed", seed]);
        assert_eq!(o.status.code(), Some(0));
        runs.push(std::fs::read(out.join("p21.csv")).unwrap());
    }
    assert_ne!(runs[0], runs[1]);
}

#[test]
fn selftest_exits_zero() {
    let o = sieve(&["selftest"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains(" 0 failed"));
}

#[test]
fn oracle_writes_and_replays_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = sieve(&["oracle", "--out", out, "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let env = dir.path().join("environment.json");
    assert!(env.exists());
    let o = sieve(&["oracle", "--env", env.to_str().unwrap(), "--seed", "12"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("at 50 points, 0 mismatches"));
}

#[test]
fn malformed_spec_exits_two_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "bad.toml", "target = \"P21\"\nn_values = [10000]\nreplicates = ten\n");
    let o = sieve(&["run", "--spec", &spec, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("bad.toml:3:"), "{stderr}");
}

#[test]
fn unknown_key_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "typo.toml", "target = \"P21\"\nn_values = [10000]\nreplicates = 10\nreplicatez = 3\n");
    let o = sieve(&["run", "--spec", &spec]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("typo.toml:4:"));
}

#[test]
fn missing_spec_and_zero_jobs_are_rejected() {
    let o = sieve(&["run", "--spec", "/nonexistent/spec.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sieve(&["selftest", "--jobs", "0"]);
    assert_eq!(o.status.code(), Some(2));
}
