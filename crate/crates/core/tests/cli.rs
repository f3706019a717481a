//! End-to-end runs of the `aedes` binary.

use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[profile]
D = 1.0
nu = 0.0
K1 = 1.0
K2 = 1.0

[profile.r]
kind = "constant"
value = 2.0

[profile.gamma]
kind = "constant"
value = 1.0

[profile.mu1]
kind = "constant"
value = 0.2

[profile.mu2]
kind = "constant"
value = 0.5

[initial]
h0 = 1.0
a = 0.5
b = 0.5

[solver]
n = 64
dt = 0.01
horizon = 1.0
output_interval = 0.25
"#;

fn aedes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aedes")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn listing(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn simulate_is_a_pure_function_of_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b, &a] {
        let o = aedes(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (la, lb) = (listing(&a), listing(&b));
    assert_eq!(la, lb);
    assert!(la.iter().any(|(n, _)| n.ends_with(".ndjson")));
    assert!(la.iter().any(|(n, _)| n.ends_with("-heatmap.svg")));
}

#[test]
fn sequential_and_parallel_runs_match() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, extra) in [(&a, None), (&b, Some("--sequential"))] {
        let mut args = vec!["compare", "--config", &cfg, "--out", out.to_str().unwrap()];
        args.extend(extra);
        assert!(aedes(&args).status.success());
    }
    assert_eq!(listing(&a), listing(&b));
}

#[test]
fn every_task_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    for task in ["simulate", "threshold", "steady", "classify", "compare"] {
        let o = aedes(&[task, "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{task}: {}", String::from_utf8_lossy(&o.stderr));
    }
    // h0 = 2 exceeds the critical half-width, so the threshold is zero
    // without bisection.
    let cfg = write_config(dir.path(), &CONFIG.replace("h0 = 1.0", "h0 = 2.0"));
    let o = aedes(&["mu-star", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("mu* = 0"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("D = 1.0", "D = -1.0").replace("n = 64", "n = 64\nsteps = 3"));
    let o = aedes(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("profile.D") && err.contains("solver.steps"), "{err}");
}

#[test]
fn mismatched_task_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("[task]\nkind = \"steady\"\n{CONFIG}"));
    let o = aedes(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // Both truncations are too short to support a positive state.
    let cfg = write_config(dir.path(), &format!("{CONFIG}\n[steady]\nl_sequence = [0.25, 0.5]\n"));
    let o = aedes(&["steady", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn sign_check_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        let o = aedes(&["sign-check", "--seed", "11", "--count", "20", "--resolution", "64", "--out", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
