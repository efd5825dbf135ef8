use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/quick.toml")
}

fn lasac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lasac")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

fn run_sweep(dir: &Path, parallelism: &str) {
    let cfg = config();
    let out = lasac(&[
        "sweep",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        dir.to_str().unwrap(),
        "--horizon",
        "400",
        "--runs",
        "2",
        "--parallelism",
        parallelism,
    ]);
    let v = stdout_json(&out);
    assert!(v["rows"].as_u64().unwrap() > 0);
}

#[test]
fn sweep_files_do_not_depend_on_parallelism() {
    const FILES: [&str; 4] = ["results.csv", "results_long.csv", "curves.csv", "results.json"];
    let dir = tempfile::tempdir().unwrap();
    let snapshots: Vec<Vec<Vec<u8>>> = ["1", "1", "2"]
        .iter()
        .map(|p| {
            run_sweep(dir.path(), p);
            FILES
                .iter()
                .map(|f| std::fs::read(dir.path().join(f)).unwrap())
                .collect()
        })
        .collect();
    for other in &snapshots[1..] {
        for (k, name) in FILES.iter().enumerate() {
            assert_eq!(snapshots[0][k], other[k], "{name}");
        }
    }
    let wide = String::from_utf8(snapshots[0][0].clone()).unwrap();
    assert!(wide.starts_with("scenario_id,policy,axis_name,axis_value,run_count,mean_cost,"));
}

#[test]
fn run_prints_a_summary_and_writes_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config();
    let out = lasac(&[
        "run",
        "-c",
        cfg.to_str().unwrap(),
        "--horizon",
        "300",
        "--policy",
        "jsq",
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    let v = stdout_json(&out);
    assert_eq!(v["policy"], "jsq");
    assert_eq!(v["horizon"], 300);
    assert!(v["mean_cost"].as_f64().unwrap() > 0.0);
    assert!(v["regret_eq9"].is_number());
    let written: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(written, v);
}

#[test]
fn bounds_and_oracle_report_numbers() {
    let cfg = config();
    let v = stdout_json(&lasac(&["bounds", "-c", cfg.to_str().unwrap()]));
    assert_eq!(v["b"], 3072.0);
    assert!(v["slack_epsilon"].as_f64().unwrap() > 0.0);
    assert!(v["backlog_bound"].as_f64().unwrap() > 0.0);
    assert!(v["regret_bound"].as_f64().unwrap() > 0.0);
    let v = stdout_json(&lasac(&["bounds", "-c", cfg.to_str().unwrap(), "--seed", "3"]));
    assert!(v["regret_bound_note"].is_null());
    let o = stdout_json(&lasac(&["oracle", "-c", cfg.to_str().unwrap()]));
    assert!(o["r_star"].as_f64().unwrap() < 0.0);
    assert!(o["r_star_enumerated"].is_string());
}

#[test]
fn errors_are_json_with_nonzero_exit() {
    let out = lasac(&["run", "-c", "/nonexistent.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["kind"], "io");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[run]\nhorizon = \"soon\"\n").unwrap();
    let out = lasac(&["sweep", "-c", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "parse");

    let cfg = config();
    let out = lasac(&["run", "-c", cfg.to_str().unwrap(), "--policy", "fastest"]);
    assert_eq!(out.status.code(), Some(2));
    let e = stderr_json(&out);
    assert_eq!(e["error"]["kind"], "validation");
    assert!(e["error"]["message"].as_str().unwrap().contains("fastest"));

    let out = lasac(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "usage");
}
