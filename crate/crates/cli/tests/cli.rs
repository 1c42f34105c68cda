use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use serde_json::Value;
use tempfile::TempDir;

fn simsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_simsel")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let unknown_field = write(dir.path(), "a.json", r#"{"task": "demo", "particpants": 3}"#);
    let bad_pairing = write(dir.path(), "b.json", r#"{"task": "sigdet", "method": "ado"}"#);
    let bad_checkpoints = write(dir.path(), "c.json", r#"{"task": "demo", "checkpoints": [4, 2]}"#);
    let cases: Vec<Vec<&str>> = vec![
        vec!["benchmark", "--config", "/nonexistent/config.json"],
        vec!["benchmark", "--config", &unknown_field],
        vec!["benchmark", "--config", &bad_pairing],
        vec!["benchmark", "--config", &bad_checkpoints],
        vec!["simulate", "--task", "chess", "--method", "lbird"],
        vec!["simulate", "--task", "demo", "--method", "minebed"],
        vec!["simulate", "--task", "demo", "--method", "lbird", "--trials", "0"],
        vec!["simulate", "--task", "demo", "--method", "lbird", "--true-model", "XM"],
        vec!["replay", "/nonexistent/log.jsonl"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = simsel(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_simsel"))
        .args(["simulate", "--task", "demo", "--method", "prior", "--trials", "1"])
        .env("SIMSEL_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn runtime_failures_exit_3() {
    let dir = TempDir::new().unwrap();
    let config = write(dir.path(), "p.json", r#"{"task": "demo", "method": "prior", "n_participants": 1, "checkpoints": [1]}"#);
    // The output directory cannot be created under a regular file.
    let blocker = write(dir.path(), "file", "");
    let out = format!("{blocker}/out");
    let o = simsel(&["benchmark", "--config", &config, "--out", &out]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));

    // Well-formed events in an impossible order.
    let log = concat!(
        r#"{"event":"response_submitted","v":1,"trial_index":0,"response":[1.0],"at_ms":0}"#,
        "\n"
    );
    let o = simsel(&["replay", &write(dir.path(), "bad.jsonl", log)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_is_deterministic_and_replayable() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("run.jsonl");
    let log = log.to_str().unwrap();
    let args = ["simulate", "--task", "memory", "--method", "lbird", "--seed", "4", "--trials", "3", "--particles", "400"];
    let a = simsel(&args);
    let mut with_record = args.to_vec();
    with_record.extend(["--record", log]);
    let b = simsel(&with_record);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);

    let lines: Vec<Value> = String::from_utf8(a.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4);
    for (i, l) in lines[..3].iter().enumerate() {
        assert_eq!(l["trial"], i as u64 + 1);
        assert_eq!(l["model_marginals"].as_array().unwrap().len(), 2);
    }
    let last = &lines[3];
    assert_eq!(last["final"], true);
    assert!(last["map"]["model"]["name"].is_string());

    let r = simsel(&["replay", log]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let snap: Value = serde_json::from_slice(&r.stdout).unwrap();
    assert_eq!(snap["map"], last["map"]);
    assert_eq!(snap["phase"], "finished");
    assert_eq!(snap["history"].as_array().unwrap().len(), 3);
}

#[test]
fn prior_benchmark_smoke_runs_quickly() {
    let dir = TempDir::new().unwrap();
    let config = write(
        dir.path(),
        "prior.json",
        r#"{"task": "demo", "method": "prior", "n_participants": 5, "checkpoints": [1, 2, 4, 20], "seed": 1}"#,
    );
    let out = dir.path().join("out");
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_simsel"))
        .args(["benchmark", "--config", &config, "--out", out.to_str().unwrap()])
        .env("SIMSEL_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(start.elapsed() < Duration::from_secs(10), "took {:?}", start.elapsed());
    for f in ["records.csv", "summary.csv", "trace.jsonl", "table.txt", "timing.csv"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let records = std::fs::read_to_string(out.join("records.csv")).unwrap();
    // Header plus 5 participants x 4 checkpoints.
    assert_eq!(records.lines().count(), 1 + 5 * 4);
    assert!(records.lines().next().unwrap().contains("behavioural_error_bic"));
    let trace = std::fs::read_to_string(out.join("trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 5 * 20);
}
