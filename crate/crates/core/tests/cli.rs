mod common;

use std::path::Path;
use std::process::{Command, Output};

fn tfpi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfpi")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn run_dir(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn subcommands_run_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("tiny.toml");
    std::fs::write(&config, common::TINY).unwrap();
    let dir = tmp.path().join("run");
    let cfg = config.to_str().unwrap();
    for cmd in ["gen-data", "train", "eval", "analyze"] {
        let out = tfpi(&[cmd, "--config", cfg, "--run-dir", run_dir(&dir)]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for file in ["config.toml", "manifest.json", "metrics.jsonl", "eval_report.jsonl", "analysis.jsonl"] {
        assert!(dir.join(file).is_file(), "{file}");
    }
    assert!(dir.join("checkpoints/stage-3.ckpt").is_file());
}

#[test]
fn later_commands_read_the_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("tiny.toml");
    std::fs::write(&config, common::TINY).unwrap();
    let dir = tmp.path().join("run");
    assert!(tfpi(&["gen-data", "--config", config.to_str().unwrap(), "--run-dir", run_dir(&dir)])
        .status
        .success());
    std::fs::remove_file(&config).unwrap();
    let out = tfpi(&["train", "--run-dir", run_dir(&dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(dir.join("metrics.jsonl")).unwrap().lines().count(), 4);
}

#[test]
fn seed_override_changes_generated_tasks() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("tiny.toml");
    std::fs::write(&config, common::TINY).unwrap();
    let tasks = |seed: &str| {
        let dir = tmp.path().join(format!("run-{seed}"));
        let out = tfpi(&[
            "gen-data",
            "--config",
            config.to_str().unwrap(),
            "--run-dir",
            run_dir(&dir),
            "--seed",
            seed,
        ]);
        assert!(out.status.success());
        std::fs::read_to_string(dir.join("tasks.jsonl")).unwrap()
    };
    assert_eq!(tasks("5"), tasks("5"));
    assert_ne!(tasks("5"), tasks("6"));
}

#[test]
fn errors_map_to_distinct_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tfpi(&["train", "--config", "/nonexistent/x.toml", "--run-dir", run_dir(tmp.path())]);
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "preset = \"direct_rl\"\n[train]\nlearning_rat = 0.1\n").unwrap();
    let unknown = tfpi(&["train", "--config", bad.to_str().unwrap(), "--run-dir", run_dir(tmp.path())]);
    let codes = (missing.status.code().unwrap(), unknown.status.code().unwrap());
    assert!(codes.0 != 0 && codes.1 != 0 && codes.0 != codes.1, "{codes:?}");
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("learning_rat"));
    let usage = tfpi(&["train"]);
    assert_eq!(usage.status.code(), Some(2));
}
