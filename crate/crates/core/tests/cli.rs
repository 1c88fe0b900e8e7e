use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const QUICK: [&str; 4] = ["--set", "train.epochs=2", "--set", "train.corpus_size=80"];

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockmol")).args(args).current_dir(dir).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["--help"], dir.path())), 0);
    assert_eq!(code(&run(&["--version"], dir.path())), 0);
    assert_eq!(code(&run(&["sample", "--bogus"], dir.path())), 1);
    assert_eq!(code(&run(&[], dir.path())), 1);
    assert_eq!(code(&run(&["sample", "--set", "no.such.key=1"], dir.path())), 1);
    assert_eq!(code(&run(&["sample", "--set", "decode.block=7"], dir.path())), 1);
    assert_eq!(code(&run(&["validate", "--in", "missing.smi"], dir.path())), 2);
    assert_eq!(code(&run(&["search", "--target", "nowhere", "--budget", "1"], dir.path())), 1);
}

#[test]
fn validate_reports_failures_without_failing() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.smi"), "C1CC\nCCO\n").unwrap();
    let o = run(&["validate", "--in", "bad.smi"], dir.path());
    assert_eq!(code(&o), 0);
    let lines: Vec<Value> = String::from_utf8(o.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["valid"], false);
    assert_eq!(lines[1]["valid"], true);
    assert!(String::from_utf8(o.stderr).unwrap().contains("1 failed"));
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), r#"{"search.exploration": 1.5, "decode.batch": 3, "seed": 9}"#).unwrap();
    let mut args = vec!["sample", "--config", "cfg.json", "--n", "4", "--manifest", "m.json", "--stochastic"];
    args.extend(QUICK);
    let o = run(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["search.exploration"], 1.5);
    assert_eq!(manifest["config"]["decode.batch"], 4);
    assert_eq!(manifest["config"]["seed"], 9);
    assert!(manifest["timestamp"].is_u64());
    let records: Vec<Value> = String::from_utf8(o.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 4);
    for r in &records {
        assert_eq!(r["seed"], 9);
        assert!(r["smiles"].is_string() && r["valid"].is_boolean() && r["block_count"].is_u64());
    }
}

#[test]
fn train_then_sample_from_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("train.smi"), "Cc1ccc(NC(=O)C2CCNCC2)cc1\nO=C(NCc1ccncc1)C1CCOCC1\nCc1cnc(N2CCOCC2)nc1\n").unwrap();
    let o = run(&["train", "--in", "train.smi", "--out", "ck.json", "--epochs", "3", "-q"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 3);
    let o = run(&["sample", "--params", "ck.json", "--n", "5", "--prefix", "Cc1", "-q"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for line in String::from_utf8(o.stdout).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["smiles"].as_str().unwrap().starts_with("Cc1"));
    }
}

#[test]
fn curate_and_eval_files() {
    let dir = tempfile::tempdir().unwrap();
    let golden = include_str!("data/curation_golden.smi");
    fs::write(dir.path().join("in.smi"), golden).unwrap();
    let o = run(&["curate", "--in", "in.smi", "--out", "out.smi", "--report", "r.json", "-q"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(dir.path().join("out.smi")).unwrap().lines().count(), 3);
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["accepted_count"], 3);
    let o = run(&["eval", "--in", "out.smi", "--target", "parp1", "-q"], dir.path());
    assert_eq!(code(&o), 0);
    let eval: Value = serde_json::from_str(String::from_utf8(o.stdout).unwrap().trim()).unwrap();
    assert_eq!(eval["validity"], 1.0);
    assert_eq!(eval["total"], 3);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut sample = vec!["sample", "--n", "30", "--stochastic", "--seed", "4", "-q"];
    sample.extend(QUICK);
    let a = run(&sample, dir.path());
    let b = run(&sample, dir.path());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let mut threaded = sample.clone();
    threaded.extend(["--workers", "3"]);
    assert_eq!(run(&threaded, dir.path()).stdout, a.stdout);

    let mut search = vec!["search", "--budget", "60", "--seed", "2", "-q"];
    search.extend(QUICK);
    let a = run(&search, dir.path());
    let b = run(&search, dir.path());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["selftest"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8(o.stdout).unwrap().contains(" 0 failed"));
}
