//! End-to-end checks of the `puzzlegen` binary: exit codes, output hygiene
//! and the generate, score, partition, dedup and grade round trip.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use puzzlegen_core::record::DatasetRecord;
use serde_json::Value as Json;

fn spec_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../core/specs/{name}.spec"))
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_puzzlegen")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn error_class(o: &Output) -> String {
    let line = String::from_utf8_lossy(&o.stderr);
    let last = line.lines().last().unwrap_or_default();
    serde_json::from_str::<Json>(last).unwrap()["error"].as_str().unwrap().to_string()
}

fn records(path: &Path) -> Vec<DatasetRecord> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn generate(dir: &Path, spec: &str, count: usize, seed: u64) -> PathBuf {
    let out = dir.join(format!("{spec}-{seed}.jsonl"));
    let o = run(&[
        "generate", "--spec", s(&spec_path(spec)), "--count", &count.to_string(), "--seed", &seed.to_string(), "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn jsonl_records_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = generate(dir.path(), "graduation", 5, 3);
    let text = std::fs::read_to_string(&out).unwrap();
    for line in text.lines() {
        let r: DatasetRecord = serde_json::from_str(line).unwrap();
        assert_eq!(r.source, "graduation");
        assert_eq!(r.answers.len(), 3);
        let again: Json = serde_json::to_value(&r).unwrap();
        assert_eq!(again, serde_json::from_str::<Json>(line).unwrap());
    }
}

#[test]
fn infeasible_spec_exhausts_and_leaves_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(spec_path("graduation"))
        .unwrap()
        .replace("'equal', select_num)", "'equal', p_num + 1)");
    let spec = dir.path().join("never.spec");
    std::fs::write(&spec, text).unwrap();
    let out = dir.path().join("nested/out.jsonl");
    let o = run(&["generate", "--spec", s(&spec), "--count", "2", "--out", s(&out), "--retry-budget", "3"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(error_class(&o), "GenerationExhausted");
    assert!(!out.exists());
    assert!(!dir.path().join("nested").exists());
}

#[test]
fn unknown_solver_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o.jsonl");
    let o = Command::new(env!("CARGO_BIN_EXE_puzzlegen"))
        .args(["generate", "--spec", s(&spec_path("graduation")), "--count", "1", "--out", s(&out)])
        .env("PUZZLEGEN_SOLVER", "z3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_class(&o), "SolverUnavailable");
    assert!(!out.exists());
}

#[test]
fn missing_input_exits_five() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["score", "--in", s(&dir.path().join("absent.jsonl")), "--out", "x", "--hist", "y"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn malformed_spec_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.spec");
    std::fs::write(&spec, "variables: [1, 2\n").unwrap();
    let o = run(&["generate", "--spec", s(&spec), "--count", "1", "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn wrong_gold_fails_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/specs/seeds");
    let ok = run(&[
        "reproduce", "--spec", s(&spec_path("vase")), "--config", s(&seeds.join("vase.config")), "--gold",
        s(&seeds.join("vase.gold")),
    ]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let gold = dir.path().join("wrong.gold");
    std::fs::write(&gold, r#"{"question": "Nobody"}"#).unwrap();
    let bad = run(&["reproduce", "--spec", s(&spec_path("vase")), "--config", s(&seeds.join("vase.config")), "--gold", s(&gold)]);
    assert_eq!(bad.status.code(), Some(2));
    assert_eq!(error_class(&bad), "ValidationFailed");
}

#[test]
fn corpus_passes_chain_together() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a = generate(d, "hamburger", 30, 1);
    let b = generate(d, "hamburger", 30, 1);
    let merged = d.join("merged.jsonl");
    let report = d.join("dups.csv");
    let o = run(&[
        "dedup", "--in", s(&a), s(&b), "--out", s(&merged), "--report", s(&report), "--spec", s(&spec_path("hamburger")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let kept = records(&merged);
    assert!(kept.len() <= 30);
    let dup_rows = std::fs::read_to_string(&report).unwrap().lines().count() - 1;
    assert!(dup_rows >= 1);

    let scored = d.join("scored.jsonl");
    let hist = d.join("hist.csv");
    let o = run(&["score", "--in", s(&merged), "--out", s(&scored), "--hist", s(&hist)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let scored_records = records(&scored);
    assert!(scored_records.iter().all(|r| r.difficulty.score.is_some_and(|x| (0.0..=1.0).contains(&x))));
    assert_eq!(std::fs::read_to_string(&hist).unwrap().lines().count(), 21);

    let split_dir = d.join("splits");
    let o = run(&["partition", "--in", s(&scored), "--seed", "9", "--out-dir", s(&split_dir)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest: Json = serde_json::from_str(&std::fs::read_to_string(split_dir.join("manifest.json")).unwrap()).unwrap();
    let total: usize = ["test", "sft", "rl_val", "rl_train"].iter().map(|n| records(&split_dir.join(format!("{n}.jsonl"))).len()).sum();
    assert_eq!(total, kept.len());
    assert_eq!(manifest["records"], kept.len());

    let pred = d.join("pred.jsonl");
    let lines: Vec<String> = kept
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let answer = if i == 0 { "Z".to_string() } else { r.answer.clone() };
            serde_json::json!({ "id": r.id, "answer": answer }).to_string()
        })
        .collect();
    std::fs::write(&pred, lines.join("\n")).unwrap();
    let graded = d.join("grades.csv");
    let o = run(&["grade", "--pred", s(&pred), "--gold", s(&merged), "--out", s(&graded)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<String> = std::fs::read_to_string(&graded).unwrap().lines().skip(1).map(String::from).collect();
    assert_eq!(rows.len(), kept.len());
    assert_eq!(rows.iter().filter(|r| r.contains(",true,")).count(), kept.len() - 1);
}
