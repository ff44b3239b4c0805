use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn attest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attest")).args(args).output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn indexed(dir: &Path) -> PathBuf {
    let idx = dir.join("idx");
    let out = ok(attest(&["index", "--corpus", s(&fixture("corpus.jsonl")), "--out", s(&idx)]));
    assert!(out.starts_with("indexed 4 documents"), "{out}");
    idx
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn eval_report_matches_the_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let idx = indexed(dir.path());
    let report = dir.path().join("report.json");
    let stdout = ok(attest(&[
        "eval",
        "--pred",
        s(&fixture("predictions.jsonl")),
        "--gold",
        s(&fixture("gold.jsonl")),
        "--index",
        s(&idx),
        "--out",
        s(&report),
    ]));
    let golden = fs::read_to_string(fixture("expected_report.txt")).unwrap();
    assert_eq!(stdout, golden);
    assert_eq!(fs::read_to_string(report.with_extension("txt")).unwrap(), golden);

    // q1: one claim citing a supporting and an irrelevant document;
    // q2: one fully supported claim and one unsupported claim
    let json: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["means"]["citation_recall"], 0.75);
    assert_eq!(json["means"]["citation_precision"], 0.5);
    assert_eq!(json["means"]["citation_f1"], 0.6);
    assert_eq!(json["means"]["exact_match"], 0.5);
    assert_eq!(json["counts"]["judge_calls"], 6);

    // the saved report renders to the same table
    assert_eq!(ok(attest(&["report", "--report", s(&report)])), golden);
}

#[test]
fn run_writes_responses_and_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let idx = indexed(dir.path());
    let out = dir.path().join("out.jsonl");
    let (questions, script) = (fixture("questions.jsonl"), fixture("script.jsonl"));
    let args = [
        "run",
        "--question-file",
        s(&questions),
        "--index",
        s(&idx),
        "--script",
        s(&script),
        "--out",
        s(&out),
        "--workers",
        "2",
    ];
    ok(attest(&args));
    let records = read_jsonl(&out);
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["question_id"], "q1");
    assert_eq!(records[0]["units"][0]["citations"], serde_json::json!(["c1"]));
    assert!(records.iter().all(|r| r["units"][0]["verified"] == true && r.get("trace").is_none()));

    let manifest_path = dir.path().join("out.jsonl.manifest.json");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest["command"], "run");
    assert_eq!(manifest["index_stats"]["document_count"], 4);
    assert_eq!(manifest["index_fingerprint"].as_str().unwrap().len(), 64);
    assert!(manifest["questions"].as_array().unwrap().iter().all(|q| q["status"] == "ok"));

    // a rerun reproduces the output bytes
    let first = fs::read(&out).unwrap();
    ok(attest(&args));
    assert_eq!(fs::read(&out).unwrap(), first);

    // traces are kept on request and the scored output is fully cited
    let traced = dir.path().join("traced.jsonl");
    let mut with_trace: Vec<&str> = args.to_vec();
    with_trace[8] = s(&traced);
    with_trace.push("--trace");
    ok(attest(&with_trace));
    assert!(read_jsonl(&traced).iter().all(|r| r["trace"]["events"].is_array()));
    let report = dir.path().join("r.json");
    ok(attest(&["eval", "--pred", s(&traced), "--index", s(&idx), "--out", s(&report)]));
    let json: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!((json["means"]["citation_recall"].as_f64(), json["means"]["citation_precision"].as_f64()), (Some(1.0), Some(1.0)));
}

#[test]
fn baseline_runs_through_the_same_batch_path() {
    let dir = tempfile::tempdir().unwrap();
    let idx = indexed(dir.path());
    let script = dir.path().join("vanilla.jsonl");
    fs::write(
        &script,
        "{\"question_id\":\"q1\",\"completions\":[\"Coffee lowers the risk of type 2 diabetes [1].\"]}\n\
         {\"question_id\":\"q2\",\"completions\":[\"Green tea contains antioxidants [1].\"]}\n",
    )
    .unwrap();
    let out = dir.path().join("vanilla.out.jsonl");
    ok(attest(&[
        "baseline",
        "--system",
        "vanilla",
        "--question-file",
        s(&fixture("questions.jsonl")),
        "--index",
        s(&idx),
        "--script",
        s(&script),
        "--out",
        s(&out),
    ]));
    let records = read_jsonl(&out);
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["units"][0]["claim"], "Coffee lowers the risk of type 2 diabetes.");
    assert_eq!(records[0]["token_usage"]["completion_calls"], 1);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("vanilla.out.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "baseline:vanilla");
}

#[test]
fn failed_questions_exit_with_status_three() {
    let dir = tempfile::tempdir().unwrap();
    let idx = indexed(dir.path());
    let script = dir.path().join("partial.jsonl");
    // q2 has no scripted completions
    fs::write(&script, fs::read_to_string(fixture("script.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    let out = dir.path().join("out.jsonl");
    let result = attest(&[
        "run",
        "--question-file",
        s(&fixture("questions.jsonl")),
        "--index",
        s(&idx),
        "--script",
        s(&script),
        "--out",
        s(&out),
    ]);
    assert_eq!(result.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&result.stderr).contains("question q2 failed"));
    assert_eq!(read_jsonl(&out).len(), 1);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["questions"][1]["status"], "failed");
}

#[test]
fn usage_and_input_errors() {
    let missing_index = attest(&["run", "--question-file", "q.jsonl", "--out", "o.jsonl"]);
    assert_eq!(missing_index.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_index.stderr).contains("--index"));

    let dir = tempfile::tempdir().unwrap();
    let no_corpus = attest(&["index", "--corpus", s(&dir.path().join("nope.jsonl")), "--out", s(&dir.path().join("i"))]);
    assert_eq!(no_corpus.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&no_corpus.stderr).starts_with("error:"));

    let idx = indexed(dir.path());
    let bad_config = dir.path().join("bad.toml");
    fs::write(&bad_config, "[engine]\nT = -1\n").unwrap();
    let result = attest(&[
        "run",
        "--question-file",
        s(&fixture("questions.jsonl")),
        "--index",
        s(&idx),
        "--config",
        s(&bad_config),
        "--out",
        s(&dir.path().join("o.jsonl")),
    ]);
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stderr).contains("engine.max_trials"));
}
