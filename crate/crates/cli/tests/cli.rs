mod support;

use std::fs;

use defaug::corpus::read_dataset;
use support::{defaug, defaug_with_oracle, fixture, manifest, snapshot, stderr, Workspace};

#[test]
fn index_builds_then_reuses() {
    let ws = Workspace::new();
    let simple = ws.simple();
    let out = defaug(&["index", "--simple-english", simple.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("built index"));
    assert!(ws.path("simple_wiktionary.xml.idx").is_file());
    let again = defaug(&["index", "--simple-english", simple.to_str().unwrap()]);
    assert!(stderr(&again).contains("reused existing index"));
    let missing = defaug(&["index", "--english", ws.path("nope.xml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("does not exist"));
}

#[test]
fn find_critical_over_stdio_bridge() {
    let ws = Workspace::new();
    let reports = ws.path("reports.jsonl");
    let out = defaug(&[
        "find-critical",
        "--corpus",
        fixture("nli_test.jsonl").to_str().unwrap(),
        "--out",
        reports.to_str().unwrap(),
        "--jobs",
        "3",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let lines: Vec<serde_json::Value> = fs::read_to_string(&reports)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let words: Vec<&str> = lines.iter().map(|l| l["surface"].as_str().unwrap()).collect();
    assert_eq!(words, ["fountain", "train", "cat"]);
    assert!(stderr(&out).contains("5 examples scanned, 3 with critical words, 3 reports, 0 skipped"));
}

#[test]
fn find_critical_on_empty_corpus() {
    let ws = Workspace::new();
    fs::write(ws.path("empty.jsonl"), "").unwrap();
    let out = defaug(&[
        "find-critical",
        "--corpus",
        ws.path("empty.jsonl").to_str().unwrap(),
        "--out",
        ws.path("r.jsonl").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(ws.path("r.jsonl")).unwrap(), "");
    assert!(stderr(&out).contains("0 examples scanned, 0 with critical words, 0 reports, 0 skipped"));
}

#[test]
fn unreachable_oracle_fails_with_runtime_code() {
    let ws = Workspace::new();
    let (corpus, reports) = (fixture("nli_test.jsonl"), ws.path("r.jsonl"));
    let args = [
        "find-critical",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        reports.to_str().unwrap(),
        "--timeout-secs",
        "5",
    ];
    let exits_at_once = defaug_with_oracle(&args, "false");
    assert_eq!(exits_at_once.status.code(), Some(2));
    assert!(stderr(&exits_at_once).contains("not reachable"), "{}", stderr(&exits_at_once));
    let missing = defaug_with_oracle(&args, "/definitely/not/a/bridge");
    assert_eq!(missing.status.code(), Some(2));
    assert!(stderr(&missing).contains("cannot start bridge"));
}

#[test]
fn build_counts_match_fixture() {
    let ws = Workspace::new();
    let out = ws.build("out", 5, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let dir = ws.path("out");
    let m = manifest(&dir);
    assert_eq!(m["splits"]["test"]["examples_read"], 5);
    assert_eq!(m["splits"]["test"]["with_critical"], 3);
    assert_eq!(m["splits"]["test"]["pairs"], 2);
    assert_eq!(m["splits"]["test"]["drops"]["missing_definition"], 1);
    assert_eq!(m["splits"]["test"]["drops"]["no_critical_word"], 2);
    assert_eq!(m["splits"]["train"]["unreadable_lines"], 1);
    assert_eq!(m["splits"]["train"]["pairs"], 2);
    assert_eq!(m["files"]["test.all.text.full.jsonl"]["examples"], 4);
    assert_eq!(m["files"]["test.all.text.verified.jsonl"]["examples"], 2);
    assert_eq!(m["files"]["test.all.text.new.jsonl"]["examples"], 1);
    assert_eq!(m["files"]["test.all.text.multi.jsonl"]["examples"], 1);
    assert!(dir.join("test.all.substitution.full.jsonl").is_file());
    assert!(!dir.join("test.none.substitution.full.jsonl").exists());
    let sub = read_dataset(&dir.join("test.all.substitution.verified.jsonl")).unwrap();
    assert!(sub[0].premise.ends_with(" means: fountain."));
}

#[test]
fn rebuild_is_byte_identical() {
    let ws = Workspace::new();
    assert!(ws.build("a", 99, &["--jobs", "1"]).status.success());
    assert!(ws.build("b", 99, &["--jobs", "4"]).status.success());
    assert_eq!(snapshot(&ws.path("a")), snapshot(&ws.path("b")));
    assert!(ws.build("c", 100, &[]).status.success());
    let a = read_dataset(&ws.path("a/test.all.text.full.jsonl")).unwrap();
    let c = read_dataset(&ws.path("c/test.all.text.full.jsonl")).unwrap();
    assert_eq!(a.len(), c.len());
    assert!(a.iter().zip(&c).all(|(x, y)| x.label == y.label && x.id == y.id));
    assert!(a.iter().zip(&c).all(|(x, y)| x.defined_word != y.defined_word));
}

#[test]
fn config_file_and_flag_precedence() {
    let ws = Workspace::new();
    let config = serde_json::json!({
        "train": fixture("nli_train.jsonl"),
        "test": fixture("nli_test.jsonl"),
        "simple_english": ws.simple(),
        "english": ws.english(),
        "seed": 1,
        "scramble": ["all"],
        "definitions": ["text", "substitution"],
        "output_dir": ws.path("from_config"),
    });
    fs::write(ws.path("run.json"), config.to_string()).unwrap();
    let out = defaug(&[
        "build",
        "--config",
        ws.path("run.json").to_str().unwrap(),
        "--definitions",
        "text",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let files: Vec<String> = snapshot(&ws.path("from_config")).into_keys().collect();
    assert!(files.contains(&"test.all.text.full.jsonl".to_string()));
    assert!(!files.iter().any(|f| f.contains("substitution") || f.contains(".none.")));
    assert_eq!(manifest(&ws.path("from_config"))["seed"], 1);
}

#[test]
fn usage_errors_exit_with_one() {
    let ws = Workspace::new();
    let no_seed = defaug(&[
        "build",
        "--test",
        fixture("nli_test.jsonl").to_str().unwrap(),
        "--simple-english",
        ws.simple().to_str().unwrap(),
        "--output-dir",
        ws.path("o").to_str().unwrap(),
    ]);
    assert_eq!(no_seed.status.code(), Some(1));
    assert!(stderr(&no_seed).contains("seed"));
    assert_eq!(defaug(&["frobnicate"]).status.code(), Some(1));
    let bad_config = ws.path("bad.json");
    fs::write(&bad_config, r#"{"seeed": 3}"#).unwrap();
    let out = defaug(&["build", "--config", bad_config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stats_agree_with_manifest() {
    let ws = Workspace::new();
    assert!(ws.build("out", 3, &["--scramble", "all,half", "--definitions", "text"]).status.success());
    let out = defaug(&["stats", ws.path("out").to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let table = String::from_utf8(out.stdout).unwrap();
    let m = manifest(&ws.path("out"));
    for (name, summary) in m["files"].as_object().unwrap() {
        let row = table.lines().find(|l| l.starts_with(name.as_str())).unwrap();
        let examples: u64 = row.split_whitespace().nth(1).unwrap().parse().unwrap();
        assert_eq!(examples, summary["examples"].as_u64().unwrap());
    }
    assert!(table.contains("simple_english="));
    fs::create_dir(ws.path("empty")).unwrap();
    let empty = defaug(&["stats", ws.path("empty").to_str().unwrap()]);
    assert_eq!(empty.status.code(), Some(2));
}
