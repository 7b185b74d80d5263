mod common;

use std::io::{BufReader, Write};
use std::thread;
use std::time::Duration;

use defaug::critical::{scan_corpus, CriticalParams};
use defaug::morphology::Morphology;
use defaug::oracle::protocol::{serve_lines, Request, RequestBody, Response};
use defaug::oracle::{Oracle, RemoteOracle, ScriptedOracle, StdioTransport};
use defaug::par::Parallelism;

use common::brute_force_fixture;

fn served(script: defaug::oracle::Script) -> RemoteOracle<StdioTransport> {
    let (to_server_rx, to_server_tx) = std::io::pipe().unwrap();
    let (from_server_rx, from_server_tx) = std::io::pipe().unwrap();
    thread::spawn(move || {
        let oracle = ScriptedOracle::new(script);
        serve_lines(&oracle, BufReader::new(to_server_rx), from_server_tx).unwrap();
    });
    RemoteOracle::new(
        StdioTransport::from_streams(BufReader::new(from_server_rx), to_server_tx),
        Duration::from_secs(10),
    )
}

#[test]
fn remote_scan_equals_local_scan() {
    let (corpus, script) = brute_force_fixture(5);
    let local = ScriptedOracle::new(script.clone());
    let remote = served(script);
    let morphology = Morphology::default();
    let params = CriticalParams::default();
    let a = scan_corpus(&corpus, &local, &morphology, &params, Parallelism::SEQUENTIAL);
    let b = scan_corpus(&corpus, &remote, &morphology, &params, Parallelism(4));
    assert!(b.failed.is_empty());
    assert_eq!(a.reports, b.reports);
}

#[test]
fn every_op_round_trips() {
    let (_, script) = brute_force_fixture(6);
    let text = script.fills.keys().next().unwrap().clone();
    let local = ScriptedOracle::new(script.clone());
    let remote = served(script);
    assert_eq!(remote.fill(&text, 3).unwrap(), local.fill(&text, 3).unwrap());
    let d = remote.classify("A dog runs.", "An animal moves.").unwrap();
    d.validate().unwrap();
    assert!((d.entailment + d.neutral + d.contradiction - 1.0).abs() < 1e-6);
    assert_eq!(remote.tokenize("fountain").unwrap(), ["fountain"]);
    let tokens: Vec<String> = ["A", "dog", "runs", "."].iter().map(|s| s.to_string()).collect();
    assert_eq!(remote.tag(&tokens).unwrap(), local.tag(&tokens).unwrap());
}

#[test]
fn server_answers_garbage_with_errors() {
    let oracle = ScriptedOracle::new(Default::default());
    let request = serde_json::to_string(&Request {
        id: 7,
        body: RequestBody::Tokenize { text: "glass".into() },
    })
    .unwrap();
    let input = format!("not json\n{{\"id\": 3, \"op\": \"explode\"}}\n{request}\n");
    let mut output = Vec::new();
    serve_lines(&oracle, input.as_bytes(), &mut output).unwrap();
    output.flush().unwrap();
    let responses: Vec<Response> = String::from_utf8(output)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(responses.len(), 3);
    assert!(responses[0].error.is_some());
    assert_eq!(responses[1].id, 3);
    assert!(responses[1].error.is_some());
    assert_eq!(responses[2].id, 7);
    assert_eq!(responses[2].pieces.as_deref(), Some(&["glass".to_string()][..]));
}
