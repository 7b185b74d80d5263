//! Wire messages of the bridge protocol and a line-oriented server loop.
//!
//! Requests: `{"id": u64, "op": "fill"|"classify"|"tokenize"|"tag", ...}`.
//! Responses carry the request id plus one of `candidates`, `probs`,
//! `pieces`, `tags`, or `error`.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{CoarseTag, FillCandidate, LabelDistribution, Oracle, OracleError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    #[serde(flatten)]
    pub body: RequestBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum RequestBody {
    Fill { text: String, top_k: usize },
    Classify { premise: String, hypothesis: String },
    Tokenize { text: String },
    Tag { tokens: Vec<String> },
}

impl RequestBody {
    pub fn op(&self) -> &'static str {
        match self {
            RequestBody::Fill { .. } => "fill",
            RequestBody::Classify { .. } => "classify",
            RequestBody::Tokenize { .. } => "tokenize",
            RequestBody::Tag { .. } => "tag",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<FillCandidate>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<LabelDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<CoarseTag>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn error(id: u64, message: impl Into<String>) -> Self {
        Self { id, error: Some(message.into()), ..Self::default() }
    }

    /// Parses a response line. A line that is valid JSON with an id but an
    /// unexpected shape becomes an error response for that id.
    pub fn parse(line: &str) -> Option<Response> {
        match serde_json::from_str::<Response>(line) {
            Ok(r) => Some(r),
            Err(e) => {
                let id = serde_json::from_str::<Value>(line).ok()?.get("id")?.as_u64()?;
                Some(Response::error(id, format!("malformed response: {e}")))
            }
        }
    }
}

/// Answers one request with `oracle`.
pub fn dispatch(oracle: &dyn Oracle, request: &Request) -> Response {
    let id = request.id;
    let result = match &request.body {
        RequestBody::Fill { text, top_k } => oracle
            .fill(text, *top_k)
            .map(|c| Response { id, candidates: Some(c), ..Default::default() }),
        RequestBody::Classify { premise, hypothesis } => oracle
            .classify(premise, hypothesis)
            .map(|p| Response { id, probs: Some(p), ..Default::default() }),
        RequestBody::Tokenize { text } => oracle
            .tokenize(text)
            .map(|p| Response { id, pieces: Some(p), ..Default::default() }),
        RequestBody::Tag { tokens } => oracle
            .tag(tokens)
            .map(|t| Response { id, tags: Some(t), ..Default::default() }),
    };
    result.unwrap_or_else(|e: OracleError| Response::error(id, e.to_string()))
}

/// Serves requests line by line until `input` ends.
pub fn serve_lines(oracle: &dyn Oracle, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<Request>(&line) {
            Ok(request) => dispatch(oracle, &request),
            Err(e) => {
                let id = serde_json::from_str::<Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(Value::as_u64))
                    .unwrap_or(0);
                Response::error(id, format!("bad request: {e}"))
            }
        };
        serde_json::to_writer(&mut output, &response)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::oracle::ScriptedOracle;

    #[test]
    fn request_wire_format() {
        let req = Request {
            id: 7,
            body: RequestBody::Fill { text: "a [BLANK].".into(), top_k: 5 },
        };
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"id":7,"op":"fill","text":"a [BLANK].","top_k":5}"#
        );
        let tag: Request = serde_json::from_str(r#"{"id":1,"op":"tag","tokens":["a","dog"]}"#).unwrap();
        assert_eq!(tag.body, RequestBody::Tag { tokens: vec!["a".into(), "dog".into()] });
    }

    #[test]
    fn response_wire_format() {
        let r = Response {
            id: 3,
            probs: Some(LabelDistribution::peaked(Label::Neutral, 0.5)),
            ..Default::default()
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"id":3,"probs":{"entailment":0.25,"neutral":0.5,"contradiction":0.25}}"#
        );
        let tags = Response::parse(r#"{"id":2,"tags":["NOUN","ADV"]}"#).unwrap();
        assert_eq!(tags.tags, Some(vec![CoarseTag::Noun, CoarseTag::Adv]));
        let bad = Response::parse(r#"{"id":9,"tags":["NOUNISH"]}"#).unwrap();
        assert_eq!(bad.id, 9);
        assert!(bad.error.unwrap().starts_with("malformed"));
        assert!(Response::parse("garbage").is_none());
    }

    #[test]
    fn serve_answers_each_line() {
        let oracle = ScriptedOracle::new(Default::default());
        let input = concat!(
            r#"{"id":1,"op":"classify","premise":"a","hypothesis":"b"}"#,
            "\n",
            r#"{"id":2,"op":"fill","text":"no blank","top_k":3}"#,
            "\n",
            "not json\n",
        );
        let mut out = Vec::new();
        serve_lines(&oracle, input.as_bytes(), &mut out).unwrap();
        let lines: Vec<Response> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| Response::parse(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0].probs, Some(LabelDistribution::uniform()));
        assert_eq!(lines[1].id, 2);
        assert!(lines[1].error.is_some());
        assert_eq!(lines[2].id, 0);
        assert!(lines[2].error.is_some());
    }
}
