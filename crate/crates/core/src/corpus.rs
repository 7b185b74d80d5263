//! Line-delimited JSON corpora: SNLI-style input and augmented dataset output.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Read { path: PathBuf, source: io::Error },
    #[error("write to {path} failed (file may be partial): {source}")]
    Write { path: PathBuf, source: io::Error },
    #[error("cannot serialize record for {path}: {source}")]
    Serialize {
        path: PathBuf,
        source: serde_json::Error,
    },
}

/// Three-way NLI label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entailment,
    Neutral,
    Contradiction,
}

impl Label {
    /// Fixed order used for iteration and argmax tie-breaking.
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Neutral, Label::Contradiction];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Neutral => "neutral",
            Label::Contradiction => "contradiction",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entailment" => Ok(Label::Entailment),
            "neutral" => Ok(Label::Neutral),
            "contradiction" => Ok(Label::Contradiction),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

/// One premise/hypothesis/label record of the source corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NliExample {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Original,
    Replacement,
}

/// An emitted training or test record. Field order is the on-disk field order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedExample {
    pub id: String,
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
    pub defined_word: Option<String>,
    pub original_word: Option<String>,
    pub definition_text: Option<String>,
    pub origin: Origin,
    pub verified: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    MalformedJson,
    MissingFields,
    /// Gold label "-": annotators did not reach a majority.
    NoGoldLabel,
    UnknownLabel,
    EmptySentence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkipRecord {
    /// Zero-based line index.
    pub line: usize,
    pub reason: SkipReason,
}

/// Streaming reader over a corpus file. I/O failures are yielded as errors;
/// unusable records are skipped and recorded.
pub struct CorpusReader<R> {
    lines: io::Lines<R>,
    path: PathBuf,
    line: usize,
    skipped: Vec<SkipRecord>,
}

pub fn read_corpus(path: &Path) -> Result<CorpusReader<BufReader<File>>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(CorpusReader::new(BufReader::new(file), path))
}

/// Reads a whole corpus into memory, returning examples and skips.
pub fn read_corpus_all(path: &Path) -> Result<(Vec<NliExample>, Vec<SkipRecord>), CorpusError> {
    let mut reader = read_corpus(path)?;
    let examples = reader.by_ref().collect::<Result<Vec<_>, _>>()?;
    Ok((examples, reader.skipped))
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(inner: R, path: &Path) -> Self {
        Self {
            lines: inner.lines(),
            path: path.to_path_buf(),
            line: 0,
            skipped: Vec::new(),
        }
    }

    pub fn skipped(&self) -> &[SkipRecord] {
        &self.skipped
    }

    pub fn into_skipped(self) -> Vec<SkipRecord> {
        self.skipped
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<NliExample, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(source) => {
                    return Some(Err(CorpusError::Read {
                        path: self.path.clone(),
                        source,
                    }))
                }
            };
            let index = self.line;
            self.line += 1;
            if line.trim().is_empty() {
                continue;
            }
            match parse_record(&line, index) {
                Ok(example) => return Some(Ok(example)),
                Err(reason) => self.skipped.push(SkipRecord { line: index, reason }),
            }
        }
    }
}

fn parse_record(line: &str, index: usize) -> Result<NliExample, SkipReason> {
    let value: Value = serde_json::from_str(line).map_err(|_| SkipReason::MalformedJson)?;
    let obj = value.as_object().ok_or(SkipReason::MalformedJson)?;
    let text = |key: &str| obj.get(key).and_then(Value::as_str);

    let (premise, hypothesis, label) =
        if let (Some(p), Some(h)) = (text("sentence1"), text("sentence2")) {
            (p, h, text("gold_label"))
        } else if let (Some(p), Some(h)) = (text("premise"), text("hypothesis")) {
            (p, h, text("label"))
        } else {
            return Err(SkipReason::MissingFields);
        };
    let label = match label {
        None => return Err(SkipReason::MissingFields),
        Some("-") => return Err(SkipReason::NoGoldLabel),
        Some(l) => l.parse::<Label>().map_err(|_| SkipReason::UnknownLabel)?,
    };
    if premise.trim().is_empty() || hypothesis.trim().is_empty() {
        return Err(SkipReason::EmptySentence);
    }
    let id = match obj.get("id").or_else(|| obj.get("pairID")) {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => index.to_string(),
    };
    Ok(NliExample {
        id,
        premise: premise.to_string(),
        hypothesis: hypothesis.to_string(),
        label,
    })
}

/// Writes records as one JSON object per line (LF), returning the count.
pub fn write_jsonl<T, I>(records: I, path: &Path) -> Result<usize, CorpusError>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let write_err = |source| CorpusError::Write {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(write_err)?;
    let mut out = BufWriter::new(file);
    let mut count = 0;
    for record in records {
        serde_json::to_writer(&mut out, &record).map_err(|source| CorpusError::Serialize {
            path: path.to_path_buf(),
            source,
        })?;
        out.write_all(b"\n").map_err(write_err)?;
        count += 1;
    }
    out.flush().map_err(write_err)?;
    Ok(count)
}

pub fn write_dataset<'a, I>(examples: I, path: &Path) -> Result<usize, CorpusError>
where
    I: IntoIterator<Item = &'a AugmentedExample>,
{
    write_jsonl(examples, path)
}

/// Reads a dataset file previously produced by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<Vec<AugmentedExample>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| CorpusError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let example = serde_json::from_str(&line).map_err(|e| CorpusError::Read {
            path: path.to_path_buf(),
            source: io::Error::new(io::ErrorKind::InvalidData, e),
        })?;
        out.push(example);
    }
    Ok(out)
}
