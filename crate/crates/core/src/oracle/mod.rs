//! Language-model oracles: fill-in-the-blank probabilities, NLI
//! classification, subword tokenization and POS tagging.
//!
//! [`ScriptedOracle`] is a deterministic in-process implementation used by
//! tests and fixtures. [`RemoteOracle`] speaks the line-delimited JSON bridge
//! protocol over a child process's stdio or HTTP.

mod mock;
pub mod protocol;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

pub use mock::{Script, ScriptedCandidate, ScriptedOracle, ScriptedPair};
pub use remote::{HttpTransport, RemoteOracle, StdioTransport, Transport};

/// Blank marker in fill requests; bridges map it to their own mask token.
pub const BLANK: &str = "[BLANK]";

/// Number of fill candidates requested when not configured otherwise.
pub const DEFAULT_TOP_K: usize = 50;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("oracle timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("oracle disconnected")]
    Disconnected,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("oracle reported error: {0}")]
    Remote(String),
}

impl OracleError {
    pub fn is_retryable(&self) -> bool {
        !matches!(self, OracleError::Precondition(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillCandidate {
    pub token: String,
    pub prob: f64,
    /// Subword pieces of `token` under the classifier's tokenizer.
    pub pieces: u32,
}

/// Full three-way distribution over NLI labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub entailment: f64,
    pub neutral: f64,
    pub contradiction: f64,
}

impl LabelDistribution {
    pub const TOLERANCE: f64 = 1e-6;

    pub fn uniform() -> Self {
        let third = 1.0 / 3.0;
        Self { entailment: third, neutral: third, contradiction: third }
    }

    /// Puts `mass` on `label` and splits the rest evenly.
    pub fn peaked(label: Label, mass: f64) -> Self {
        let rest = (1.0 - mass) / 2.0;
        let mut d = Self { entailment: rest, neutral: rest, contradiction: rest };
        *d.get_mut(label) = mass;
        d
    }

    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::Entailment => self.entailment,
            Label::Neutral => self.neutral,
            Label::Contradiction => self.contradiction,
        }
    }

    fn get_mut(&mut self, label: Label) -> &mut f64 {
        match label {
            Label::Entailment => &mut self.entailment,
            Label::Neutral => &mut self.neutral,
            Label::Contradiction => &mut self.contradiction,
        }
    }

    /// Highest-probability label; ties go to the earlier label in
    /// entailment, neutral, contradiction order.
    pub fn argmax(&self) -> Label {
        let mut best = Label::Entailment;
        for label in Label::ALL {
            if self.get(label) > self.get(best) {
                best = label;
            }
        }
        best
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let values = Label::ALL.map(|l| self.get(l));
        if values.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(OracleError::Protocol(format!("invalid probabilities {self:?}")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > Self::TOLERANCE {
            return Err(OracleError::Protocol(format!("probabilities sum to {sum}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CoarseTag {
    Noun,
    Verb,
    Adj,
    Adv,
    Other,
}

pub trait Oracle: Send + Sync {
    /// Candidates for the single `[BLANK]` in `text`, most likely first.
    fn fill(&self, text_with_blank: &str, top_k: usize) -> Result<Vec<FillCandidate>, OracleError>;

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<LabelDistribution, OracleError>;

    fn tokenize(&self, word: &str) -> Result<Vec<String>, OracleError>;

    fn tag(&self, tokens: &[String]) -> Result<Vec<CoarseTag>, OracleError>;
}

pub(crate) fn check_blank(text: &str) -> Result<(), OracleError> {
    match text.matches(BLANK).count() {
        1 => Ok(()),
        n => Err(OracleError::Precondition(format!(
            "fill text must contain exactly one {BLANK}, found {n}"
        ))),
    }
}

pub(crate) fn check_word(word: &str) -> Result<(), OracleError> {
    if word.trim().is_empty() {
        return Err(OracleError::Precondition("tokenize requires a non-empty word".into()));
    }
    Ok(())
}

pub(crate) fn check_candidates(candidates: &[FillCandidate]) -> Result<(), OracleError> {
    for c in candidates {
        if !(0.0..=1.0).contains(&c.prob) || c.pieces == 0 || c.token.is_empty() {
            return Err(OracleError::Protocol(format!("invalid fill candidate {c:?}")));
        }
    }
    Ok(())
}

/// Sorts by probability descending, ties by token, and keeps `top_k`.
pub fn rank_candidates(mut candidates: Vec<FillCandidate>, top_k: usize) -> Vec<FillCandidate> {
    candidates.sort_by(|a, b| b.prob.total_cmp(&a.prob).then_with(|| a.token.cmp(&b.token)));
    candidates.truncate(top_k);
    candidates
}
