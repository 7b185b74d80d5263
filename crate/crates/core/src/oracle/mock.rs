use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    check_blank, check_word, rank_candidates, CoarseTag, FillCandidate, LabelDistribution, Oracle,
    OracleError,
};
use crate::corpus::Label;
use crate::morphology::builtin_tags;

/// Probability mass given to the scripted label by the `label` shorthand.
const PEAK: f64 = 0.8;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedCandidate {
    pub token: String,
    pub prob: f64,
    /// Defaults to the mock tokenizer's piece count for `token`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedPair {
    pub premise: String,
    pub hypothesis: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<LabelDistribution>,
    /// Shorthand for a distribution peaked on this label.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

/// Scripted oracle behaviour, loadable from JSON.
///
/// Unscripted fills return no candidates; unscripted pairs classify to
/// `default_probs` (uniform when absent). Tokenization uses `tokenize`
/// overrides, then `vocab` (words outside it split per character), and
/// without a vocabulary every word is a single piece.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Script {
    pub fills: HashMap<String, Vec<ScriptedCandidate>>,
    pub classify: Vec<ScriptedPair>,
    pub tokenize: HashMap<String, Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocab: Option<BTreeSet<String>>,
    pub tags: HashMap<String, CoarseTag>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub default_probs: Option<LabelDistribution>,
    /// Fill texts that produce an error instead of candidates.
    pub fail_fills: Vec<String>,
}

impl Script {
    pub fn with_fill(mut self, text: impl Into<String>, candidates: &[(&str, f64)]) -> Self {
        self.fills.insert(
            text.into(),
            candidates
                .iter()
                .map(|(t, p)| ScriptedCandidate { token: t.to_string(), prob: *p, pieces: None })
                .collect(),
        );
        self
    }

    pub fn with_label(mut self, premise: impl Into<String>, hypothesis: impl Into<String>, label: Label) -> Self {
        self.classify.push(ScriptedPair {
            premise: premise.into(),
            hypothesis: hypothesis.into(),
            probs: None,
            label: Some(label),
        });
        self
    }

    pub fn with_pieces(mut self, word: impl Into<String>, pieces: &[&str]) -> Self {
        self.tokenize
            .insert(word.into(), pieces.iter().map(|p| p.to_string()).collect());
        self
    }
}

pub struct ScriptedOracle {
    script: Script,
    pairs: HashMap<(String, String), LabelDistribution>,
    fail_fills: HashSet<String>,
    fail_all: bool,
}

impl ScriptedOracle {
    pub fn new(script: Script) -> Self {
        let pairs = script
            .classify
            .iter()
            .map(|p| {
                let dist = p
                    .probs
                    .or_else(|| p.label.map(|l| LabelDistribution::peaked(l, PEAK)))
                    .unwrap_or_else(LabelDistribution::uniform);
                ((p.premise.clone(), p.hypothesis.clone()), dist)
            })
            .collect();
        let fail_fills = script.fail_fills.iter().cloned().collect();
        Self { script, pairs, fail_fills, fail_all: false }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let script: Script =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Self::new(script))
    }

    /// An oracle whose every call fails, for exercising error paths.
    pub fn failing() -> Self {
        Self { fail_all: true, ..Self::new(Script::default()) }
    }

    pub fn script(&self) -> &Script {
        &self.script
    }

    fn check_alive(&self) -> Result<(), OracleError> {
        if self.fail_all {
            return Err(OracleError::Transport("scripted failure".into()));
        }
        Ok(())
    }

    fn pieces_of(&self, word: &str) -> Vec<String> {
        if let Some(p) = self
            .script
            .tokenize
            .get(word)
            .or_else(|| self.script.tokenize.get(&word.to_lowercase()))
        {
            return p.clone();
        }
        match &self.script.vocab {
            Some(vocab) if !vocab.contains(&word.to_lowercase()) => {
                word.chars().map(String::from).collect()
            }
            _ => vec![word.to_string()],
        }
    }
}

impl Oracle for ScriptedOracle {
    fn fill(&self, text_with_blank: &str, top_k: usize) -> Result<Vec<FillCandidate>, OracleError> {
        self.check_alive()?;
        check_blank(text_with_blank)?;
        if self.fail_fills.contains(text_with_blank) {
            return Err(OracleError::Remote(format!("scripted fill failure for {text_with_blank:?}")));
        }
        let candidates = self
            .script
            .fills
            .get(text_with_blank)
            .map(|cs| {
                cs.iter()
                    .map(|c| FillCandidate {
                        token: c.token.clone(),
                        prob: c.prob,
                        pieces: c.pieces.unwrap_or_else(|| self.pieces_of(&c.token).len() as u32),
                    })
                    .collect()
            })
            .unwrap_or_default();
        Ok(rank_candidates(candidates, top_k))
    }

    fn classify(&self, premise: &str, hypothesis: &str) -> Result<LabelDistribution, OracleError> {
        self.check_alive()?;
        if premise.trim().is_empty() || hypothesis.trim().is_empty() {
            return Err(OracleError::Precondition("classify requires non-empty texts".into()));
        }
        Ok(self
            .pairs
            .get(&(premise.to_string(), hypothesis.to_string()))
            .copied()
            .or(self.script.default_probs)
            .unwrap_or_else(LabelDistribution::uniform))
    }

    fn tokenize(&self, word: &str) -> Result<Vec<String>, OracleError> {
        self.check_alive()?;
        check_word(word)?;
        Ok(self.pieces_of(word))
    }

    fn tag(&self, tokens: &[String]) -> Result<Vec<CoarseTag>, OracleError> {
        self.check_alive()?;
        let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
        let mut tags = builtin_tags(&refs);
        for (tag, token) in tags.iter_mut().zip(tokens) {
            if let Some(t) = self.script.tags.get(&token.to_lowercase()) {
                *tag = *t;
            }
        }
        Ok(tags)
    }
}
