//! Critical words: a word is critical when some plausible single-subword
//! replacement (fill probability above a threshold) changes the
//! classifier's argmax label. Only words occurring once in the example are
//! considered.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Label, NliExample};
use crate::morphology::{splice, tokenize_words, Morphology, MorphologyError, Pos, Token};
use crate::oracle::{Oracle, OracleError, BLANK, DEFAULT_TOP_K};
use crate::par::{map_ordered, Parallelism};

pub const DEFAULT_THRESHOLD: f64 = 0.05;

#[derive(Debug, Error)]
pub enum CriticalError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Morphology(#[from] MorphologyError),
    #[error("report for {0} has no flips")]
    NoFlips(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentence {
    Premise,
    Hypothesis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flip {
    pub replacement_token: String,
    pub prob: f64,
    pub flipped_label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalWordReport {
    pub example_id: String,
    pub sentence: Sentence,
    /// Index into `tokenize_words` of the sentence.
    pub word_index: usize,
    pub surface: String,
    pub lemma: String,
    pub pos: Pos,
    /// Classifier argmax on the unmodified example.
    pub original_label: Label,
    /// Most probable first; equal probabilities ordered by token.
    pub flips: Vec<Flip>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalParams {
    /// Replacements need fill probability strictly above this.
    pub threshold: f64,
    pub top_k: usize,
}

impl Default for CriticalParams {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, top_k: DEFAULT_TOP_K }
    }
}

/// A word position eligible for the critical-word test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Candidate<'a> {
    pub sentence: Sentence,
    pub index: usize,
    pub token: Token<'a>,
}

/// Alphabetic words occurring exactly once (case-insensitively) across
/// premise and hypothesis, premise first.
pub fn candidate_words(example: &NliExample) -> Vec<Candidate<'_>> {
    let premise = tokenize_words(&example.premise);
    let hypothesis = tokenize_words(&example.hypothesis);
    let mut counts: HashMap<String, usize> = HashMap::new();
    for t in premise.iter().chain(&hypothesis) {
        *counts.entry(t.text.to_lowercase()).or_default() += 1;
    }
    fn tagged(sentence: Sentence, tokens: Vec<Token<'_>>) -> impl Iterator<Item = Candidate<'_>> {
        tokens
            .into_iter()
            .enumerate()
            .map(move |(index, token)| Candidate { sentence, index, token })
    }
    tagged(Sentence::Premise, premise)
        .chain(tagged(Sentence::Hypothesis, hypothesis))
        .filter(|c| c.token.is_alphabetic() && counts[&c.token.text.to_lowercase()] == 1)
        .collect()
}

fn sentence_text(example: &NliExample, sentence: Sentence) -> &str {
    match sentence {
        Sentence::Premise => &example.premise,
        Sentence::Hypothesis => &example.hypothesis,
    }
}

/// The example with the word at `token` replaced, as (premise, hypothesis).
pub fn with_replacement(example: &NliExample, sentence: Sentence, token: &Token<'_>, word: &str) -> (String, String) {
    let edited = splice(sentence_text(example, sentence), token.start, token.end, word);
    match sentence {
        Sentence::Premise => (edited, example.hypothesis.clone()),
        Sentence::Hypothesis => (example.premise.clone(), edited),
    }
}

/// Text sent to the fill oracle: both sentences, space-joined, with the
/// whole word blanked.
pub fn fill_context(example: &NliExample, sentence: Sentence, token: &Token<'_>) -> String {
    let (premise, hypothesis) = with_replacement(example, sentence, token, BLANK);
    format!("{premise} {hypothesis}")
}

fn is_word(token: &str) -> bool {
    !token.is_empty() && token.chars().all(char::is_alphabetic)
}

pub fn find_critical_words(
    example: &NliExample,
    oracle: &dyn Oracle,
    morphology: &Morphology,
    params: &CriticalParams,
) -> Result<Vec<CriticalWordReport>, CriticalError> {
    let original_label = oracle.classify(&example.premise, &example.hypothesis)?.argmax();
    let mut reports = Vec::new();
    for candidate in candidate_words(example) {
        let surface = candidate.token.text;
        let context = fill_context(example, candidate.sentence, &candidate.token);
        let mut flips = Vec::new();
        for fill in oracle.fill(&context, params.top_k)? {
            if !(fill.prob > params.threshold
                && fill.pieces == 1
                && is_word(&fill.token)
                && fill.token.to_lowercase() != surface.to_lowercase())
            {
                continue;
            }
            let (premise, hypothesis) =
                with_replacement(example, candidate.sentence, &candidate.token, &fill.token);
            let label = oracle.classify(&premise, &hypothesis)?.argmax();
            if label != original_label {
                flips.push(Flip { replacement_token: fill.token, prob: fill.prob, flipped_label: label });
            }
        }
        if flips.is_empty() {
            continue;
        }
        flips.sort_by(|a, b| {
            b.prob
                .total_cmp(&a.prob)
                .then_with(|| a.replacement_token.cmp(&b.replacement_token))
        });
        let tagged = morphology.tag_and_lemmatize(sentence_text(example, candidate.sentence), candidate.index)?;
        reports.push(CriticalWordReport {
            example_id: example.id.clone(),
            sentence: candidate.sentence,
            word_index: candidate.index,
            surface: surface.to_string(),
            lemma: tagged.lemma,
            pos: tagged.pos,
            original_label,
            flips,
        });
    }
    Ok(reports)
}

/// The most probable flip; equal probabilities resolve to the smaller token.
pub fn best_flip(report: &CriticalWordReport) -> Result<(&str, Label), CriticalError> {
    report
        .flips
        .iter()
        .min_by(|a, b| {
            b.prob
                .total_cmp(&a.prob)
                .then_with(|| a.replacement_token.cmp(&b.replacement_token))
        })
        .map(|f| (f.replacement_token.as_str(), f.flipped_label))
        .ok_or_else(|| CriticalError::NoFlips(report.example_id.clone()))
}

#[derive(Debug, Default)]
pub struct CorpusScan {
    /// In corpus order, then word position.
    pub reports: Vec<CriticalWordReport>,
    pub scanned: usize,
    pub with_critical: usize,
    /// Examples dropped because an oracle call failed: (id, message).
    pub failed: Vec<(String, String)>,
}

/// Runs [`find_critical_words`] over a corpus. Failing examples are counted
/// and skipped; output order follows the corpus regardless of parallelism.
pub fn scan_corpus(
    examples: &[NliExample],
    oracle: &dyn Oracle,
    morphology: &Morphology,
    params: &CriticalParams,
    parallelism: Parallelism,
) -> CorpusScan {
    let results = map_ordered(examples, parallelism, |_, ex| {
        find_critical_words(ex, oracle, morphology, params)
    });
    let mut scan = CorpusScan { scanned: examples.len(), ..Default::default() };
    for (example, result) in examples.iter().zip(results) {
        match result {
            Ok(reports) => {
                if !reports.is_empty() {
                    scan.with_critical += 1;
                }
                scan.reports.extend(reports);
            }
            Err(e) => {
                log::warn!("skipping example {}: {e}", example.id);
                scan.failed.push((example.id.clone(), e.to_string()));
            }
        }
    }
    scan
}
