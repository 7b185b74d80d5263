//! Dataset assembly: pairs an original example with its best-flip
//! counterpart, attaches definitions, scrambles defined words and renders
//! every cell of the protocol matrix plus the evaluation subsets.
//!
//! Building happens in two phases. [`plan_pairs`] picks the critical word
//! and looks up definitions, independently of the protocol. [`render_dataset`]
//! then turns plans into examples for one [`ProtocolConfig`]. Both phases run
//! per example in parallel and emit in corpus order.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{AugmentedExample, Label, NliExample, Origin};
use crate::critical::{best_flip, with_replacement, CriticalWordReport, Sentence};
use crate::morphology::{letter_runs, replace_words, tokenize_words, Lemmatizer};
use crate::oracle::Oracle;
use crate::par::{map_ordered, Parallelism};
use crate::wiktionary::{format_definition, DefinitionEntry, DefinitionSource};

pub const SCRAMBLE_MIN_LEN: usize = 4;
pub const SCRAMBLE_MAX_LEN: usize = 12;
pub const MAX_SCRAMBLE_ATTEMPTS: usize = 100;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("invalid protocol: {0}")]
    InvalidConfig(String),
    #[error("no scramble string avoided the example's words after {0} attempts")]
    ScrambleExhausted(usize),
    #[error("unknown {kind} {value:?}")]
    Parse { kind: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScrambleMode {
    None,
    All,
    Half,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DefinitionMode {
    None,
    Text,
    Substitution,
}

impl ScrambleMode {
    pub const ALL: [ScrambleMode; 3] = [ScrambleMode::None, ScrambleMode::All, ScrambleMode::Half];

    pub fn as_str(self) -> &'static str {
        match self {
            ScrambleMode::None => "none",
            ScrambleMode::All => "all",
            ScrambleMode::Half => "half",
        }
    }
}

impl DefinitionMode {
    pub const ALL: [DefinitionMode; 3] = [DefinitionMode::None, DefinitionMode::Text, DefinitionMode::Substitution];

    pub fn as_str(self) -> &'static str {
        match self {
            DefinitionMode::None => "none",
            DefinitionMode::Text => "text",
            DefinitionMode::Substitution => "substitution",
        }
    }
}

impl fmt::Display for ScrambleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for DefinitionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScrambleMode {
    type Err = AugmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| AugmentError::Parse { kind: "scramble mode", value: s.into() })
    }
}

impl FromStr for DefinitionMode {
    type Err = AugmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| AugmentError::Parse { kind: "definition mode", value: s.into() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub scramble: ScrambleMode,
    pub definitions: DefinitionMode,
    /// `false` keeps only original-side (verified) examples.
    pub include_replacements: bool,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if self.definitions == DefinitionMode::Substitution && self.scramble == ScrambleMode::None {
            return Err(AugmentError::InvalidConfig(
                "substitution definitions need scrambling".into(),
            ));
        }
        Ok(())
    }

    /// Whether the pair at `ordinal` (0-based, among emitted pairs) is scrambled.
    pub fn scrambles(&self, ordinal: usize) -> bool {
        match self.scramble {
            ScrambleMode::None => false,
            ScrambleMode::All => true,
            ScrambleMode::Half => ordinal.is_multiple_of(2),
        }
    }

    /// `{scramble}.{definitions}.{verified|full}`
    pub fn cell_name(&self) -> String {
        let subset = if self.include_replacements { "full" } else { "verified" };
        format!("{}.{}.{subset}", self.scramble, self.definitions)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScrambleAssignment {
    pub original: String,
    pub scrambled: String,
    pub example_id: String,
}

/// Random lowercase string of 4 to 12 letters not in `avoid` (lowercase
/// words). Gives up after [`MAX_SCRAMBLE_ATTEMPTS`] collisions.
pub fn scramble_word<R: RngCore + ?Sized>(rng: &mut R, avoid: &HashSet<String>) -> Result<String, AugmentError> {
    for _ in 0..MAX_SCRAMBLE_ATTEMPTS {
        let len = rng.gen_range(SCRAMBLE_MIN_LEN..=SCRAMBLE_MAX_LEN);
        let candidate: String = (0..len).map(|_| char::from(b'a' + rng.gen_range(0..26u8))).collect();
        if !avoid.contains(&candidate) {
            return Ok(candidate);
        }
    }
    Err(AugmentError::ScrambleExhausted(MAX_SCRAMBLE_ATTEMPTS))
}

/// Independent stream per (seed, example, side).
pub fn scramble_rng(seed: u64, example_id: &str, side: Origin) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((example_id.len() as u64).to_le_bytes());
    hasher.update(example_id.as_bytes());
    hasher.update([match side {
        Origin::Original => 0u8,
        Origin::Replacement => 1u8,
    }]);
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// The word a side defines, with its dictionary entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefinedWord {
    pub surface: String,
    pub lemma: String,
    pub definition: DefinitionEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplacementSide {
    pub premise: String,
    pub hypothesis: String,
    pub label: Label,
    pub word: DefinedWord,
}

/// Everything needed to render one example's pair under any protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPlan {
    pub example: NliExample,
    pub word: DefinedWord,
    pub replacement: Option<ReplacementSide>,
    /// Fill probability of the chosen flip.
    pub flip_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NoCriticalWord,
    ReportMismatch,
    MissingDefinition,
    /// Replacement side only: the flipped label equals the gold label.
    ReplacementMatchesGold,
    SingleSubwordLemma,
    OracleError,
    ScrambleExhausted,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::NoCriticalWord => "no_critical_word",
            DropReason::ReportMismatch => "report_mismatch",
            DropReason::MissingDefinition => "missing_definition",
            DropReason::ReplacementMatchesGold => "replacement_matches_gold",
            DropReason::SingleSubwordLemma => "single_subword_lemma",
            DropReason::OracleError => "oracle_error",
            DropReason::ScrambleExhausted => "scramble_exhausted",
        }
    }
}

pub type DropCounts = BTreeMap<String, usize>;

fn count(drops: &mut DropCounts, reason: DropReason) {
    *drops.entry(reason.as_str().to_string()).or_default() += 1;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PairPlans {
    pub examples_in: usize,
    pub pairs: Vec<PairPlan>,
    pub drops: DropCounts,
}

fn sentence_of(example: &NliExample, sentence: Sentence) -> &str {
    match sentence {
        Sentence::Premise => &example.premise,
        Sentence::Hypothesis => &example.hypothesis,
    }
}

fn reports_by_example(reports: &[CriticalWordReport]) -> HashMap<&str, Vec<&CriticalWordReport>> {
    let mut grouped: HashMap<&str, Vec<&CriticalWordReport>> = HashMap::new();
    for r in reports {
        grouped.entry(r.example_id.as_str()).or_default().push(r);
    }
    grouped
}

/// Original side of a plan for `report`; fails when the report does not
/// describe the example or the critical lemma has no definition.
fn plan_original(
    example: &NliExample,
    report: &CriticalWordReport,
    defs: &dyn DefinitionSource,
) -> Result<PairPlan, DropReason> {
    let tokens = tokenize_words(sentence_of(example, report.sentence));
    if tokens.get(report.word_index).map(|t| t.text) != Some(report.surface.as_str()) {
        return Err(DropReason::ReportMismatch);
    }
    let definition = defs.lookup(&report.lemma, &report.pos).ok_or(DropReason::MissingDefinition)?;
    let flip_prob = report.flips.iter().map(|f| f.prob).fold(f64::NEG_INFINITY, f64::max);
    Ok(PairPlan {
        example: example.clone(),
        word: DefinedWord { surface: report.surface.clone(), lemma: report.lemma.clone(), definition },
        replacement: None,
        flip_prob,
    })
}

/// Plan for one example: the earliest critical word, its best flip, and
/// definitions for both words. `Ok` may still carry a skipped replacement
/// side, reported as the second element.
pub fn plan_pair(
    example: &NliExample,
    report: &CriticalWordReport,
    defs: &dyn DefinitionSource,
    lemmatizer: &Lemmatizer,
) -> Result<(PairPlan, Option<DropReason>), DropReason> {
    let mut plan = plan_original(example, report, defs)?;
    let (token, label) = best_flip(report).map_err(|_| DropReason::ReportMismatch)?;
    let lemma = lemmatizer.lemmatize(token, &report.pos);
    let definition = defs.lookup(&lemma, &report.pos).ok_or(DropReason::MissingDefinition)?;
    if label == example.label {
        return Ok((plan, Some(DropReason::ReplacementMatchesGold)));
    }
    let tokens = tokenize_words(sentence_of(example, report.sentence));
    let (premise, hypothesis) = with_replacement(example, report.sentence, &tokens[report.word_index], token);
    plan.replacement = Some(ReplacementSide {
        premise,
        hypothesis,
        label,
        word: DefinedWord { surface: token.to_string(), lemma, definition },
    });
    Ok((plan, None))
}

fn earliest(reports: &[&CriticalWordReport]) -> Option<usize> {
    (0..reports.len()).min_by_key(|&i| (reports[i].sentence, reports[i].word_index))
}

pub fn plan_pairs(
    corpus: &[NliExample],
    reports: &[CriticalWordReport],
    defs: &dyn DefinitionSource,
    lemmatizer: &Lemmatizer,
    parallelism: Parallelism,
) -> PairPlans {
    let grouped = reports_by_example(reports);
    let planned = map_ordered(corpus, parallelism, |_, example| {
        let candidates = grouped.get(example.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        match earliest(candidates) {
            None => Err(DropReason::NoCriticalWord),
            Some(i) => plan_pair(example, candidates[i], defs, lemmatizer),
        }
    });
    let mut plans = PairPlans { examples_in: corpus.len(), ..Default::default() };
    for result in planned {
        match result {
            Ok((plan, skipped)) => {
                if let Some(reason) = skipped {
                    count(&mut plans.drops, reason);
                }
                plans.pairs.push(plan);
            }
            Err(reason) => count(&mut plans.drops, reason),
        }
    }
    plans
}

fn words_of(text: &str, into: &mut HashSet<String>) {
    for (s, e) in letter_runs(text) {
        into.insert(text[s..e].to_lowercase());
    }
}

/// Lowercase words a scramble string must not collide with.
fn plan_vocabulary(plan: &PairPlan) -> HashSet<String> {
    let mut words = HashSet::new();
    words_of(&plan.example.premise, &mut words);
    words_of(&plan.example.hypothesis, &mut words);
    words_of(&plan.word.definition.definition, &mut words);
    if let Some(r) = &plan.replacement {
        words_of(&r.premise, &mut words);
        words_of(&r.hypothesis, &mut words);
        words_of(&r.word.surface, &mut words);
        words_of(&r.word.definition.definition, &mut words);
    }
    words
}

/// Scramble strings for both sides of `plan`, drawn from independent
/// streams and distinct from each other.
pub fn assign_scrambles(plan: &PairPlan, seed: u64) -> Result<Vec<ScrambleAssignment>, AugmentError> {
    let mut avoid = plan_vocabulary(plan);
    let id = &plan.example.id;
    let original = scramble_word(&mut scramble_rng(seed, id, Origin::Original), &avoid)?;
    let mut out = vec![ScrambleAssignment {
        original: plan.word.surface.clone(),
        scrambled: original.clone(),
        example_id: id.clone(),
    }];
    if let Some(r) = &plan.replacement {
        avoid.insert(original);
        out.push(ScrambleAssignment {
            original: r.word.surface.clone(),
            scrambled: scramble_word(&mut scramble_rng(seed, id, Origin::Replacement), &avoid)?,
            example_id: id.clone(),
        });
    }
    Ok(out)
}

struct Side<'a> {
    id: String,
    premise: &'a str,
    hypothesis: &'a str,
    label: Label,
    word: &'a DefinedWord,
    origin: Origin,
}

fn render_side(side: Side<'_>, scramble: Option<&str>, definitions: DefinitionMode) -> AugmentedExample {
    let word = side.word;
    let targets = [word.surface.as_str(), word.lemma.as_str()];
    let hide = |text: &str| match scramble {
        Some(s) => replace_words(text, &targets, s),
        None => text.to_string(),
    };
    let mut premise = hide(side.premise);
    let mut hypothesis = hide(side.hypothesis);
    let body = match definitions {
        DefinitionMode::None => None,
        DefinitionMode::Text => Some(hide(&word.definition.definition)),
        DefinitionMode::Substitution => scramble.map(|_| word.surface.to_lowercase()),
    };
    let transformed = scramble.is_some() || body.is_some();
    let subject = match scramble {
        Some(s) => s.to_string(),
        None if transformed => word.surface.to_lowercase(),
        None => word.surface.clone(),
    };
    if let Some(body) = &body {
        premise = format!("{premise} {}", format_definition(&subject, body));
    }
    let mut definition_text = body.map(|b| format!("{}.", b.trim().trim_end_matches('.').trim_end()));
    if transformed {
        premise = premise.to_lowercase();
        hypothesis = hypothesis.to_lowercase();
        definition_text = definition_text.map(|d| d.to_lowercase());
    }
    AugmentedExample {
        id: side.id,
        premise,
        hypothesis,
        label: side.label,
        defined_word: Some(subject),
        original_word: Some(word.lemma.clone()),
        definition_text,
        origin: side.origin,
        verified: side.origin == Origin::Original,
    }
}

/// Examples for one plan: the original side, then (if configured and
/// available) the replacement side. `ordinal` is the plan's position among
/// emitted pairs and drives half-mode scrambling.
pub fn render_pair(plan: &PairPlan, ordinal: usize, config: &ProtocolConfig) -> Result<Vec<AugmentedExample>, AugmentError> {
    config.validate()?;
    let scrambles = if config.scrambles(ordinal) {
        Some(assign_scrambles(plan, config.seed)?)
    } else {
        None
    };
    let scramble_for = |i: usize| scrambles.as_ref().map(|s| s[i].scrambled.as_str());
    let example = &plan.example;
    let mut out = vec![render_side(
        Side {
            id: example.id.clone(),
            premise: &example.premise,
            hypothesis: &example.hypothesis,
            label: example.label,
            word: &plan.word,
            origin: Origin::Original,
        },
        scramble_for(0),
        config.definitions,
    )];
    if config.include_replacements {
        if let Some(r) = &plan.replacement {
            out.push(render_side(
                Side {
                    id: format!("{}-alt", example.id),
                    premise: &r.premise,
                    hypothesis: &r.hypothesis,
                    label: r.label,
                    word: &r.word,
                    origin: Origin::Replacement,
                },
                scramble_for(1),
                config.definitions,
            ));
        }
    }
    Ok(out)
}

/// Convenience wrapper planning and rendering a single example.
pub fn build_pair(
    example: &NliExample,
    report: &CriticalWordReport,
    defs: &dyn DefinitionSource,
    lemmatizer: &Lemmatizer,
    config: &ProtocolConfig,
) -> Result<Vec<AugmentedExample>, DropReason> {
    let (plan, _) = plan_pair(example, report, defs, lemmatizer)?;
    render_pair(&plan, 0, config).map_err(|_| DropReason::ScrambleExhausted)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub examples_in: usize,
    pub pairs: usize,
    pub examples_out: usize,
    pub verified_out: usize,
    pub drops: DropCounts,
}

/// Renders plans for `config` in plan order.
pub fn render_dataset(
    plans: &PairPlans,
    config: &ProtocolConfig,
    parallelism: Parallelism,
) -> Result<(Vec<AugmentedExample>, BuildSummary), AugmentError> {
    config.validate()?;
    let rendered = map_ordered(&plans.pairs, parallelism, |i, plan| render_pair(plan, i, config));
    let mut summary = BuildSummary {
        examples_in: plans.examples_in,
        drops: plans.drops.clone(),
        ..Default::default()
    };
    let mut out = Vec::new();
    for result in rendered {
        match result {
            Ok(examples) => {
                summary.pairs += 1;
                out.extend(examples);
            }
            Err(e) => {
                log::warn!("{e}");
                count(&mut summary.drops, DropReason::ScrambleExhausted);
            }
        }
    }
    summary.examples_out = out.len();
    summary.verified_out = out.iter().filter(|e| e.verified).count();
    Ok((out, summary))
}

pub fn build_dataset(
    corpus: &[NliExample],
    reports: &[CriticalWordReport],
    defs: &dyn DefinitionSource,
    lemmatizer: &Lemmatizer,
    config: &ProtocolConfig,
    parallelism: Parallelism,
) -> Result<(Vec<AugmentedExample>, BuildSummary), AugmentError> {
    config.validate()?;
    render_dataset(&plan_pairs(corpus, reports, defs, lemmatizer, parallelism), config, parallelism)
}

/// Original-side examples only.
pub fn build_subset_true(dataset: &[AugmentedExample]) -> Vec<AugmentedExample> {
    dataset.iter().filter(|e| e.verified).cloned().collect()
}

/// Test examples whose defined lemma is never defined anywhere in `train`.
pub fn build_subset_new(test: &[AugmentedExample], train: &[AugmentedExample]) -> Vec<AugmentedExample> {
    let seen: HashSet<String> = train
        .iter()
        .filter_map(|e| e.original_word.as_deref())
        .map(str::to_lowercase)
        .collect();
    test.iter()
        .filter(|e| {
            e.original_word
                .as_deref()
                .is_some_and(|w| !seen.contains(&w.to_lowercase()))
        })
        .cloned()
        .collect()
}

/// Plans for examples having a critical word whose lemma spans at least
/// two classifier subwords and has a definition. Among such words the one
/// with the most probable flip wins (earliest position on ties). Only the
/// original side is planned.
pub fn plan_subset_multi(
    corpus: &[NliExample],
    reports: &[CriticalWordReport],
    defs: &dyn DefinitionSource,
    oracle: &dyn Oracle,
    parallelism: Parallelism,
) -> PairPlans {
    let grouped = reports_by_example(reports);
    let planned = map_ordered(corpus, parallelism, |_, example| -> Result<PairPlan, DropReason> {
        let candidates = grouped.get(example.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        if candidates.is_empty() {
            return Err(DropReason::NoCriticalWord);
        }
        let mut best: Option<PairPlan> = None;
        let mut reason = DropReason::SingleSubwordLemma;
        for report in candidates {
            let pieces = match oracle.tokenize(&report.lemma) {
                Ok(p) => p.len(),
                Err(e) => {
                    log::warn!("tokenizing {:?} for {}: {e}", report.lemma, example.id);
                    reason = DropReason::OracleError;
                    continue;
                }
            };
            if pieces < 2 {
                continue;
            }
            let plan = match plan_original(example, report, defs) {
                Ok(plan) => plan,
                Err(r) => {
                    reason = r;
                    continue;
                }
            };
            let better = best.as_ref().is_none_or(|b| plan.flip_prob > b.flip_prob);
            if better {
                best = Some(plan);
            }
        }
        best.ok_or(reason)
    });
    let mut plans = PairPlans { examples_in: corpus.len(), ..Default::default() };
    for result in planned {
        match result {
            Ok(plan) => plans.pairs.push(plan),
            Err(reason) => count(&mut plans.drops, reason),
        }
    }
    plans
}

pub fn build_subset_multi(
    corpus: &[NliExample],
    reports: &[CriticalWordReport],
    defs: &dyn DefinitionSource,
    oracle: &dyn Oracle,
    config: &ProtocolConfig,
    parallelism: Parallelism,
) -> Result<(Vec<AugmentedExample>, BuildSummary), AugmentError> {
    let plans = plan_subset_multi(corpus, reports, defs, oracle, parallelism);
    let config = ProtocolConfig { include_replacements: false, ..*config };
    render_dataset(&plans, &config, parallelism)
}
