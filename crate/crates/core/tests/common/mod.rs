#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use defaug::corpus::{Label, NliExample};
use defaug::oracle::{LabelDistribution, Script, ScriptedCandidate, ScriptedPair};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

const ADJECTIVES: &[&str] = &["red", "small", "old", "young", "happy", "tall"];
const NOUNS: &[&str] = &[
    "dog", "cat", "man", "woman", "child", "ball", "park", "car", "tree", "river", "guitar", "street",
    "beach", "horse", "table", "bike", "hat", "boat", "field", "door",
];
const VERBS: &[&str] = &["runs", "sits", "plays", "holds", "rides", "watches", "jumps", "walks"];
const PROBS: &[f64] = &[0.01, 0.04, 0.05, 0.050001, 0.06, 0.1, 0.2, 0.3];

fn sentence(words: &[String]) -> String {
    format!("{}.", words.join(" "))
}

fn blanked(words: &[String], i: usize) -> String {
    let mut w = words.to_vec();
    w[i] = "[BLANK]".into();
    sentence(&w)
}

fn with_word(words: &[String], i: usize, word: &str) -> String {
    let mut w = words.to_vec();
    w[i] = word.into();
    sentence(&w)
}

fn random_label(rng: &mut ChaCha8Rng) -> Label {
    Label::ALL[rng.gen_range(0..3)]
}

/// Candidate fills mixing every filter case: low and boundary
/// probabilities, multi-piece tokens, non-words and case variants of the
/// blanked word.
fn random_candidates(rng: &mut ChaCha8Rng, surface: &str) -> Vec<ScriptedCandidate> {
    let n = rng.gen_range(1..=8);
    let mut out: Vec<ScriptedCandidate> = Vec::new();
    while out.len() < n {
        let (token, pieces) = match rng.gen_range(0..10) {
            0 => (surface.to_uppercase(), 1),
            1 => ("##ing".to_string(), 1),
            2 => ("x-ray".to_string(), 1),
            3 => (format!("{}ish", NOUNS.choose(rng).unwrap()), 2),
            4 => (ADJECTIVES.choose(rng).unwrap().to_string(), 1),
            5 => (VERBS.choose(rng).unwrap().to_string(), 1),
            _ => (NOUNS.choose(rng).unwrap().to_string(), 1),
        };
        if out.iter().any(|c| c.token == token) {
            continue;
        }
        out.push(ScriptedCandidate { token, prob: *PROBS.choose(rng).unwrap(), pieces: Some(pieces) });
    }
    out
}

/// Twenty examples with an exhaustive script: every word position (repeated
/// or not) has fills, every replacement pair a label.
pub fn brute_force_fixture(seed: u64) -> (Vec<NliExample>, Script) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut script = Script::default();
    let mut corpus = Vec::new();
    for n in 0..20 {
        let premise: Vec<String> = [
            "A",
            ADJECTIVES.choose(&mut rng).unwrap(),
            NOUNS.choose(&mut rng).unwrap(),
            VERBS.choose(&mut rng).unwrap(),
            "near",
            "the",
            NOUNS.choose(&mut rng).unwrap(),
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let hypothesis: Vec<String> = ["The", NOUNS.choose(&mut rng).unwrap(), "is", ADJECTIVES.choose(&mut rng).unwrap()]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let (p, h) = (sentence(&premise), sentence(&hypothesis));
        script.classify.push(ScriptedPair {
            premise: p.clone(),
            hypothesis: h.clone(),
            probs: None,
            label: Some(random_label(&mut rng)),
        });
        for (words, in_premise) in [(&premise, true), (&hypothesis, false)] {
            for i in 0..words.len() {
                let text = if in_premise {
                    format!("{} {h}", blanked(words, i))
                } else {
                    format!("{p} {}", blanked(words, i))
                };
                let candidates = random_candidates(&mut rng, &words[i]);
                for c in &candidates {
                    let edited = with_word(words, i, &c.token);
                    let (ep, eh) = if in_premise { (edited, h.clone()) } else { (p.clone(), edited) };
                    let dist = match rng.gen_range(0..4) {
                        0 => LabelDistribution::uniform(),
                        _ => LabelDistribution::peaked(random_label(&mut rng), 0.7),
                    };
                    script.classify.push(ScriptedPair { premise: ep, hypothesis: eh, probs: Some(dist), label: None });
                }
                script.fills.insert(text, candidates);
            }
        }
        corpus.push(NliExample { id: format!("bf{n:02}"), premise: p, hypothesis: h, label: random_label(&mut rng) });
    }
    (corpus, script)
}

/// Flip found by the exhaustive search: (token, prob, new label).
pub type BruteFlip = (String, f64, Label);

/// (example id, in premise, word index, surface, original label, flips)
pub type BruteReport = (String, bool, usize, String, Label, Vec<BruteFlip>);

fn argmax(d: &LabelDistribution) -> Label {
    let mut best = Label::Entailment;
    for l in Label::ALL {
        if d.get(l) > d.get(best) {
            best = l;
        }
    }
    best
}

/// Independent reading of the definition: over every whitespace-separated
/// word occurring once in the example, try every scripted fill above the
/// threshold and record those changing the argmax.
pub fn brute_force_reports(corpus: &[NliExample], script: &Script, threshold: f64) -> Vec<BruteReport> {
    let labels: HashMap<(&str, &str), LabelDistribution> = script
        .classify
        .iter()
        .map(|p| {
            let d = p.probs.unwrap_or_else(|| LabelDistribution::peaked(p.label.unwrap(), 0.8));
            ((p.premise.as_str(), p.hypothesis.as_str()), d)
        })
        .collect();
    let classify = |p: &str, h: &str| argmax(labels.get(&(p, h)).unwrap_or(&LabelDistribution::uniform()));
    let split = |s: &str| -> Vec<String> {
        s.trim_end_matches('.').split(' ').map(str::to_string).collect()
    };
    let mut out = Vec::new();
    for ex in corpus {
        let original = classify(&ex.premise, &ex.hypothesis);
        let pw = split(&ex.premise);
        let hw = split(&ex.hypothesis);
        let mut freq: HashMap<String, usize> = HashMap::new();
        for w in pw.iter().chain(&hw) {
            *freq.entry(w.to_lowercase()).or_default() += 1;
        }
        for (words, in_premise) in [(&pw, true), (&hw, false)] {
            for i in 0..words.len() {
                let surface = &words[i];
                if freq[&surface.to_lowercase()] != 1 || !surface.chars().all(|c| c.is_alphabetic()) {
                    continue;
                }
                let context = if in_premise {
                    format!("{} {}", blanked(words, i), ex.hypothesis)
                } else {
                    format!("{} {}", ex.premise, blanked(words, i))
                };
                let mut flips = Vec::new();
                for c in script.fills.get(&context).into_iter().flatten() {
                    let usable = c.prob > threshold
                        && c.pieces.unwrap_or(1) == 1
                        && !c.token.is_empty()
                        && c.token.chars().all(|ch| ch.is_alphabetic())
                        && c.token.to_lowercase() != surface.to_lowercase();
                    if !usable {
                        continue;
                    }
                    let edited = with_word(words, i, &c.token);
                    let label = if in_premise {
                        classify(&edited, &ex.hypothesis)
                    } else {
                        classify(&ex.premise, &edited)
                    };
                    if label != original {
                        flips.push((c.token.clone(), c.prob, label));
                    }
                }
                if flips.is_empty() {
                    continue;
                }
                flips.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                out.push((ex.id.clone(), in_premise, i, surface.clone(), original, flips));
            }
        }
    }
    out
}

pub fn as_brute(reports: &[defaug::critical::CriticalWordReport]) -> Vec<BruteReport> {
    reports
        .iter()
        .map(|r| {
            (
                r.example_id.clone(),
                r.sentence == defaug::critical::Sentence::Premise,
                r.word_index,
                r.surface.clone(),
                r.original_label,
                r.flips
                    .iter()
                    .map(|f| (f.replacement_token.clone(), f.prob, f.flipped_label))
                    .collect(),
            )
        })
        .collect()
}
