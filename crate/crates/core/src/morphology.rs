//! Word tokenization, part-of-speech tagging and rule-based lemmatization.
//!
//! The lemmatizer consults an exception table first (shipped as
//! `data/lemma_exceptions.tsv`, extendable from a user file), then applies
//! suffix rules for the requested part of speech. Rules are applied until a
//! fixed point is reached so that lemmatizing a lemma returns it unchanged.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracle::{CoarseTag, Oracle};

const BUILTIN_EXCEPTIONS: &str = include_str!("../data/lemma_exceptions.tsv");

#[derive(Debug, Error)]
pub enum MorphologyError {
    #[error("word index {index} out of range for sentence with {len} tokens")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("cannot read exception table {path}: {source}")]
    Table {
        path: String,
        source: std::io::Error,
    },
    #[error("exception table {path} line {line}: expected `surface<TAB>lemma`")]
    TableFormat { path: String, line: usize },
}

/// Coarse part of speech shared by the tagger and the dictionary lookup.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Noun,
    Verb,
    Adjective,
    Adverb,
    /// Any other section heading, matched by exact name (e.g. "Preposition").
    Other(String),
}

impl Pos {
    /// Whether a dictionary section heading names this part of speech.
    pub fn matches_heading(&self, heading: &str) -> bool {
        let heading = heading.trim();
        match self {
            Pos::Noun => heading.eq_ignore_ascii_case("noun"),
            Pos::Verb => heading.eq_ignore_ascii_case("verb"),
            Pos::Adjective => heading.eq_ignore_ascii_case("adjective"),
            Pos::Adverb => heading.eq_ignore_ascii_case("adverb"),
            Pos::Other(name) => heading == name,
        }
    }

    pub fn from_coarse(tag: CoarseTag) -> Pos {
        match tag {
            CoarseTag::Noun => Pos::Noun,
            CoarseTag::Verb => Pos::Verb,
            CoarseTag::Adj => Pos::Adjective,
            CoarseTag::Adv => Pos::Adverb,
            CoarseTag::Other => Pos::Other("Other".into()),
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pos::Noun => f.write_str("noun"),
            Pos::Verb => f.write_str("verb"),
            Pos::Adjective => f.write_str("adjective"),
            Pos::Adverb => f.write_str("adverb"),
            Pos::Other(name) => write!(f, "other({name})"),
        }
    }
}

/// A token of a sentence with its byte span in the original text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub start: usize,
    pub end: usize,
}

impl Token<'_> {
    pub fn is_alphabetic(&self) -> bool {
        !self.text.is_empty() && self.text.chars().all(char::is_alphabetic)
    }
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Splits on whitespace, then peels leading and trailing punctuation off each
/// chunk as one-character tokens. Inner punctuation (hyphens, apostrophes)
/// stays inside the word.
pub fn tokenize_words(sentence: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    for chunk in sentence.split_whitespace() {
        // chunk is a subslice of sentence
        let start = chunk.as_ptr() as usize - sentence.as_ptr() as usize;
        let mut head = start;
        let mut tail = start + chunk.len();
        let mut trailing = Vec::new();
        while let Some(c) = sentence[head..tail].chars().next() {
            if !is_punct(c) {
                break;
            }
            let end = head + c.len_utf8();
            tokens.push(Token { text: &sentence[head..end], start: head, end });
            head = end;
        }
        while let Some(c) = sentence[head..tail].chars().next_back() {
            if !is_punct(c) {
                break;
            }
            let begin = tail - c.len_utf8();
            trailing.push(Token { text: &sentence[begin..tail], start: begin, end: tail });
            tail = begin;
        }
        if head < tail {
            tokens.push(Token { text: &sentence[head..tail], start: head, end: tail });
        }
        tokens.extend(trailing.into_iter().rev());
    }
    tokens
}

/// Replaces `[start, end)` of `text` with `replacement`.
pub fn splice(text: &str, start: usize, end: usize, replacement: &str) -> String {
    let mut out = String::with_capacity(text.len() + replacement.len());
    out.push_str(&text[..start]);
    out.push_str(replacement);
    out.push_str(&text[end..]);
    out
}

/// Maximal runs of alphabetic characters, with byte spans.
pub fn letter_runs(text: &str) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphabetic(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, text.len()));
    }
    runs
}

/// Case-insensitive whole-word replacement of every target. A "word" is a
/// maximal run of letters, so "fountain's" matches "fountain".
pub fn replace_words(text: &str, targets: &[&str], replacement: &str) -> String {
    let targets: Vec<String> = targets.iter().map(|t| t.to_lowercase()).collect();
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for (start, end) in letter_runs(text) {
        if targets.iter().any(|t| text[start..end].to_lowercase() == *t) {
            out.push_str(&text[last..start]);
            out.push_str(replacement);
            last = end;
        }
    }
    out.push_str(&text[last..]);
    out
}

/// Whether `word` occurs as a whole word (case-insensitive) in `text`.
pub fn contains_word(text: &str, word: &str) -> bool {
    let word = word.to_lowercase();
    letter_runs(text)
        .into_iter()
        .any(|(s, e)| text[s..e].to_lowercase() == word)
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn has_vowel(s: &str) -> bool {
    s.bytes()
        .enumerate()
        .any(|(i, c)| is_vowel(c) || (i > 0 && c == b'y'))
}

fn vowel_groups(s: &str) -> usize {
    let mut groups = 0;
    let mut prev = false;
    for c in s.bytes() {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    groups
}

/// Undo consonant doubling, or restore a silent final "e", on a stem left
/// after removing "-ing", "-ed", "-er" or "-est".
fn restore_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 4 && b[n - 1] == b[n - 2] && !is_vowel(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z') {
        return stem[..n - 1].to_string();
    }
    if needs_silent_e(b) {
        return format!("{stem}e");
    }
    stem.to_string()
}

fn needs_silent_e(b: &[u8]) -> bool {
    let n = b.len();
    if n < 2 {
        return false;
    }
    let last = b[n - 1];
    let prev = b[n - 2];
    match last {
        b'u' => return !is_vowel(prev),
        b'c' | b'v' => return !is_vowel(prev) || n <= 4,
        b'g' => return matches!(prev, b'r' | b'd'),
        b'z' => return is_vowel(prev),
        _ => {}
    }
    // single-syllable consonant-vowel-consonant stem: mak(e), rid(e), smil(e)
    n >= 3
        && !is_vowel(last)
        && !matches!(last, b'w' | b'x' | b'y')
        && is_vowel(prev)
        && !is_vowel(b[n - 3])
        && vowel_groups(std::str::from_utf8(b).unwrap_or("")) == 1
}

fn strip_plural(w: &str) -> Option<String> {
    if w.len() > 4 && w.ends_with("ies") {
        return Some(format!("{}y", &w[..w.len() - 3]));
    }
    for suffix in ["sses", "shes", "ches", "xes", "zzes"] {
        if w.ends_with(suffix) {
            return Some(w[..w.len() - 2].to_string());
        }
    }
    if w.len() > 3 && w.ends_with('s') && !["ss", "us", "is"].iter().any(|s| w.ends_with(s)) {
        return Some(w[..w.len() - 1].to_string());
    }
    None
}

fn strip_verb(w: &str) -> Option<String> {
    if w.len() > 4 && (w.ends_with("ies") || w.ends_with("ied")) {
        return Some(format!("{}y", &w[..w.len() - 3]));
    }
    if w.ends_with("eed") {
        return (w.len() > 4).then(|| w[..w.len() - 1].to_string());
    }
    for suffix in ["ing", "ed"] {
        if let Some(stem) = w.strip_suffix(suffix) {
            if stem.len() >= 2 && has_vowel(stem) {
                return Some(restore_stem(stem));
            }
            return None;
        }
    }
    strip_plural(w)
}

fn strip_adjective(w: &str) -> Option<String> {
    if w.len() > 5 && w.ends_with("iest") {
        return Some(format!("{}y", &w[..w.len() - 4]));
    }
    if w.len() > 4 && w.ends_with("ier") {
        return Some(format!("{}y", &w[..w.len() - 3]));
    }
    for suffix in ["est", "er"] {
        if let Some(stem) = w.strip_suffix(suffix) {
            if stem.len() >= 2 && has_vowel(stem) {
                return Some(restore_stem(stem));
            }
            return None;
        }
    }
    None
}

#[derive(Debug, Clone)]
pub struct Lemmatizer {
    exceptions: HashMap<String, String>,
}

impl Default for Lemmatizer {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Lemmatizer {
    pub fn builtin() -> Self {
        let exceptions = parse_table(BUILTIN_EXCEPTIONS, "builtin")
            .expect("builtin exception table is well formed");
        Self { exceptions }
    }

    /// Builtin table extended (and overridden) by a user file.
    pub fn with_extra_table(path: &Path) -> Result<Self, MorphologyError> {
        let text = fs::read_to_string(path).map_err(|source| MorphologyError::Table {
            path: path.display().to_string(),
            source,
        })?;
        let mut lemmatizer = Self::builtin();
        lemmatizer
            .exceptions
            .extend(parse_table(&text, &path.display().to_string())?);
        Ok(lemmatizer)
    }

    pub fn exceptions(&self) -> impl Iterator<Item = (&str, &str)> {
        self.exceptions.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn lemmatize(&self, word: &str, pos: &Pos) -> String {
        let mut current = word.to_lowercase();
        // every rule shortens the word, so this terminates well before the cap
        for _ in 0..64 {
            if let Some(lemma) = self.exceptions.get(&current) {
                return lemma.clone();
            }
            if !current.bytes().all(|c| c.is_ascii_lowercase()) {
                return current;
            }
            let next = match pos {
                Pos::Noun => strip_plural(&current),
                Pos::Verb => strip_verb(&current),
                Pos::Adjective => strip_adjective(&current),
                Pos::Adverb | Pos::Other(_) => None,
            };
            match next {
                Some(next) if next != current => current = next,
                _ => return current,
            }
        }
        current
    }
}

fn parse_table(text: &str, path: &str) -> Result<HashMap<String, String>, MorphologyError> {
    let mut table = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        match (fields.next(), fields.next(), fields.next()) {
            (Some(surface), Some(lemma), None) if !surface.is_empty() && !lemma.is_empty() => {
                table.insert(surface.to_lowercase(), lemma.to_lowercase());
            }
            _ => {
                return Err(MorphologyError::TableFormat {
                    path: path.to_string(),
                    line: i + 1,
                })
            }
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedWord {
    pub surface: String,
    pub index: usize,
    pub pos: Pos,
    pub lemma: String,
}

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "my", "your", "his", "her", "its", "our",
    "their", "some", "any", "every", "each", "no", "another", "one", "two", "three", "four",
    "five", "six", "seven", "eight", "nine", "ten", "several", "many", "few", "both", "all",
];
const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do", "does",
    "did", "will", "would", "can", "could", "should", "may", "might", "must",
];
const FUNCTION_WORDS: &[&str] = &[
    "in", "on", "at", "of", "from", "to", "with", "by", "for", "into", "onto", "over", "under",
    "near", "behind", "beside", "between", "through", "across", "along", "around", "about",
    "against", "up", "down", "out", "off", "while", "and", "or", "but", "so", "because", "as",
    "than", "if", "when", "where", "who", "whom", "whose", "which", "what", "i", "you", "he",
    "she", "it", "we", "they", "me", "him", "us", "them", "himself", "herself", "themselves",
    "there", "not", "next", "during", "without", "within", "outside", "inside", "past",
];
const SUBJECT_PRONOUNS: &[&str] = &["i", "you", "he", "she", "it", "we", "they", "who"];
const ADVERBS: &[&str] = &[
    "very", "quite", "too", "also", "just", "only", "still", "almost", "always", "never",
    "often", "sometimes", "now", "then", "together", "away", "back", "here", "outdoors",
    "indoors", "home", "soon", "already", "again",
];
const ADJECTIVES: &[&str] = &[
    "young", "old", "blond", "blonde", "public", "small", "large", "big", "little", "tall",
    "short", "red", "blue", "green", "yellow", "black", "white", "brown", "orange", "pink",
    "purple", "gray", "grey", "happy", "sad", "busy", "empty", "full", "new", "long", "dark",
    "bright", "wet", "dry", "hot", "cold", "warm", "pretty", "beautiful", "ugly", "clean",
    "dirty", "crowded", "asian", "elderly", "female", "male", "good", "bad", "great", "open",
    "naked", "shirtless", "sleepy", "tired", "angry", "calm", "quiet", "loud", "fast", "slow",
    "high", "low", "heavy", "light", "striped", "wooden", "outdoor", "indoor", "other",
];
const IRREGULAR_VERBS: &[&str] = &[
    "sat", "stood", "ran", "went", "ate", "drank", "saw", "took", "gave", "made", "came",
    "held", "wore", "rode", "drove", "swam", "sang", "threw", "caught", "bought", "brought",
    "told", "said", "fell", "sit", "stand", "run", "eat", "drink", "play", "walk", "ride",
];
const ADJECTIVE_SUFFIXES: &[&str] = &[
    "ful", "ous", "ive", "able", "ible", "al", "ic", "less", "ish", "ern", "ant", "ent",
];

/// Left-to-right heuristic tagger over coarse tags.
pub fn builtin_tags(tokens: &[&str]) -> Vec<CoarseTag> {
    let mut tags: Vec<CoarseTag> = Vec::with_capacity(tokens.len());
    let lower: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
    for (i, w) in lower.iter().enumerate() {
        let w = w.as_str();
        let prev = i.checked_sub(1).map(|p| lower[p].as_str());
        let prev_tag = i.checked_sub(1).map(|p| tags[p]);
        let next_is_content = lower.get(i + 1).is_some_and(|n| {
            n.chars().all(char::is_alphabetic)
                && !DETERMINERS.contains(&n.as_str())
                && !FUNCTION_WORDS.contains(&n.as_str())
                && !AUXILIARIES.contains(&n.as_str())
        });
        let tag = if !w.chars().any(char::is_alphabetic) {
            CoarseTag::Other
        } else if AUXILIARIES.contains(&w) {
            CoarseTag::Verb
        } else if DETERMINERS.contains(&w) || FUNCTION_WORDS.contains(&w) {
            CoarseTag::Other
        } else if ADVERBS.contains(&w) {
            CoarseTag::Adv
        } else if ADJECTIVES.contains(&w) {
            CoarseTag::Adj
        } else if IRREGULAR_VERBS.contains(&w) && prev_tag != Some(CoarseTag::Other) {
            CoarseTag::Verb
        } else if w.len() > 4 && w.ends_with("ly") && !matches!(w, "family" | "belly" | "jelly") {
            CoarseTag::Adv
        } else if prev.is_some_and(|p| {
            (AUXILIARIES.contains(&p) && (w.ends_with("ing") || w.ends_with("ed")))
                || SUBJECT_PRONOUNS.contains(&p)
                || p == "to"
        }) {
            CoarseTag::Verb
        } else if prev.is_some_and(|p| DETERMINERS.contains(&p)) || prev_tag == Some(CoarseTag::Adj) {
            if next_is_content && ADJECTIVE_SUFFIXES.iter().any(|s| w.ends_with(s)) {
                CoarseTag::Adj
            } else {
                CoarseTag::Noun
            }
        } else if w.ends_with("ing")
            || (prev_tag == Some(CoarseTag::Noun)
                && ((w.ends_with('s') && !w.ends_with("ss")) || w.ends_with("ed")))
        {
            CoarseTag::Verb
        } else {
            CoarseTag::Noun
        };
        tags.push(tag);
    }
    tags
}

/// Part-of-speech source: the bridge oracle when configured, otherwise (or
/// when the oracle fails) the builtin heuristic tagger.
pub struct Tagger {
    oracle: Option<Arc<dyn Oracle>>,
    fallbacks: AtomicUsize,
}

impl Tagger {
    pub fn builtin() -> Self {
        Self { oracle: None, fallbacks: AtomicUsize::new(0) }
    }

    pub fn with_oracle(oracle: Arc<dyn Oracle>) -> Self {
        Self { oracle: Some(oracle), fallbacks: AtomicUsize::new(0) }
    }

    /// Number of times the oracle failed and the builtin tagger was used.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks.load(Ordering::Relaxed)
    }

    pub fn tag(&self, tokens: &[&str]) -> Vec<CoarseTag> {
        if let Some(oracle) = &self.oracle {
            let owned: Vec<String> = tokens.iter().map(|t| t.to_string()).collect();
            match oracle.tag(&owned) {
                Ok(tags) if tags.len() == tokens.len() => return tags,
                Ok(tags) => log::warn!(
                    "tagger returned {} tags for {} tokens; using builtin tagger",
                    tags.len(),
                    tokens.len()
                ),
                Err(e) => log::warn!("tagger oracle failed ({e}); using builtin tagger"),
            }
            self.fallbacks.fetch_add(1, Ordering::Relaxed);
        }
        builtin_tags(tokens)
    }
}

pub struct Morphology {
    pub lemmatizer: Lemmatizer,
    pub tagger: Tagger,
}

impl Default for Morphology {
    fn default() -> Self {
        Self { lemmatizer: Lemmatizer::builtin(), tagger: Tagger::builtin() }
    }
}

impl Morphology {
    pub fn new(lemmatizer: Lemmatizer, tagger: Tagger) -> Self {
        Self { lemmatizer, tagger }
    }

    /// Tags the sentence in context and lemmatizes the word at `word_index`
    /// (an index into [`tokenize_words`] output).
    pub fn tag_and_lemmatize(
        &self,
        sentence: &str,
        word_index: usize,
    ) -> Result<TaggedWord, MorphologyError> {
        let tokens = tokenize_words(sentence);
        let token = tokens.get(word_index).ok_or(MorphologyError::IndexOutOfRange {
            index: word_index,
            len: tokens.len(),
        })?;
        let texts: Vec<&str> = tokens.iter().map(|t| t.text).collect();
        let tags = self.tagger.tag(&texts);
        let pos = Pos::from_coarse(tags[word_index]);
        Ok(TaggedWord {
            surface: token.text.to_string(),
            index: word_index,
            lemma: self.lemmatizer.lemmatize(token.text, &pos),
            pos,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(s: &str) -> Vec<&str> {
        tokenize_words(s).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn tokenizes_train_window_premise() {
        assert_eq!(
            texts("A young man sits, looking out of a train window."),
            vec!["A", "young", "man", "sits", ",", "looking", "out", "of", "a", "train", "window", "."]
        );
    }

    #[test]
    fn tokenize_edge_cases() {
        assert!(texts("").is_empty());
        assert_eq!(texts("state-of-the-art"), vec!["state-of-the-art"]);
        assert_eq!(texts("\"Hi!\" he said..."), vec!["\"", "Hi", "!", "\"", "he", "said", ".", ".", "."]);
        assert_eq!(texts("don't  stop"), vec!["don't", "stop"]);
    }

    #[test]
    fn lemmatizes_examples() {
        let m = Morphology::default();
        let dogs = m.tag_and_lemmatize("Two dogs are running.", 1).unwrap();
        assert_eq!((dogs.lemma.as_str(), &dogs.pos), ("dog", &Pos::Noun));
        let drinking = m.tag_and_lemmatize("A man is drinking water.", 3).unwrap();
        assert_eq!((drinking.lemma.as_str(), &drinking.pos), ("drink", &Pos::Verb));
        let children = m.tag_and_lemmatize("The children sat.", 1).unwrap();
        assert_eq!((children.lemma.as_str(), &children.pos), ("child", &Pos::Noun));
        assert!(matches!(
            m.tag_and_lemmatize("The children sat.", 9),
            Err(MorphologyError::IndexOutOfRange { index: 9, len: 4 })
        ));
    }

    #[test]
    fn tags_table_sentences() {
        let tags = builtin_tags(&texts("A blond man is drinking from a public fountain."));
        assert_eq!(tags[1], CoarseTag::Adj);
        assert_eq!(tags[4], CoarseTag::Verb);
        assert_eq!(tags[8], CoarseTag::Noun);
        let tags = builtin_tags(&texts("A young man sits, looking out of a train window."));
        assert_eq!(tags[3], CoarseTag::Verb);
        assert_eq!(tags[9], CoarseTag::Noun);
        assert_eq!(tags[10], CoarseTag::Noun);
    }

    #[test]
    fn suffix_rules() {
        let l = Lemmatizer::builtin();
        let cases = [
            ("cities", Pos::Noun, "city"),
            ("glasses", Pos::Noun, "glass"),
            ("boxes", Pos::Noun, "box"),
            ("fountains", Pos::Noun, "fountain"),
            ("running", Pos::Verb, "run"),
            ("making", Pos::Verb, "make"),
            ("looking", Pos::Verb, "look"),
            ("smiled", Pos::Verb, "smile"),
            ("stopped", Pos::Verb, "stop"),
            ("tried", Pos::Verb, "try"),
            ("sits", Pos::Verb, "sit"),
            ("watches", Pos::Verb, "watch"),
            ("dancing", Pos::Verb, "dance"),
            ("agreed", Pos::Verb, "agree"),
            ("needed", Pos::Verb, "need"),
            ("bring", Pos::Verb, "bring"),
            ("taller", Pos::Adjective, "tall"),
            ("biggest", Pos::Adjective, "big"),
            ("happier", Pos::Adjective, "happy"),
            ("larger", Pos::Adjective, "large"),
            ("quickly", Pos::Adverb, "quickly"),
            ("Glass", Pos::Noun, "glass"),
        ];
        for (word, pos, lemma) in cases {
            assert_eq!(l.lemmatize(word, &pos), lemma, "{word} as {pos}");
        }
    }

    #[test]
    fn exception_values_are_fixed_points() {
        let l = Lemmatizer::builtin();
        for (_, lemma) in l.exceptions() {
            for pos in [Pos::Noun, Pos::Verb, Pos::Adjective, Pos::Adverb] {
                assert_eq!(l.lemmatize(lemma, &pos), lemma, "{lemma} as {pos}");
            }
        }
    }

    #[test]
    fn user_table_extends_builtin() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("extra.tsv");
        fs::write(&path, "# comment\nkine\tcow\n").unwrap();
        let l = Lemmatizer::with_extra_table(&path).unwrap();
        assert_eq!(l.lemmatize("kine", &Pos::Noun), "cow");
        assert_eq!(l.lemmatize("children", &Pos::Noun), "child");

        fs::write(&path, "broken line\n").unwrap();
        assert!(matches!(
            Lemmatizer::with_extra_table(&path),
            Err(MorphologyError::TableFormat { line: 1, .. })
        ));
    }

    #[test]
    fn oracle_tagger_failure_falls_back() {
        use crate::oracle::ScriptedOracle;
        let failing = Arc::new(ScriptedOracle::failing());
        let tagger = Tagger::with_oracle(failing);
        let m = Morphology::new(Lemmatizer::builtin(), tagger);
        let w = m.tag_and_lemmatize("Two dogs are running.", 1).unwrap();
        assert_eq!(w.lemma, "dog");
        assert_eq!(m.tagger.fallbacks(), 1);
    }

    #[test]
    fn word_replacement_is_whole_word() {
        assert_eq!(
            replace_words("Glass is glassy; a glass's glasses.", &["glass"], "xq"),
            "xq is glassy; a xq's glasses."
        );
        assert!(contains_word("The Fountain.", "fountain"));
        assert!(!contains_word("fountains", "fountain"));
    }

    proptest! {
        #[test]
        fn lemmatization_is_idempotent(word in "[a-z]{1,14}", pos_ix in 0usize..4) {
            let pos = [Pos::Noun, Pos::Verb, Pos::Adjective, Pos::Adverb][pos_ix].clone();
            let l = Lemmatizer::builtin();
            let once = l.lemmatize(&word, &pos);
            prop_assert_eq!(l.lemmatize(&once, &pos), once.clone());
            prop_assert_eq!(once.to_lowercase(), once);
        }

        #[test]
        fn spans_reconstruct_sentence(sentence in "[a-zA-Z ,.!'\\-]{0,60}") {
            let tokens = tokenize_words(&sentence);
            let mut rebuilt = String::new();
            let mut last = 0;
            for t in &tokens {
                prop_assert!(t.start >= last);
                rebuilt.push_str(&sentence[last..t.start]);
                prop_assert_eq!(&sentence[t.start..t.end], t.text);
                rebuilt.push_str(t.text);
                last = t.end;
            }
            rebuilt.push_str(&sentence[last..]);
            prop_assert_eq!(rebuilt, sentence.clone());
            // everything between tokens is whitespace
            let covered: usize = tokens.iter().map(|t| t.end - t.start).sum();
            prop_assert_eq!(covered, sentence.chars().filter(|c| !c.is_whitespace()).count());
        }
    }
}
