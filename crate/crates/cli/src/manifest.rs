use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Context;
use defaug::augment::{DefinitionMode, ScrambleMode};
use defaug::corpus::AugmentedExample;
use serde::{Deserialize, Serialize};

use crate::config::TaggerChoice;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub threshold: f64,
    pub top_k: usize,
    pub tagger: TaggerChoice,
    pub scramble: Vec<ScrambleMode>,
    pub definitions: Vec<DefinitionMode>,
    pub splits: BTreeMap<String, SplitSummary>,
    pub files: BTreeMap<String, FileSummary>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub corpus: String,
    pub examples_read: usize,
    pub unreadable_lines: usize,
    pub with_critical: usize,
    pub reports: usize,
    pub oracle_failures: usize,
    pub pairs: usize,
    pub drops: BTreeMap<String, usize>,
    /// Definitions used by planned pairs (both sides), by dictionary.
    pub definition_sources: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSummary {
    pub split: String,
    /// Protocol cell (`all.text.full`) or subset (`all.text.new`).
    pub cell: String,
    pub examples: usize,
    pub verified: usize,
    pub labels: BTreeMap<String, usize>,
}

impl FileSummary {
    pub fn of(split: &str, cell: &str, examples: &[AugmentedExample]) -> Self {
        let mut labels: BTreeMap<String, usize> =
            defaug::corpus::Label::ALL.iter().map(|l| (l.as_str().to_string(), 0)).collect();
        for e in examples {
            *labels.entry(e.label.as_str().to_string()).or_default() += 1;
        }
        Self {
            split: split.into(),
            cell: cell.into(),
            examples: examples.len(),
            verified: examples.iter().filter(|e| e.verified).count(),
            labels,
        }
    }
}

impl Manifest {
    pub fn save(&self, dir: &Path) -> anyhow::Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path)
            .with_context(|| format!("{} is not a dataset directory (no {MANIFEST_FILE})", dir.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
