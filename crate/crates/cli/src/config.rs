use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use defaug::augment::{DefinitionMode, ProtocolConfig, ScrambleMode};
use serde::{Deserialize, Serialize};

/// Settings shared by `find-critical` and `build`, as read from a JSON file.
/// Every field can be overridden by the matching command-line flag.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub simple_english: Option<PathBuf>,
    pub english: Option<PathBuf>,
    /// `http(s)://…` for the HTTP transport, otherwise a command line
    /// spawned as a stdio bridge.
    pub oracle: Option<String>,
    pub timeout_secs: Option<u64>,
    pub threshold: Option<f64>,
    pub top_k: Option<usize>,
    pub seed: Option<u64>,
    pub scramble: Option<Vec<ScrambleMode>>,
    pub definitions: Option<Vec<DefinitionMode>>,
    pub output_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub tagger: Option<TaggerChoice>,
    pub lemma_exceptions: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TaggerChoice {
    #[default]
    Builtin,
    Oracle,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields set in `overrides` replace those in `self`.
    pub fn merge(self, overrides: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($field:ident),*) => {
                RunConfig { $($field: overrides.$field.or(self.$field)),* }
            };
        }
        pick!(
            train, test, simple_english, english, oracle, timeout_secs, threshold, top_k, seed, scramble,
            definitions, output_dir, jobs, tagger, lemma_exceptions
        )
    }

    pub fn oracle_endpoint(&self) -> anyhow::Result<&str> {
        match self.oracle.as_deref() {
            Some(e) if !e.trim().is_empty() => Ok(e),
            _ => bail!("no oracle endpoint: pass --oracle, set DEFAUG_ORACLE_ENDPOINT or add \"oracle\" to the config"),
        }
    }

    pub fn check_paths(&self) -> anyhow::Result<()> {
        let paths = [
            ("train", &self.train),
            ("test", &self.test),
            ("simple_english", &self.simple_english),
            ("english", &self.english),
            ("lemma_exceptions", &self.lemma_exceptions),
        ];
        for (name, path) in paths {
            if let Some(p) = path {
                if !p.is_file() {
                    bail!("{name} file {} does not exist", p.display());
                }
            }
        }
        if let Some(t) = self.threshold {
            if !(0.0..1.0).contains(&t) {
                bail!("threshold must lie in [0, 1), got {t}");
            }
        }
        Ok(())
    }

    /// Every valid protocol cell requested, verified subsets first.
    pub fn protocol_cells(&self) -> anyhow::Result<Vec<ProtocolConfig>> {
        let Some(seed) = self.seed else {
            bail!("a seed is required (--seed or \"seed\" in the config)");
        };
        let scrambles = self.scramble.clone().unwrap_or_else(|| ScrambleMode::ALL.to_vec());
        let definitions = self.definitions.clone().unwrap_or_else(|| DefinitionMode::ALL.to_vec());
        let mut cells = Vec::new();
        for &scramble in &scrambles {
            for &definitions in &definitions {
                for include_replacements in [false, true] {
                    let cell = ProtocolConfig { scramble, definitions, include_replacements, seed };
                    if cell.validate().is_ok() {
                        cells.push(cell);
                    }
                }
            }
        }
        if cells.is_empty() {
            bail!("no valid protocol cell in the requested scramble/definitions combination");
        }
        Ok(cells)
    }
}
