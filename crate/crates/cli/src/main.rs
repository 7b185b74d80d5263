mod config;
mod manifest;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use defaug::augment::{
    build_subset_new, plan_pairs, plan_subset_multi, render_dataset, DefinitionMode, PairPlans, ProtocolConfig,
    ScrambleMode,
};
use defaug::corpus::{read_corpus_all, read_dataset, write_dataset, write_jsonl, AugmentedExample};
use defaug::critical::{scan_corpus, CriticalParams, CorpusScan, DEFAULT_THRESHOLD};
use defaug::morphology::{Lemmatizer, Morphology, Tagger};
use defaug::oracle::{HttpTransport, Oracle, RemoteOracle, StdioTransport, DEFAULT_TOP_K};
use defaug::par::Parallelism;
use defaug::wiktionary::{Dictionary, DumpIndex, Wiktionary};

use config::{RunConfig, TaggerChoice};
use manifest::{FileSummary, Manifest, SplitSummary, MANIFEST_VERSION};

const DEFAULT_TIMEOUT_SECS: u64 = 60;

#[derive(Parser)]
#[command(name = "defaug", version, about = "Build definition-augmented NLI datasets")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build (or reuse) the title index of Wiktionary dumps.
    Index(IndexArgs),
    /// Write critical-word reports for one corpus.
    FindCritical(FindCriticalArgs),
    /// Build every requested protocol cell and subset, plus a manifest.
    Build(BuildArgs),
    /// Summarize a dataset directory written by `build`.
    Stats(StatsArgs),
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    simple_english: Option<PathBuf>,
    #[arg(long)]
    english: Option<PathBuf>,
}

#[derive(Args, Default)]
struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Oracle endpoint: an http(s) URL or a bridge command line.
    #[arg(long, env = "DEFAUG_ORACLE_ENDPOINT")]
    oracle: Option<String>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum)]
    tagger: Option<TaggerChoice>,
    #[arg(long)]
    lemma_exceptions: Option<PathBuf>,
}

#[derive(Args)]
struct FindCriticalArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    simple_english: Option<PathBuf>,
    #[arg(long)]
    english: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Scramble modes to build (comma-separated).
    #[arg(long, value_delimiter = ',')]
    scramble: Option<Vec<ScrambleMode>>,
    /// Definition modes to build (comma-separated).
    #[arg(long, value_delimiter = ',')]
    definitions: Option<Vec<DefinitionMode>>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    dir: PathBuf,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Index(args) => cmd_index(args),
        Command::FindCritical(args) => cmd_find_critical(args),
        Command::Build(args) => cmd_build(args),
        Command::Stats(args) => cmd_stats(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let code = failure.exit_code();
            let (Failure::Usage(e) | Failure::Runtime(e)) = failure;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn cmd_index(args: IndexArgs) -> Result<(), Failure> {
    let dumps = [(args.simple_english, Dictionary::SimpleEnglish), (args.english, Dictionary::English)];
    if dumps.iter().all(|(p, _)| p.is_none()) {
        return Err(Failure::Usage(anyhow!("pass --simple-english and/or --english")));
    }
    for (path, dictionary) in dumps {
        let Some(path) = path else { continue };
        if !path.is_file() {
            return Err(Failure::Usage(anyhow!("dump {} does not exist", path.display())));
        }
        let (index, reused) = DumpIndex::load_or_build(&path, dictionary).runtime()?;
        let state = if reused { "reused existing index" } else { "built index" };
        eprintln!(
            "{}: {state} {} ({} pages)",
            path.display(),
            DumpIndex::sidecar_path(&path).display(),
            index.len()
        );
    }
    Ok(())
}

impl RunArgs {
    fn overrides(&self) -> RunConfig {
        RunConfig {
            oracle: self.oracle.clone(),
            timeout_secs: self.timeout_secs,
            threshold: self.threshold,
            top_k: self.top_k,
            jobs: self.jobs,
            tagger: self.tagger,
            lemma_exceptions: self.lemma_exceptions.clone(),
            ..Default::default()
        }
    }

    fn resolve(&self, extra: RunConfig) -> Result<RunConfig, Failure> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path).usage()?,
            None => RunConfig::default(),
        };
        let config = base.merge(self.overrides().merge(extra));
        config.check_paths().usage()?;
        Ok(config)
    }
}

/// Oracle, morphology and scan settings shared by the scanning commands.
struct Pipeline {
    oracle: Arc<dyn Oracle>,
    morphology: Morphology,
    params: CriticalParams,
    parallelism: Parallelism,
}

fn connect(endpoint: &str, timeout: Duration) -> Result<Arc<dyn Oracle>, Failure> {
    let oracle: Arc<dyn Oracle> = if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
        Arc::new(RemoteOracle::new(HttpTransport::new(endpoint, timeout), timeout))
    } else {
        let parts = shlex::split(endpoint)
            .filter(|p| !p.is_empty())
            .ok_or_else(|| Failure::Usage(anyhow!("cannot parse oracle command {endpoint:?}")))?;
        let transport = StdioTransport::spawn(&parts[0], &parts[1..]).runtime()?;
        Arc::new(RemoteOracle::new(transport, timeout))
    };
    oracle
        .tokenize("reachability")
        .map_err(|e| Failure::Runtime(anyhow!("oracle at {endpoint:?} is not reachable: {e}")))?;
    log::info!("oracle at {endpoint:?} is reachable");
    Ok(oracle)
}

impl Pipeline {
    fn open(config: &RunConfig) -> Result<Self, Failure> {
        let endpoint = config.oracle_endpoint().usage()?;
        let timeout = Duration::from_secs(config.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS));
        let oracle = connect(endpoint, timeout)?;
        let lemmatizer = match &config.lemma_exceptions {
            Some(path) => Lemmatizer::with_extra_table(path).usage()?,
            None => Lemmatizer::builtin(),
        };
        let tagger = match config.tagger.unwrap_or_default() {
            TaggerChoice::Builtin => Tagger::builtin(),
            TaggerChoice::Oracle => Tagger::with_oracle(Arc::clone(&oracle)),
        };
        Ok(Self {
            oracle,
            morphology: Morphology::new(lemmatizer, tagger),
            params: CriticalParams {
                threshold: config.threshold.unwrap_or(DEFAULT_THRESHOLD),
                top_k: config.top_k.unwrap_or(DEFAULT_TOP_K),
            },
            parallelism: Parallelism(config.jobs.unwrap_or(0)),
        })
    }

    fn scan(&self, corpus: &Path) -> Result<(ScannedCorpus, CorpusScan), Failure> {
        let (examples, skipped) = read_corpus_all(corpus).runtime()?;
        if !skipped.is_empty() {
            log::info!("{}: skipped {} unusable lines", corpus.display(), skipped.len());
        }
        let scan = scan_corpus(&examples, self.oracle.as_ref(), &self.morphology, &self.params, self.parallelism);
        if scan.scanned > 0 && scan.failed.len() == scan.scanned {
            return Err(Failure::Runtime(anyhow!(
                "every oracle call for {} failed; first error: {}",
                corpus.display(),
                scan.failed[0].1
            )));
        }
        Ok((ScannedCorpus { examples, unreadable_lines: skipped.len() }, scan))
    }
}

struct ScannedCorpus {
    examples: Vec<defaug::corpus::NliExample>,
    unreadable_lines: usize,
}

fn cmd_find_critical(args: FindCriticalArgs) -> Result<(), Failure> {
    if !args.corpus.is_file() {
        return Err(Failure::Usage(anyhow!("corpus {} does not exist", args.corpus.display())));
    }
    let config = args.run.resolve(RunConfig::default())?;
    let pipeline = Pipeline::open(&config)?;
    let (_, scan) = pipeline.scan(&args.corpus)?;
    write_jsonl(&scan.reports, &args.out).runtime()?;
    eprintln!(
        "find-critical: {} examples scanned, {} with critical words, {} reports, {} skipped",
        scan.scanned,
        scan.with_critical,
        scan.reports.len(),
        scan.failed.len()
    );
    Ok(())
}

fn definition_sources(plans: &PairPlans) -> BTreeMap<String, usize> {
    let mut sources = BTreeMap::new();
    for plan in &plans.pairs {
        let words = std::iter::once(&plan.word).chain(plan.replacement.as_ref().map(|r| &r.word));
        for word in words {
            *sources.entry(word.definition.source.as_str().to_string()).or_default() += 1;
        }
    }
    sources
}

struct Writer<'a> {
    dir: &'a Path,
    files: BTreeMap<String, FileSummary>,
}

impl Writer<'_> {
    fn write(&mut self, split: &str, cell: &str, examples: &[AugmentedExample]) -> Result<(), Failure> {
        let name = format!("{split}.{cell}.jsonl");
        write_dataset(examples, &self.dir.join(&name)).runtime()?;
        self.files.insert(name, FileSummary::of(split, cell, examples));
        Ok(())
    }
}

fn cmd_build(args: BuildArgs) -> Result<(), Failure> {
    let extra = RunConfig {
        train: args.train,
        test: args.test,
        simple_english: args.simple_english,
        english: args.english,
        seed: args.seed,
        scramble: args.scramble,
        definitions: args.definitions,
        output_dir: args.output_dir,
        ..Default::default()
    };
    let config = args.run.resolve(extra)?;
    let cells = config.protocol_cells().usage()?;
    let out_dir = config
        .output_dir
        .clone()
        .ok_or_else(|| Failure::Usage(anyhow!("an output directory is required (--output-dir)")))?;
    if config.train.is_none() && config.test.is_none() {
        return Err(Failure::Usage(anyhow!("pass --train and/or --test")));
    }
    if config.simple_english.is_none() && config.english.is_none() {
        return Err(Failure::Usage(anyhow!("pass --simple-english and/or --english")));
    }

    let pipeline = Pipeline::open(&config)?;
    let wiktionary =
        Wiktionary::open(config.simple_english.as_deref(), config.english.as_deref()).runtime()?;
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .runtime()?;

    let mut writer = Writer { dir: &out_dir, files: BTreeMap::new() };
    let mut splits = BTreeMap::new();
    let mut rendered: HashMap<(String, String), Vec<AugmentedExample>> = HashMap::new();
    let mut test_inputs = None;
    for (split, path) in [("train", &config.train), ("test", &config.test)] {
        let Some(path) = path else { continue };
        let (corpus, scan) = pipeline.scan(path)?;
        write_jsonl(&scan.reports, &out_dir.join(format!("{split}.reports.jsonl"))).runtime()?;
        let plans = plan_pairs(
            &corpus.examples,
            &scan.reports,
            &wiktionary,
            &pipeline.morphology.lemmatizer,
            pipeline.parallelism,
        );
        for cell in &cells {
            let (examples, _) = render_dataset(&plans, cell, pipeline.parallelism).runtime()?;
            writer.write(split, &cell.cell_name(), &examples)?;
            rendered.insert((split.to_string(), cell.cell_name()), examples);
        }
        splits.insert(
            split.to_string(),
            SplitSummary {
                corpus: path.display().to_string(),
                examples_read: corpus.examples.len(),
                unreadable_lines: corpus.unreadable_lines,
                with_critical: scan.with_critical,
                reports: scan.reports.len(),
                oracle_failures: scan.failed.len(),
                pairs: plans.pairs.len(),
                drops: plans.drops.clone(),
                definition_sources: definition_sources(&plans),
            },
        );
        if split == "test" {
            test_inputs = Some((corpus, scan));
        }
    }

    if let Some((corpus, scan)) = &test_inputs {
        let multi = plan_subset_multi(
            &corpus.examples,
            &scan.reports,
            &wiktionary,
            pipeline.oracle.as_ref(),
            pipeline.parallelism,
        );
        for cell in cells.iter().filter(|c| !c.include_replacements) {
            let stem = format!("{}.{}", cell.scramble, cell.definitions);
            let full_name = ProtocolConfig { include_replacements: true, ..*cell }.cell_name();
            if let Some(train) = rendered.get(&("train".to_string(), full_name)) {
                let verified = &rendered[&("test".to_string(), cell.cell_name())];
                writer.write("test", &format!("{stem}.new"), &build_subset_new(verified, train))?;
            }
            let (examples, _) = render_dataset(&multi, cell, pipeline.parallelism).runtime()?;
            writer.write("test", &format!("{stem}.multi"), &examples)?;
        }
    }

    let files = writer.files;
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: cells[0].seed,
        threshold: pipeline.params.threshold,
        top_k: pipeline.params.top_k,
        tagger: config.tagger.unwrap_or_default(),
        scramble: config.scramble.clone().unwrap_or_else(|| ScrambleMode::ALL.to_vec()),
        definitions: config.definitions.clone().unwrap_or_else(|| DefinitionMode::ALL.to_vec()),
        splits,
        files,
    };
    manifest.save(&out_dir).runtime()?;
    let pairs: Vec<String> = manifest.splits.iter().map(|(s, v)| format!("{s} {}/{}", v.pairs, v.examples_read)).collect();
    eprintln!(
        "build: {} files in {} (pairs/examples: {})",
        manifest.files.len(),
        out_dir.display(),
        pairs.join(", ")
    );
    if wiktionary.read_errors() > 0 {
        log::warn!("{} dictionary reads failed", wiktionary.read_errors());
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<(), Failure> {
    let manifest = Manifest::load(&args.dir).runtime()?;
    println!(
        "{:<40} {:>8} {:>8} {:>9} {:>10} {:>8} {:>13}",
        "file", "examples", "verified", "verified%", "entailment", "neutral", "contradiction"
    );
    let mut mismatches = Vec::new();
    for (name, expected) in &manifest.files {
        let examples = read_dataset(&args.dir.join(name)).runtime()?;
        let actual = FileSummary::of(&expected.split, &expected.cell, &examples);
        if &actual != expected {
            mismatches.push(name.clone());
        }
        let fraction = if actual.examples == 0 {
            0.0
        } else {
            100.0 * actual.verified as f64 / actual.examples as f64
        };
        println!(
            "{:<40} {:>8} {:>8} {:>8.1}% {:>10} {:>8} {:>13}",
            name,
            actual.examples,
            actual.verified,
            fraction,
            actual.labels["entailment"],
            actual.labels["neutral"],
            actual.labels["contradiction"]
        );
    }
    println!();
    for (split, summary) in &manifest.splits {
        let sources: Vec<String> =
            summary.definition_sources.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let drops: Vec<String> = summary.drops.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!(
            "{split}: {} examples, {} with critical words, {} pairs; definitions: {}; dropped: {}",
            summary.examples_read,
            summary.with_critical,
            summary.pairs,
            if sources.is_empty() { "none".into() } else { sources.join(" ") },
            if drops.is_empty() { "none".into() } else { drops.join(" ") },
        );
    }
    if !mismatches.is_empty() {
        return Err(Failure::Runtime(anyhow!(
            "files disagree with the manifest: {}",
            mismatches.join(", ")
        )));
    }
    Ok(())
}
