//! Command-line entry point: config loading, overrides and subcommands.

use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bugs::{evaluate_bugs, load_manifest, BugEvalOptions, ExecutionHooks};
use crate::corpus::{
    build_corpus, dataset_file_name, export_prompts, export_samples, import_samples, scan_corpus,
    to_abstract, BuildOptions, InputVariant, Split, Subset, TokenForm,
};
use crate::eval::evaluate;
use crate::predictor::{
    export_predictions, import_predictions, AdapterConfig, AdapterRequest, AdapterResponse,
    Backend, Candidate, ExternalAdapter, RetrievalIndex,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    Retrieval,
    Adapter,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    /// Directory of repositories for `build-corpus`.
    pub corpus: Option<PathBuf>,
    /// Dataset directory written by `build-corpus` and read by later stages.
    pub dataset: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub backend: BackendKind,
    pub k: usize,
    pub adapter: AdapterConfig,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Retrieval,
            k: 10,
            adapter: AdapterConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub ks: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { ks: vec![1, 5, 10] }
    }
}

/// Everything a pipeline run needs. Loaded from TOML; every field has a
/// default so a config file may be partial or absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: PathsConfig,
    pub corpus: BuildOptions,
    pub token_form: TokenForm,
    pub input_variant: InputVariant,
    pub predictor: PredictorConfig,
    pub eval: EvalConfig,
    pub hooks: ExecutionHooks,
    pub bugs: BugEvalOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: PathsConfig::default(),
            corpus: BuildOptions::default(),
            token_form: TokenForm::Raw,
            input_variant: InputVariant::TestPlusFocal,
            predictor: PredictorConfig::default(),
            eval: EvalConfig::default(),
            hooks: ExecutionHooks::default(),
            bugs: BugEvalOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    fn dataset_file(&self, split: Split, form: TokenForm) -> Result<PathBuf> {
        let dir = self
            .paths
            .dataset
            .as_ref()
            .ok_or_else(|| anyhow!("no dataset directory configured"))?;
        Ok(dir.join(dataset_file_name(split, self.input_variant, form)))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "assertgen",
    version,
    about = "Assertion generation dataset, prediction and evaluation pipeline"
)]
pub struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mine test/focal pairs from a directory of repositories and write the
    /// split datasets.
    BuildCorpus(BuildCorpusArgs),
    /// Convert a raw dataset file to abstract form.
    Abstract(AbstractArgs),
    /// Produce ranked candidate assertions for a dataset file.
    Predict(PredictArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Replay generated assertions against buggy and fixed checkouts.
    BugEval(BugEvalArgs),
    /// Render chat prompts for a raw dataset file.
    ExportPrompts(ExportPromptsArgs),
    /// Loopback adapter that answers each request with its truth hint.
    #[command(hide = true)]
    EchoAdapter,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SubsetArg {
    One,
    UpToFive,
    UpToTen,
}

impl From<SubsetArg> for Subset {
    fn from(s: SubsetArg) -> Self {
        match s {
            SubsetArg::One => Subset::One,
            SubsetArg::UpToFive => Subset::UpToFive,
            SubsetArg::UpToTen => Subset::UpToTen,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormArg {
    Raw,
    Abstract,
}

impl From<FormArg> for TokenForm {
    fn from(f: FormArg) -> Self {
        match f {
            FormArg::Raw => TokenForm::Raw,
            FormArg::Abstract => TokenForm::Abstract,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum VariantArg {
    TestOnly,
    TestPlusFocal,
}

impl From<VariantArg> for InputVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::TestOnly => InputVariant::TestOnly,
            VariantArg::TestPlusFocal => InputVariant::TestPlusFocal,
        }
    }
}

#[derive(Debug, Args)]
pub struct BuildCorpusArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub subset: Option<SubsetArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_chars: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AbstractArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Samples to predict; defaults to the test split of the dataset
    /// directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Retrieval index source; defaults to the train split.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    #[arg(short, long)]
    pub k: Option<usize>,
    #[arg(long, value_enum)]
    pub token_form: Option<FormArg>,
    #[arg(long, value_enum)]
    pub input_variant: Option<VariantArg>,
    #[command(flatten)]
    pub adapter: AdapterArgs,
}

#[derive(Debug, Args)]
pub struct AdapterArgs {
    #[arg(long, env = "ASSERTGEN_ADAPTER_CMD")]
    pub adapter_cmd: Option<String>,
    /// Seconds to wait for each adapter response.
    #[arg(long, env = "ASSERTGEN_ADAPTER_TIMEOUT")]
    pub adapter_timeout: Option<f64>,
    #[arg(long)]
    pub adapter_workers: Option<usize>,
    /// Include the ground truth in requests (loopback testing only).
    #[arg(long)]
    pub send_truth_hint: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    /// Ground-truth samples; defaults to the test split.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    /// Write the full report as JSON.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BugEvalArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Retrieval index source; defaults to the train split.
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub compile_cmd: Option<String>,
    #[arg(long)]
    pub test_cmd: Option<String>,
    /// Seconds allowed for each hook invocation.
    #[arg(long, env = "ASSERTGEN_HOOK_TIMEOUT")]
    pub hook_timeout: Option<f64>,
    #[arg(long)]
    pub candidates: Option<usize>,
    #[command(flatten)]
    pub adapter: AdapterArgs,
}

#[derive(Debug, Args)]
pub struct ExportPromptsArgs {
    /// Raw samples; defaults to the test split of the dataset directory.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("{} does not exist or is not a file", path.display());
    }
    Ok(())
}

fn require_dir(path: &Path) -> Result<()> {
    if !path.is_dir() {
        bail!("{} does not exist or is not a directory", path.display());
    }
    Ok(())
}

fn seconds(v: f64) -> Result<Duration> {
    Duration::try_from_secs_f64(v).map_err(|e| anyhow!("invalid timeout {v}: {e}"))
}

impl AdapterArgs {
    fn apply(&self, cfg: &mut AdapterConfig) -> Result<()> {
        if let Some(c) = &self.adapter_cmd {
            cfg.command.clone_from(c);
        }
        if let Some(t) = self.adapter_timeout {
            cfg.timeout = seconds(t)?;
        }
        if let Some(w) = self.adapter_workers {
            cfg.workers = w;
        }
        cfg.send_truth_hint |= self.send_truth_hint;
        Ok(())
    }
}

/// Parses arguments, runs the chosen subcommand and maps failure to a stage
/// name.
pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p).context("config")?,
        None => PipelineConfig::default(),
    };
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::BuildCorpus(a) => build_corpus_cmd(&mut config, a).context("build-corpus"),
        Command::Abstract(a) => abstract_cmd(&config, a).context("abstract"),
        Command::Predict(a) => predict_cmd(&mut config, a).context("predict"),
        Command::Evaluate(a) => evaluate_cmd(&mut config, a).context("evaluate"),
        Command::BugEval(a) => bug_eval_cmd(&mut config, a).context("bug-eval"),
        Command::ExportPrompts(a) => export_prompts_cmd(&config, a).context("export-prompts"),
        Command::EchoAdapter => {
            echo_adapter(io::stdin().lock(), io::stdout().lock()).context("echo-adapter")
        }
    }
}

fn build_corpus_cmd(config: &mut PipelineConfig, a: BuildCorpusArgs) -> Result<()> {
    if let Some(c) = a.corpus {
        config.paths.corpus = Some(c);
    }
    if let Some(o) = a.out {
        config.paths.dataset = Some(o);
    }
    if let Some(s) = a.subset {
        config.corpus.subset = s.into();
    }
    if let Some(s) = a.seed {
        config.corpus.split.seed = s;
    }
    if let Some(m) = a.max_chars {
        config.corpus.max_chars = m;
    }
    let root = config
        .paths
        .corpus
        .clone()
        .ok_or_else(|| anyhow!("no corpus directory given"))?;
    let out = config
        .paths
        .dataset
        .clone()
        .ok_or_else(|| anyhow!("no output directory given"))?;
    require_dir(&root)?;
    config.corpus.split.validate()?;
    config
        .corpus
        .abstraction
        .validate()
        .map_err(|e| anyhow!(e))?;

    let scan = scan_corpus(&root)?;
    let built = build_corpus(scan, &config.corpus)?;
    let written = built.write(&out, &config.corpus.split)?;
    let s = &built.stats;
    println!("pairs        {}", s.input_pairs);
    println!("kept pairs   {}", s.kept_pairs);
    println!("samples      {}", s.exploded_samples);
    println!("dropped      {}", s.total_dropped());
    println!("unparseable  {}", s.unparseable_files);
    println!("files        {}", written.len());
    Ok(())
}

fn abstract_cmd(config: &PipelineConfig, a: AbstractArgs) -> Result<()> {
    require_file(&a.input)?;
    let raw = import_samples(&a.input)?;
    let abstracted = raw
        .par_iter()
        .map(|s| {
            to_abstract(s, None, &config.corpus.abstraction).with_context(|| s.sample_id.clone())
        })
        .collect::<Result<Vec<_>>>()?;
    export_samples(&abstracted, &a.output)?;
    Ok(())
}

fn make_backend(
    config: &PipelineConfig,
    kind: BackendKind,
    train: Option<PathBuf>,
) -> Result<Box<dyn Backend>> {
    Ok(match kind {
        BackendKind::Retrieval => {
            let train = match train {
                Some(t) => t,
                None => config.dataset_file(Split::Train, config.token_form)?,
            };
            require_file(&train)?;
            let samples = import_samples(&train)?;
            Box::new(RetrievalIndex::build(&samples))
        }
        BackendKind::Adapter => Box::new(ExternalAdapter::new(config.predictor.adapter.clone())),
    })
}

fn predict_cmd(config: &mut PipelineConfig, a: PredictArgs) -> Result<()> {
    if let Some(b) = a.backend {
        config.predictor.backend = b;
    }
    if let Some(k) = a.k {
        config.predictor.k = k;
    }
    if let Some(f) = a.token_form {
        config.token_form = f.into();
    }
    if let Some(v) = a.input_variant {
        config.input_variant = v.into();
    }
    a.adapter.apply(&mut config.predictor.adapter)?;
    let input = match a.input {
        Some(p) => p,
        None => config.dataset_file(Split::Test, config.token_form)?,
    };
    require_file(&input)?;
    let backend = make_backend(config, config.predictor.backend, a.train)?;
    let samples = import_samples(&input)?;
    let predictions = backend.predict_batch(&samples, config.predictor.k)?;
    export_predictions(&predictions, &a.output)?;
    Ok(())
}

fn evaluate_cmd(config: &mut PipelineConfig, a: EvaluateArgs) -> Result<()> {
    if let Some(ks) = a.ks {
        config.eval.ks = ks;
    }
    let truth = match a.truth {
        Some(p) => p,
        None => config.dataset_file(Split::Test, config.token_form)?,
    };
    require_file(&a.predictions)?;
    require_file(&truth)?;
    let predictions = import_predictions(&a.predictions)?;
    let samples = import_samples(&truth)?;
    let report = evaluate(&predictions, &samples, &config.eval.ks)?;
    if let Some(path) = a.report {
        write_json(&path, &report)?;
    }
    print!("{}", report.to_table());
    Ok(())
}

fn bug_eval_cmd(config: &mut PipelineConfig, a: BugEvalArgs) -> Result<()> {
    if let Some(m) = a.manifest {
        config.paths.manifest = Some(m);
    }
    if let Some(c) = a.compile_cmd {
        config.hooks.compile_command = c;
    }
    if let Some(t) = a.test_cmd {
        config.hooks.test_command = t;
    }
    if let Some(t) = a.hook_timeout {
        config.hooks.timeout = seconds(t)?;
    }
    if let Some(c) = a.candidates {
        config.bugs.candidates_per_test = c;
    }
    if let Some(b) = a.backend {
        config.predictor.backend = b;
    }
    a.adapter.apply(&mut config.predictor.adapter)?;
    let manifest = config
        .paths
        .manifest
        .clone()
        .ok_or_else(|| anyhow!("no manifest given"))?;
    require_file(&manifest)?;
    config.hooks.validate()?;
    let cases = load_manifest(&manifest)?;
    let backend = make_backend(config, config.predictor.backend, a.train)?;
    let report = evaluate_bugs(&cases, &config.hooks, backend.as_ref(), &config.bugs)?;
    if let Some(path) = a.report {
        write_json(&path, &report)?;
    }
    print!("{}", report.summary.to_table());
    for e in &report.excluded {
        eprintln!("excluded {} {}: {}", e.bug_id, e.test, e.reason);
    }
    Ok(())
}

fn export_prompts_cmd(config: &PipelineConfig, a: ExportPromptsArgs) -> Result<()> {
    let input = match a.input {
        Some(p) => p,
        None => config.dataset_file(Split::Test, TokenForm::Raw)?,
    };
    require_file(&input)?;
    let samples = import_samples(&input)?;
    export_prompts(&samples, &a.output)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Answers every request with its truth hint as the only candidate, or with
/// no candidates when the hint is absent.
pub fn echo_adapter<R: BufRead, W: Write>(input: R, mut output: W) -> Result<()> {
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: AdapterRequest =
            serde_json::from_str(&line).with_context(|| format!("request line {}", i + 1))?;
        let candidates = req
            .truth_hint
            .map(|t| vec![Candidate::new(t, 1.0)])
            .unwrap_or_default();
        serde_json::to_writer(
            &mut output,
            &AdapterResponse {
                id: req.id,
                candidates,
            },
        )?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}
