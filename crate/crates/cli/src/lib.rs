//! Command-line front end: `generate`, `collect`, `eval` and `report`.
//!
//! Every command that writes a directory also writes a `manifest.json` with
//! the resolved configuration, the seed, checksums and the tool version.

pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, ensure, Context};
use clap::{Args, Parser, Subcommand};
use cursorbench_collector::{run_collection, CollectionJob, CollectorConfig};
use cursorbench_core::dataset::Granularity;
use cursorbench_core::generate::{generate_from_config, load_corpus, paginate, write_dataset, Composition, GeneratorConfig, SAMPLES_FILE};
use cursorbench_core::metrics::MetricsSummary;
use cursorbench_core::prompts::{FeedbackTemplate, SystemPrompt, SystemPromptVariant};
use cursorbench_eval::harness::{metrics_json, write_traces};
use cursorbench_eval::{
    evaluate, format_table, load_samples, mock_targets, Backend, HarnessConfig, HttpBackend, MockBackend, MockKind,
    RunSummary,
};

use crate::config::{BackendConfig, BackendKind, FileConfig};
use crate::manifest::{dataset_checksum, prompt_checksums, RunManifest};

pub const GENERATOR_FILE: &str = "generator.toml";
pub const TRACES_FILE: &str = "traces.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const TABLE_FILE: &str = "table.txt";

#[derive(Debug, Parser)]
#[command(name = "cursorbench", version, about = "Multi-turn cursor-grounding benchmark for vision-language models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render editor screenshots and write an evaluation dataset.
    Generate(GenerateArgs),
    /// Walk files caret stop by caret stop through the bridge and record positions.
    Collect(CollectArgs),
    /// Run a backend through the refinement loop on a dataset.
    Eval(EvalArgs),
    /// Merge evaluation runs on the same dataset into one table.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Top-level seed for every randomized component.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Samples per granularity, e.g. `character=2`. Repeatable; granularities
    /// not named get zero.
    #[arg(long, value_parser = parse_composition_entry)]
    pub composition: Vec<(Granularity, usize)>,
    /// Source files to render instead of the built-in corpus. Repeatable.
    #[arg(long)]
    pub corpus: Vec<PathBuf>,
    #[arg(long)]
    pub tab_width: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CollectArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub out: PathBuf,
    /// Source files to collect instead of the built-in corpus. Repeatable.
    #[arg(long)]
    pub corpus: Vec<PathBuf>,
    /// Bridge port; 0 picks a free one.
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub settle_delay_ms: Option<u64>,
    #[arg(long)]
    pub request_timeout_ms: Option<u64>,
    /// Probability that the simulated renderer fails a measurement.
    #[arg(long)]
    pub fault_rate: Option<f64>,
    /// Delay every simulated measurement by this much (timeout testing).
    #[arg(long)]
    pub renderer_stall_ms: Option<u64>,
    #[arg(long)]
    pub tab_width: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory or samples JSONL file.
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// perfect, constant_offset, seeded_noise, feedback_aware or parse_breaker.
    #[arg(long)]
    pub mock_kind: Option<MockKind>,
    /// Mock offset in pixels as `X,Y`.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub mock_offset: Option<[f64; 2]>,
    #[arg(long)]
    pub mock_gamma: Option<f64>,
    /// Per-turn noise sigmas as a comma list; the last one repeats.
    #[arg(long, value_delimiter = ',')]
    pub mock_sigma: Option<Vec<f64>>,
    #[arg(long)]
    pub model: Option<String>,
    /// Base URL of an OpenAI-compatible API.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Environment variable to read the API key from.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub max_turns: Option<u32>,
    /// Sets both tolerances, in pixels.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub tolerance_x: Option<f64>,
    #[arg(long)]
    pub tolerance_y: Option<f64>,
    /// baseline, baseline_cot, cursor_aware, step_by_step, minimal, visual_anchor or custom.
    #[arg(long)]
    pub system_prompt: Option<SystemPromptVariant>,
    /// Text file for the custom system prompt; implies `--system-prompt custom`.
    #[arg(long)]
    pub custom_prompt_file: Option<PathBuf>,
    /// baseline or spatial.
    #[arg(long)]
    pub feedback_template: Option<FeedbackTemplate>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Write the image sent at every turn under `turn_images/`.
    #[arg(long)]
    pub save_turn_images: bool,
    /// Evaluate only the first N samples by id.
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Evaluation output directories.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Also write the table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_composition_entry(s: &str) -> Result<(Granularity, usize), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected GRANULARITY=COUNT, got {s:?}"))?;
    let g = match k.trim() {
        "character" => Granularity::Character,
        "word" => Granularity::Word,
        "line" => Granularity::Line,
        other => return Err(format!("unknown granularity {other:?}")),
    };
    let n = v.trim().parse().map_err(|e| format!("bad count {v:?}: {e}"))?;
    Ok((g, n))
}

fn parse_pair(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected X,Y, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad number {v:?}: {e}"));
    Ok([p(a)?, p(b)?])
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn resolve_generate(args: &GenerateArgs) -> anyhow::Result<GeneratorConfig> {
    let file = FileConfig::load_or_default(args.common.config.as_deref())?;
    let mut cfg = file.generate.clone();
    cfg.seed = file.resolve_seed(args.common.seed);
    if !args.composition.is_empty() {
        let mut c = Composition { character: 0, word: 0, line: 0 };
        for (g, n) in &args.composition {
            c.set(*g, *n);
        }
        cfg.composition = c;
    }
    if !args.corpus.is_empty() {
        cfg.corpus = args.corpus.clone();
    }
    if let Some(t) = args.tab_width {
        cfg.tab_width = t;
    }
    Ok(cfg)
}

pub fn cmd_generate(args: &GenerateArgs) -> anyhow::Result<RunManifest> {
    let cfg = resolve_generate(args)?;
    let mut manifest = RunManifest::new("generate", cfg.seed, &cfg)?;
    let dataset = generate_from_config(&cfg)?;
    create_dir(&args.out)?;
    let samples = write_dataset(&args.out, &dataset)?;
    write_text(&args.out.join(GENERATOR_FILE), &toml::to_string(&cfg)?)?;
    manifest.dataset_checksum = Some(dataset_checksum(&samples)?);
    tracing::info!(samples = dataset.samples.len(), screens = dataset.screens.len(), out = %args.out.display(), "dataset written");
    manifest.write(&args.out)
}

pub fn resolve_collect(args: &CollectArgs) -> anyhow::Result<(CollectorConfig, GeneratorConfig, u64)> {
    let file = FileConfig::load_or_default(args.common.config.as_deref())?;
    let seed = file.resolve_seed(args.common.seed);
    let mut cfg = file.collect.clone();
    cfg.faults.seed = seed;
    if let Some(p) = args.port {
        cfg.port = p;
    }
    if let Some(v) = args.settle_delay_ms {
        cfg.settle_delay_ms = v;
    }
    if let Some(v) = args.request_timeout_ms {
        cfg.request_timeout_ms = v;
    }
    if let Some(v) = args.fault_rate {
        cfg.faults.rate = v;
    }
    if args.renderer_stall_ms.is_some() {
        cfg.renderer_stall_ms = args.renderer_stall_ms;
    }
    if !args.corpus.is_empty() {
        cfg.corpus = None;
    }
    cfg.output = Some(args.out.clone());
    let mut layout_cfg = file.generate.clone();
    if !args.corpus.is_empty() {
        layout_cfg.corpus = args.corpus.clone();
    } else if let Some(c) = &file.collect.corpus {
        layout_cfg.corpus = vec![c.clone()];
    }
    if let Some(t) = args.tab_width {
        layout_cfg.tab_width = t;
    }
    cfg.validate()?;
    Ok((cfg, layout_cfg, seed))
}

/// Collects every screen of the corpus. Files longer than one screen are
/// split the same way `generate` splits them.
pub async fn cmd_collect(args: &CollectArgs) -> anyhow::Result<RunManifest> {
    let (cfg, source, seed) = resolve_collect(args)?;
    #[derive(serde::Serialize)]
    struct Resolved<'a> {
        collect: &'a CollectorConfig,
        layout: &'a cursorbench_core::editor::EditorLayout,
        corpus: &'a [PathBuf],
        tab_width: usize,
    }
    let resolved = Resolved { collect: &cfg, layout: &source.layout, corpus: &source.corpus, tab_width: source.tab_width };
    let manifest = RunManifest::new("collect", seed, &resolved)?;
    let corpus = load_corpus(&source.corpus)?;
    let jobs: Vec<CollectionJob> = paginate(&corpus, &source.layout, source.tab_width)?
        .into_iter()
        .map(|s| CollectionJob { file_id: format!("screen_{:03}", s.index), text: s.text })
        .collect();
    create_dir(&args.out)?;
    let summaries = run_collection(&cfg, &source.layout, &jobs, &args.out).await?;
    let failed: usize = summaries.iter().map(|s| s.failed_steps).sum();
    if failed > 0 {
        tracing::warn!(failed, "some caret stops could not be measured");
    }
    write_text(&args.out.join("summary.json"), &(serde_json::to_string_pretty(&summaries)? + "\n"))?;
    manifest.write(&args.out)
}

/// Harness and backend settings after applying flags over the file.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ResolvedEval {
    pub dataset: PathBuf,
    pub limit: Option<usize>,
    pub harness: HarnessConfig,
    pub backend: BackendConfig,
}

pub fn resolve_eval(args: &EvalArgs) -> anyhow::Result<(ResolvedEval, u64)> {
    let file = FileConfig::load_or_default(args.common.config.as_deref())?;
    let seed = file.resolve_seed(args.common.seed);
    let mut h = file.eval.clone();
    let mut b = file.backend.clone();
    h.seed = seed;
    b.mock.seed = seed;
    b.http.seed = seed;
    if let Some(v) = args.max_turns {
        h.max_turns = v;
    }
    if let Some(v) = args.tolerance {
        h.tolerance_x = v;
        h.tolerance_y = v;
    }
    if let Some(v) = args.tolerance_x {
        h.tolerance_x = v;
    }
    if let Some(v) = args.tolerance_y {
        h.tolerance_y = v;
    }
    if let Some(v) = args.system_prompt {
        h.system_prompt = SystemPrompt::new(v);
    }
    if let Some(p) = &args.custom_prompt_file {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        h.system_prompt = SystemPrompt::custom(text);
    }
    if let Some(v) = args.feedback_template {
        h.feedback_template = v;
    }
    if let Some(v) = args.parallelism {
        h.parallelism = v;
    }
    if args.save_turn_images {
        h.save_turn_images = true;
    }
    if let Some(v) = args.backend {
        b.kind = v;
    }
    if let Some(v) = args.mock_kind {
        b.mock.kind = v;
    }
    if let Some(v) = args.mock_offset {
        b.mock.offset = v;
    }
    if let Some(v) = args.mock_gamma {
        b.mock.gamma = v;
    }
    if let Some(v) = &args.mock_sigma {
        b.mock.sigma = v.clone();
    }
    if let Some(v) = &args.model {
        b.http.model = v.clone();
    }
    if let Some(v) = &args.endpoint {
        b.http.endpoint = v.clone();
    }
    if let Some(v) = &args.api_key_env {
        b.api_key_env = v.clone();
    }
    h.validate()?;
    let dataset = if args.dataset.is_dir() { args.dataset.join(SAMPLES_FILE) } else { args.dataset.clone() };
    Ok((ResolvedEval { dataset, limit: args.limit, harness: h, backend: b }, seed))
}

fn build_backend(cfg: &BackendConfig, samples: &[cursorbench_eval::LoadedSample]) -> anyhow::Result<Arc<dyn Backend>> {
    Ok(match cfg.kind {
        BackendKind::Mock => Arc::new(MockBackend::new(cfg.mock.clone(), mock_targets(samples))?),
        BackendKind::OpenaiCompatible => {
            let mut http = cfg.http.clone();
            http.api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
            if http.api_key.is_none() {
                tracing::warn!(var = %cfg.api_key_env, "no API key in environment, sending unauthenticated requests");
            }
            Arc::new(HttpBackend::new(http)?)
        }
    })
}

pub struct EvalRun {
    pub manifest: RunManifest,
    pub metrics: MetricsSummary,
    pub table: String,
}

pub async fn cmd_eval(args: &EvalArgs) -> anyhow::Result<EvalRun> {
    let (resolved, seed) = resolve_eval(args)?;
    let mut manifest = RunManifest::new("eval", seed, &resolved)?;
    manifest.prompt_checksums = prompt_checksums(Some(&resolved.harness.system_prompt));
    manifest.dataset_checksum = Some(dataset_checksum(&resolved.dataset)?);

    let mut samples = load_samples(&resolved.dataset)?;
    samples.sort_by(|a, b| a.sample.id.cmp(&b.sample.id));
    if let Some(n) = resolved.limit {
        samples.truncate(n);
    }
    ensure!(!samples.is_empty(), "dataset {} has no samples", resolved.dataset.display());
    let backend = build_backend(&resolved.backend, &samples)?;
    manifest.backend = Some(backend.identity());

    create_dir(&args.out)?;
    let turn_dir = args.out.join("turn_images");
    let outcome = evaluate(&samples, backend, &resolved.harness, Some(&turn_dir)).await?;
    write_traces(&args.out.join(TRACES_FILE), &outcome.traces)?;
    write_text(&args.out.join(METRICS_FILE), &metrics_json(&outcome.metrics)?)?;
    let summary = run_summary(&manifest, outcome.metrics.clone())?;
    let table = format_table(&[summary])?;
    write_text(&args.out.join(TABLE_FILE), &table)?;
    let manifest = manifest.write(&args.out)?;
    Ok(EvalRun { manifest, metrics: outcome.metrics, table })
}

/// Row labels for a run: the system prompt name and `kind/model`.
fn run_summary(manifest: &RunManifest, metrics: MetricsSummary) -> anyhow::Result<RunSummary> {
    let system_prompt = manifest.config["harness"]["system_prompt"]["variant"]
        .as_str()
        .context("manifest lacks harness.system_prompt.variant")?
        .to_string();
    let model = manifest
        .backend
        .as_ref()
        .map_or_else(|| "unknown".to_string(), |b| format!("{}/{}", b.kind, b.model));
    Ok(RunSummary { system_prompt, model, metrics })
}

/// Loads each run directory and renders one table. All runs must have been
/// evaluated on the same dataset.
pub fn cmd_report(args: &ReportArgs) -> anyhow::Result<String> {
    let mut runs = Vec::with_capacity(args.runs.len());
    let mut reference: Option<(&Path, String)> = None;
    for dir in &args.runs {
        let manifest = RunManifest::read(dir)?;
        ensure!(manifest.command == "eval", "{} holds a `{}` run, not an evaluation", dir.display(), manifest.command);
        let checksum = manifest.dataset_checksum.clone().context("manifest lacks a dataset checksum")?;
        match &reference {
            None => reference = Some((dir, checksum)),
            Some((first, expected)) if *expected != checksum => bail!(
                "runs were evaluated on different datasets: {} has {}, {} has {}",
                first.display(),
                expected,
                dir.display(),
                checksum
            ),
            Some(_) => {}
        }
        let path = dir.join(METRICS_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let metrics: MetricsSummary = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        runs.push(run_summary(&manifest, metrics)?);
    }
    let table = format_table(&runs)?;
    if let Some(out) = &args.out {
        write_text(out, &table)?;
    }
    Ok(table)
}

pub async fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(a) => {
            let m = cmd_generate(&a)?;
            println!("{}", m.dataset_checksum.unwrap_or_default());
        }
        Command::Collect(a) => {
            cmd_collect(&a).await?;
        }
        Command::Eval(a) => {
            let run = cmd_eval(&a).await?;
            print!("{}", run.table);
        }
        Command::Report(a) => print!("{}", cmd_report(&a)?),
    }
    Ok(())
}
