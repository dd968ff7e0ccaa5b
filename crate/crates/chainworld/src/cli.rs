//! The `chainworld` command line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chainworld_core::chaining::{
    chaining_report, discard_count, filter_corpus, ChainingReport, ScoreRule,
};
use chainworld_core::evaluation::{
    balanced_capacity, build_inference_testset, build_transition_testset,
    build_valid_action_testset, derive_traces, evaluate_inference, evaluate_world_model, reference,
    render_inference_table, render_world_model_table, split_holdout, InferenceCase, MetricReport,
    ReportRow,
};
use chainworld_core::inference::{export_training_pairs, Direction};
use chainworld_core::matcher::MatcherKind;
use chainworld_core::search::{analyze, build_effect_pool, unseen_actions, SearchSummary};
use chainworld_core::world_model::{check_preconditions, derive_state_trace, WorldModel};
use chainworld_core::{ActionPlan, Stage};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{parse_matcher, AnyMatcher, EmbedderKind, Gateways, InferenceKind, RunConfig};
use crate::conformance::check_endpoint;
use crate::error::{Error, Result};
use crate::gateway::{BackendConfig, BackendKind};
use crate::io::{
    manifest_hash, read_corpus, read_jsonl, read_lines, write_json, write_jsonl, write_text,
    FileDigest, RunRecord,
};
use crate::judge::llm_chaining_report;
use crate::pipeline::{FewShotExamples, Pipeline, PlanCoverage};

#[derive(Debug, Parser)]
#[command(
    name = "chainworld",
    version,
    about = "Build annotated action-plan corpora and evaluate text world models"
)]
pub struct Cli {
    /// JSON run configuration. Flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every sampling step; required by commands that sample.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for corpus generation.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate, annotate, re-chain and filter one plan per task.
    GenCorpus(GenCorpusArgs),
    /// Drop the worst-chained fraction of a corpus.
    Filter(FilterArgs),
    /// Derive gold state traces from an annotated corpus.
    Refactor(RefactorArgs),
    /// Write seq2seq training pairs.
    ExportTraining(ExportArgs),
    /// Score precondition and effect inference for one or more corpora.
    EvalInference(EvalInferenceArgs),
    /// Score valid-action and state-transition prediction.
    EvalWorldmodel(EvalWorldModelArgs),
    /// How many unseen actions can be reached from corpus effects.
    AnalyzeSearch(SearchArgs),
    /// Replay annotated plans and report every state and step.
    Replay(ReplayArgs),
    /// Check that an inference endpoint speaks the expected wire format.
    CheckEndpoint(CheckEndpointArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendChoice {
    Scripted,
    Remote,
}

#[derive(Debug, Default, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    /// Scripted completions (fingerprint -> text).
    #[arg(long, value_name = "FILE")]
    script: Option<PathBuf>,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long, value_name = "DIR")]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    max_retries: Option<u32>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    timeout: Option<u64>,
    #[arg(long)]
    max_in_flight: Option<usize>,
}

impl BackendArgs {
    fn apply(&self, b: &mut BackendConfig) {
        if let Some(kind) = self.backend {
            b.kind = match kind {
                BackendChoice::Scripted => BackendKind::Scripted,
                BackendChoice::Remote => BackendKind::Remote,
            };
        }
        if let Some(v) = &self.script {
            b.script_path = Some(v.clone());
        }
        if let Some(v) = &self.base_url {
            b.base_url = Some(v.clone());
        }
        if let Some(v) = &self.model {
            b.model_name = Some(v.clone());
        }
        if let Some(v) = &self.cache_dir {
            b.cache_dir = Some(v.clone());
        }
        if let Some(v) = self.temperature {
            b.temperature = v;
        }
        if let Some(v) = self.max_retries {
            b.max_retries = v;
        }
        if let Some(v) = self.timeout {
            b.timeout_secs = v;
        }
        if let Some(v) = self.max_in_flight {
            b.max_in_flight = v;
        }
    }
}

fn matcher_arg(s: &str) -> Result<MatcherKind, String> {
    parse_matcher(s).map_err(|e| e.to_string())
}

#[derive(Debug, Default, Args)]
pub struct MatcherArgs {
    /// `exact`, `llm` or `fixture:<path>`.
    #[arg(long, value_parser = matcher_arg)]
    matcher: Option<MatcherKind>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InferenceChoice {
    CorpusLookup,
    FinetunedEndpoint,
    FewshotLlm,
}

#[derive(Debug, Default, Args)]
pub struct InferenceArgs {
    #[arg(long, value_enum)]
    inference: Option<InferenceChoice>,
    /// Prefix each inference query with its task description.
    #[arg(long)]
    include_task: bool,
    /// Fine-tuned precondition model endpoint.
    #[arg(long)]
    pre_url: Option<String>,
    #[arg(long)]
    pre_model: Option<String>,
    /// Fine-tuned effect model endpoint.
    #[arg(long)]
    eff_url: Option<String>,
    #[arg(long)]
    eff_model: Option<String>,
    #[arg(long)]
    few_shot_count: Option<usize>,
    #[arg(long, value_enum)]
    embedder: Option<EmbedderChoice>,
    #[arg(long)]
    embed_url: Option<String>,
    #[arg(long)]
    embed_model: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EmbedderChoice {
    Hashed,
    Remote,
}

impl InferenceArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let inf = &mut cfg.inference;
        if let Some(kind) = self.inference {
            inf.kind = match kind {
                InferenceChoice::CorpusLookup => InferenceKind::CorpusLookup,
                InferenceChoice::FinetunedEndpoint => InferenceKind::FinetunedEndpoint,
                InferenceChoice::FewshotLlm => InferenceKind::FewshotLlm,
            };
        }
        inf.include_task |= self.include_task;
        let endpoint = |slot: &mut Option<BackendConfig>,
                        url: &Option<String>,
                        model: &Option<String>| {
            if let Some(url) = url {
                let mut b = BackendConfig::remote(url.clone(), model.clone().unwrap_or_default());
                b.seed = cfg.seed;
                *slot = Some(b);
            }
        };
        endpoint(
            &mut inf.preconditions_endpoint,
            &self.pre_url,
            &self.pre_model,
        );
        endpoint(&mut inf.effects_endpoint, &self.eff_url, &self.eff_model);
        if let Some(k) = self.few_shot_count {
            inf.few_shot_count = k;
        }
        if let Some(e) = self.embedder {
            cfg.embedder.kind = match e {
                EmbedderChoice::Hashed => EmbedderKind::Hashed,
                EmbedderChoice::Remote => EmbedderKind::Remote,
            };
        }
        if let Some(v) = &self.embed_url {
            cfg.embedder.base_url = Some(v.clone());
        }
        if let Some(v) = &self.embed_model {
            cfg.embedder.model = Some(v.clone());
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleChoice {
    Mean,
    Max,
}

impl From<RuleChoice> for ScoreRule {
    fn from(r: RuleChoice) -> Self {
        match r {
            RuleChoice::Mean => ScoreRule::Mean,
            RuleChoice::Max => ScoreRule::Max,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenCorpusArgs {
    /// One task description per line.
    #[arg(long, value_name = "FILE")]
    tasks: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Use only the first N tasks.
    #[arg(long)]
    limit: Option<usize>,
    /// Skip pruning and local re-chaining.
    #[arg(long)]
    skip_local: bool,
    /// Skip the corpus-level filter.
    #[arg(long)]
    skip_global: bool,
    #[arg(long)]
    filter_fraction: Option<f64>,
    #[arg(long, value_enum)]
    score_rule: Option<RuleChoice>,
    #[arg(long, value_name = "FILE")]
    few_shot_file: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    matcher: MatcherArgs,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Precomputed chaining reports; computed with the matcher when absent.
    #[arg(long, value_name = "FILE")]
    reports: Option<PathBuf>,
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long, value_enum)]
    score_rule: Option<RuleChoice>,
    #[arg(long, value_name = "FILE")]
    kept: PathBuf,
    #[arg(long, value_name = "FILE")]
    discarded: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    matcher: MatcherArgs,
}

#[derive(Debug, Args)]
pub struct RefactorArgs {
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    matcher: MatcherArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DirectionChoice {
    Precondition,
    Effect,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    #[arg(long, value_enum)]
    direction: DirectionChoice,
    #[arg(long)]
    include_task: bool,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

/// `LABEL=CORPUS`
#[derive(Debug, Clone)]
pub struct RunSpec {
    label: String,
    corpus: PathBuf,
}

fn run_spec(s: &str) -> Result<RunSpec, String> {
    let (label, corpus) = s
        .split_once('=')
        .ok_or_else(|| format!("expected LABEL=CORPUS, got {s:?}"))?;
    if label.is_empty()
        || !label
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c))
    {
        return Err(format!(
            "label {label:?} must be non-empty and use only letters, digits, '-', '_' or '.'"
        ));
    }
    if corpus.is_empty() {
        return Err(format!("no corpus path for {label}"));
    }
    Ok(RunSpec {
        label: label.into(),
        corpus: corpus.into(),
    })
}

#[derive(Debug, Args)]
pub struct EvalInferenceArgs {
    /// A corpus to evaluate, as LABEL=FILE. Repeatable.
    #[arg(long = "run", value_name = "LABEL=FILE", value_parser = run_spec, required = true)]
    runs: Vec<RunSpec>,
    /// Shared test corpus. Without it each corpus is scored on itself.
    #[arg(long, value_name = "FILE", conflicts_with = "holdout")]
    test: Option<PathBuf>,
    /// Hold out N plans of each corpus as its test set.
    #[arg(long)]
    holdout: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    inference: InferenceArgs,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct EvalWorldModelArgs {
    #[arg(long = "run", value_name = "LABEL=FILE", value_parser = run_spec, required = true)]
    runs: Vec<RunSpec>,
    /// Shared test corpus. Without it each corpus is scored on itself.
    #[arg(long, value_name = "FILE")]
    test: Option<PathBuf>,
    /// Valid-action cases (even). Defaults to the largest balanced set.
    #[arg(long)]
    cases: Option<usize>,
    /// Sample at most this many transition cases.
    #[arg(long)]
    transitions: Option<usize>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    inference: InferenceArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    matcher: MatcherArgs,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Corpus whose effects form the pool.
    #[arg(long, value_name = "FILE")]
    train: PathBuf,
    /// Candidate actions come from this corpus.
    #[arg(long, value_name = "FILE", group = "candidates")]
    test: Option<PathBuf>,
    /// Hold out N plans of the training corpus as candidates.
    #[arg(long, group = "candidates")]
    holdout: Option<usize>,
    /// Candidate actions, one per line.
    #[arg(long, value_name = "FILE", group = "candidates")]
    actions: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[command(flatten)]
    inference: InferenceArgs,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    matcher: MatcherArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Annotated plans (JSON lines).
    #[arg(long, value_name = "FILE")]
    plan: PathBuf,
    /// Replay only this plan.
    #[arg(long)]
    plan_id: Option<String>,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    matcher: MatcherArgs,
}

#[derive(Debug, Args)]
pub struct CheckEndpointArgs {
    #[arg(long)]
    base_url: String,
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 30)]
    timeout: u64,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code: 0 on success, 2 for usage errors, 1 otherwise.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Usage(_)) {
                2
            } else {
                1
            }
        }
    }
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Usage("--jobs must be at least 1".into()));
        }
        cfg.jobs = jobs;
    }
    Ok(cfg)
}

fn apply_common(cfg: &mut RunConfig, backend: &BackendArgs, matcher: Option<&MatcherArgs>) {
    backend.apply(&mut cfg.backend);
    if cfg.backend.seed.is_none() {
        cfg.backend.seed = cfg.seed;
    }
    if let Some(m) = matcher.and_then(|m| m.matcher.clone()) {
        cfg.matcher = m;
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = base_config(&cli)?;
    match cli.command {
        Command::GenCorpus(a) => {
            apply_common(&mut cfg, &a.backend, Some(&a.matcher));
            gen_corpus(cfg, a)
        }
        Command::Filter(a) => {
            apply_common(&mut cfg, &a.backend, Some(&a.matcher));
            filter(cfg, a)
        }
        Command::Refactor(a) => {
            apply_common(&mut cfg, &a.backend, Some(&a.matcher));
            refactor(cfg, a)
        }
        Command::ExportTraining(a) => export_training(cfg, a),
        Command::EvalInference(a) => {
            apply_common(&mut cfg, &a.backend, None);
            a.inference.apply(&mut cfg);
            eval_inference(cfg, a)
        }
        Command::EvalWorldmodel(a) => {
            apply_common(&mut cfg, &a.backend, Some(&a.matcher));
            a.inference.apply(&mut cfg);
            eval_world_model(cfg, a)
        }
        Command::AnalyzeSearch(a) => {
            apply_common(&mut cfg, &a.backend, Some(&a.matcher));
            a.inference.apply(&mut cfg);
            analyze_search(cfg, a)
        }
        Command::Replay(a) => {
            apply_common(&mut cfg, &a.backend, Some(&a.matcher));
            replay(cfg, a)
        }
        Command::CheckEndpoint(a) => check(a),
    }
}

/// Files a backend reads, for manifests.
fn backend_inputs(cfg: &RunConfig) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut push = |b: &BackendConfig| {
        if b.kind == BackendKind::Scripted {
            if let Some(p) = &b.script_path {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
        }
    };
    push(&cfg.backend);
    if let Some(b) = &cfg.judge_backend {
        push(b);
    }
    if let Some(b) = &cfg.inference.preconditions_endpoint {
        push(b);
    }
    if let Some(b) = &cfg.inference.effects_endpoint {
        push(b);
    }
    if let MatcherKind::FixtureTable { path } = &cfg.matcher {
        out.push(path.into());
    }
    out
}

fn record(command: &str, cfg: &RunConfig, inputs: &[&Path]) -> Result<RunRecord> {
    let extra = backend_inputs(cfg);
    let mut all: Vec<&Path> = inputs.to_vec();
    all.extend(extra.iter().map(PathBuf::as_path).filter(|p| p.exists()));
    RunRecord::new(command, cfg.hash(), cfg.seed, &all)
}

fn write_artifact<T: Serialize>(run: &RunRecord, path: &Path, items: &[T]) -> Result<()> {
    write_jsonl(path, items)?;
    run.write_manifest(path)
}

fn gen_corpus(mut cfg: RunConfig, a: GenCorpusArgs) -> Result<()> {
    cfg.pipeline.skip_local |= a.skip_local;
    cfg.pipeline.skip_global |= a.skip_global;
    if let Some(f) = a.filter_fraction {
        cfg.pipeline.filter_fraction = f;
    }
    if let Some(r) = a.score_rule {
        cfg.pipeline.score_rule = r.into();
    }
    if a.few_shot_file.is_some() {
        cfg.pipeline.few_shot_path = a.few_shot_file.clone();
    }
    cfg.require_seed()?;
    let mut tasks = read_lines(&a.tasks)?;
    if let Some(limit) = a.limit {
        tasks.truncate(limit);
    }
    if tasks.is_empty() {
        return Err(Error::Usage(format!(
            "{} lists no tasks",
            a.tasks.display()
        )));
    }
    let examples = match &cfg.pipeline.few_shot_path {
        Some(p) => FewShotExamples::from_path(p)?,
        None => FewShotExamples::bundled(),
    };
    let gateways = Gateways::for_config(&cfg, true)?;
    let gateway = gateways.main.as_ref().expect("main gateway requested");
    let matcher = gateways.matcher(&cfg)?;
    let coverage = match (&cfg.matcher, gateways.judge()) {
        (MatcherKind::LlmJudge, Some(judge)) => PlanCoverage::Llm(judge),
        _ => PlanCoverage::Matcher(&matcher),
    };
    let pipeline = Pipeline::new(gateway, cfg.pipeline.clone(), &examples, coverage)?;
    let output = pipeline.run(&tasks, cfg.jobs)?;

    let mut inputs: Vec<&Path> = vec![&a.tasks];
    if let Some(p) = &cfg.pipeline.few_shot_path {
        inputs.push(p);
    }
    let run = record("gen-corpus", &cfg, &inputs)?;
    write_artifact(&run, &a.out.join("plans.jsonl"), &output.plans)?;
    write_artifact(&run, &a.out.join("reports.jsonl"), &output.reports)?;
    write_artifact(&run, &a.out.join("corpus.jsonl"), &output.kept)?;
    write_artifact(&run, &a.out.join("discarded.jsonl"), &output.discarded)?;
    write_artifact(&run, &a.out.join("failures.jsonl"), &output.failures)?;
    println!(
        "{}: {} tasks, {} plans built, {} failed, {} kept, {} discarded",
        cfg.pipeline.variant(),
        tasks.len(),
        output.plans.len(),
        output.failures.len(),
        output.kept.len(),
        output.discarded.len()
    );
    println!("backend calls: {}", gateway.backend_calls());
    Ok(())
}

fn reports_for(
    cfg: &RunConfig,
    gateways: &Gateways,
    corpus: &[ActionPlan],
) -> Result<Vec<ChainingReport>> {
    let rule = cfg.pipeline.score_rule;
    if let (MatcherKind::LlmJudge, Some(judge)) = (&cfg.matcher, gateways.judge()) {
        return corpus
            .iter()
            .map(|p| llm_chaining_report(judge, p, rule).map_err(Error::from))
            .collect();
    }
    let matcher = gateways.matcher(cfg)?;
    corpus
        .iter()
        .map(|p| chaining_report(p, &matcher, rule).map_err(Error::from))
        .collect()
}

fn filter(mut cfg: RunConfig, a: FilterArgs) -> Result<()> {
    if let Some(f) = a.fraction {
        cfg.pipeline.filter_fraction = f;
    }
    if let Some(r) = a.score_rule {
        cfg.pipeline.score_rule = r.into();
    }
    cfg.pipeline.validate()?;
    let corpus = read_corpus(&a.corpus)?;
    let mut inputs: Vec<&Path> = vec![&a.corpus];
    let reports = match &a.reports {
        Some(path) => {
            inputs.push(path);
            read_jsonl(path)?
        }
        None => {
            let gateways = Gateways::for_config(&cfg, false)?;
            reports_for(&cfg, &gateways, &corpus)?
        }
    };
    let n = corpus.len();
    let fraction = cfg.pipeline.filter_fraction;
    let filtered = filter_corpus(corpus, &reports, fraction)?;
    let run = record("filter", &cfg, &inputs)?;
    write_artifact(&run, &a.kept, &filtered.kept)?;
    write_artifact(&run, &a.discarded, &filtered.discarded)?;
    println!(
        "kept {}, discarded {} of {n} (fraction {fraction}, expected {})",
        filtered.kept.len(),
        filtered.discarded.len(),
        discard_count(fraction, n)
    );
    Ok(())
}

fn refactor(cfg: RunConfig, a: RefactorArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let gateways = Gateways::for_config(&cfg, false)?;
    let matcher = gateways.matcher(&cfg)?;
    let traces = derive_traces(&corpus, &matcher)?;
    let mut records = Vec::new();
    let mut warnings = 0;
    for trace in &traces {
        for w in &trace.warnings {
            log::warn!("{}: {w}", trace.plan_id);
            warnings += 1;
        }
        records.extend(trace.records());
    }
    let run = record("refactor", &cfg, &[&a.corpus])?;
    write_artifact(&run, &a.out, &records)?;
    println!(
        "{} plans, {} states, {warnings} warnings",
        traces.len(),
        records.len()
    );
    Ok(())
}

fn export_training(cfg: RunConfig, a: ExportArgs) -> Result<()> {
    let corpus = read_corpus(&a.corpus)?;
    let direction = match a.direction {
        DirectionChoice::Precondition => Direction::Precondition,
        DirectionChoice::Effect => Direction::Effect,
    };
    let pairs = export_training_pairs(&corpus, direction, a.include_task)?;
    let run = record("export-training", &cfg, &[&a.corpus])?;
    write_artifact(&run, &a.out, &pairs)?;
    println!("{} {direction} pairs", pairs.len());
    Ok(())
}

/// One evaluated corpus in a report.
#[derive(Debug, Serialize)]
struct RunEntry {
    label: String,
    corpus: FileDigest,
    /// Hash of the corpus's own manifest, linking the scores to the run
    /// that built it.
    corpus_manifest_sha256: Option<String>,
    stages: Vec<Stage>,
    reports: Vec<MetricReport>,
}

fn run_entry(
    spec: &RunSpec,
    corpus: &[ActionPlan],
    reports: Vec<MetricReport>,
) -> Result<RunEntry> {
    let stages = corpus
        .first()
        .map(|p| p.provenance.stages.clone())
        .unwrap_or_default();
    Ok(RunEntry {
        label: spec.label.clone(),
        corpus: FileDigest::of(&spec.corpus)?,
        corpus_manifest_sha256: manifest_hash(&spec.corpus)?,
        stages,
        reports,
    })
}

#[derive(Debug, Serialize)]
struct EvalReport<'a> {
    command: &'a str,
    config_hash: String,
    seed: Option<u64>,
    test_corpus: Option<FileDigest>,
    runs: Vec<RunEntry>,
}

fn eval_record(
    command: &str,
    cfg: &RunConfig,
    runs: &[RunSpec],
    test: Option<&Path>,
) -> Result<RunRecord> {
    let mut inputs: Vec<&Path> = runs.iter().map(|r| r.corpus.as_path()).collect();
    inputs.extend(test);
    record(command, cfg, &inputs)
}

/// `report.json` and `report.txt`, each with a manifest.
fn write_reports<T: Serialize>(run: &RunRecord, dir: &Path, report: &T, table: &str) -> Result<()> {
    let json = dir.join("report.json");
    let txt = dir.join("report.txt");
    write_json(&json, report)?;
    write_text(&txt, table)?;
    run.write_manifest(&json)?;
    run.write_manifest(&txt)
}

fn inference_reference() -> String {
    let rows = |table: &[(&str, [f64; 5])]| -> Vec<ReportRow> {
        table
            .iter()
            .map(|(label, v)| ReportRow {
                label: (*label).into(),
                values: v.iter().map(|&x| Some(x)).collect(),
            })
            .collect()
    };
    render_inference_table(
        &rows(&reference::PRECONDITION_INFERENCE),
        &rows(&reference::EFFECT_INFERENCE),
    )
}

fn eval_inference(cfg: RunConfig, a: EvalInferenceArgs) -> Result<()> {
    let seed = match a.holdout {
        Some(_) => Some(cfg.require_seed()?),
        None => cfg.seed,
    };
    let test_corpus = a.test.as_deref().map(read_corpus).transpose()?;
    let embedder = cfg.embedder.build()?;
    let gateways = Gateways::for_config(&cfg, false)?;
    let include_task = cfg.inference.include_task;
    let run = eval_record("eval-inference", &cfg, &a.runs, a.test.as_deref())?;
    let mut pre_rows = Vec::new();
    let mut eff_rows = Vec::new();
    let mut entries = Vec::new();
    for spec in &a.runs {
        let corpus = read_corpus(&spec.corpus)?;
        let (train, cases): (Vec<ActionPlan>, Vec<InferenceCase>) = match (&test_corpus, a.holdout)
        {
            (Some(test), _) => (corpus.clone(), build_inference_testset(test)),
            (None, Some(n)) => {
                let split = split_holdout(&corpus, n, seed.expect("seed checked"))?;
                let cases = split.inference_cases();
                (split.train, cases)
            }
            (None, None) => (corpus.clone(), build_inference_testset(&corpus)),
        };
        if cases.is_empty() {
            return Err(Error::Usage(format!(
                "{}: no inference test cases",
                spec.label
            )));
        }
        write_artifact(
            &run,
            &a.out.join(format!("testset.{}.jsonl", spec.label)),
            &cases,
        )?;
        let backend = gateways.inference(&cfg.inference, &train)?;
        let pre = evaluate_inference(
            &backend,
            &cases,
            Direction::Precondition,
            include_task,
            &embedder,
        )?;
        let eff = evaluate_inference(&backend, &cases, Direction::Effect, include_task, &embedder)?;
        pre_rows.push(ReportRow::inference(&spec.label, &pre));
        eff_rows.push(ReportRow::inference(&spec.label, &eff));
        entries.push(run_entry(spec, &corpus, vec![pre, eff])?);
    }
    let table = render_inference_table(&pre_rows, &eff_rows);
    let report = EvalReport {
        command: "eval-inference",
        config_hash: cfg.hash(),
        seed,
        test_corpus: a.test.as_deref().map(FileDigest::of).transpose()?,
        runs: entries,
    };
    write_reports(
        &run,
        &a.out,
        &report,
        &format!(
            "{table}\nreference (large-scale corpus, fine-tuned models)\n{}",
            inference_reference()
        ),
    )?;
    print!("{table}");
    Ok(())
}

fn eval_world_model(cfg: RunConfig, a: EvalWorldModelArgs) -> Result<()> {
    let seed = cfg.require_seed()?;
    let test_corpus = a.test.as_deref().map(read_corpus).transpose()?;
    let embedder = cfg.embedder.build()?;
    let gateways = Gateways::for_config(&cfg, false)?;
    let matcher = gateways.matcher(&cfg)?;
    let run = eval_record("eval-worldmodel", &cfg, &a.runs, a.test.as_deref())?;
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for spec in &a.runs {
        let corpus = read_corpus(&spec.corpus)?;
        let test = test_corpus.as_deref().unwrap_or(&corpus);
        let traces = derive_traces(test, &matcher)?;
        let n = match a.cases {
            Some(n) => n,
            None => balanced_capacity(test, &traces, &matcher)?,
        };
        let valid = build_valid_action_testset(test, &traces, &matcher, n, seed)?;
        let transitions = build_transition_testset(test, &traces, a.transitions, seed)?;
        write_artifact(
            &run,
            &a.out.join(format!("valid_action.{}.jsonl", spec.label)),
            &valid,
        )?;
        write_artifact(
            &run,
            &a.out.join(format!("transition.{}.jsonl", spec.label)),
            &transitions,
        )?;
        let model = WorldModel::new(gateways.inference(&cfg.inference, &corpus)?, &matcher);
        let report = evaluate_world_model(&model, &valid, &transitions, &embedder)?;
        rows.push(ReportRow::world_model(&spec.label, &report));
        entries.push(run_entry(spec, &corpus, vec![report])?);
    }
    let table = render_world_model_table(&rows);
    let reference_rows: Vec<ReportRow> = reference::WORLD_MODEL
        .iter()
        .map(|(label, v)| ReportRow {
            label: (*label).into(),
            values: v.iter().map(|&x| Some(x)).collect(),
        })
        .collect();
    let report = EvalReport {
        command: "eval-worldmodel",
        config_hash: cfg.hash(),
        seed: Some(seed),
        test_corpus: a.test.as_deref().map(FileDigest::of).transpose()?,
        runs: entries,
    };
    write_reports(
        &run,
        &a.out,
        &report,
        &format!(
            "{table}\nreference (large-scale corpus, fine-tuned models)\n{}",
            render_world_model_table(&reference_rows)
        ),
    )?;
    print!("{table}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct SearchReport {
    config_hash: String,
    seed: Option<u64>,
    train_plans: usize,
    pool_size: usize,
    candidates: usize,
    unseen: usize,
    summary: SearchSummary,
    reference_pct_satisfiable: f64,
    reference_mean_ways: f64,
}

fn analyze_search(cfg: RunConfig, a: SearchArgs) -> Result<()> {
    let corpus = read_corpus(&a.train)?;
    let mut inputs: Vec<&Path> = vec![&a.train];
    let (train, lookup_plans, candidates) = if let Some(n) = a.holdout {
        let split = split_holdout(&corpus, n, cfg.require_seed()?)?;
        let candidates = actions_of(&split.test);
        (split.train, corpus.clone(), candidates)
    } else if let Some(path) = &a.test {
        inputs.push(path);
        let test = read_corpus(path)?;
        let candidates = actions_of(&test);
        let mut all = corpus.clone();
        all.extend(test);
        (corpus, all, candidates)
    } else if let Some(path) = &a.actions {
        inputs.push(path);
        (corpus.clone(), corpus, read_lines(path)?)
    } else {
        return Err(Error::Usage(
            "one of --test, --holdout or --actions is required".into(),
        ));
    };
    let unseen = unseen_actions(&candidates, &train);
    let gateways = Gateways::for_config(&cfg, false)?;
    let matcher = gateways.matcher(&cfg)?;
    // The lookup needs gold annotations for the candidates too; the other
    // backends only see the training corpus.
    let backend = match cfg.inference.kind {
        InferenceKind::CorpusLookup => gateways.inference(&cfg.inference, &lookup_plans)?,
        _ => gateways.inference(&cfg.inference, &train)?,
    };
    let pool = build_effect_pool(&train, &backend)?;
    let (results, summary) = analyze(&unseen, &pool, &matcher, &backend)?;
    let run = record("analyze-search", &cfg, &inputs)?;
    write_artifact(&run, &a.out.join("results.jsonl"), &results)?;
    let report = SearchReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        train_plans: train.len(),
        pool_size: pool.len(),
        candidates: candidates.len(),
        unseen: unseen.len(),
        summary: summary.clone(),
        reference_pct_satisfiable: reference::PCT_SATISFIABLE,
        reference_mean_ways: reference::MEAN_WAYS,
    };
    let summary_path = a.out.join("summary.json");
    write_json(&summary_path, &report)?;
    run.write_manifest(&summary_path)?;
    let ways = summary
        .mean_ways_over_satisfiable
        .map_or_else(|| "-".to_string(), |w| format!("{w:.2}"));
    println!(
        "{} unseen actions, {} satisfiable ({:.2}%), mean ways {ways}, pool {}",
        summary.actions,
        summary.satisfiable,
        summary.pct_satisfiable,
        pool.len()
    );
    Ok(())
}

fn actions_of(plans: &[ActionPlan]) -> Vec<String> {
    plans
        .iter()
        .flat_map(|p| &p.steps)
        .map(|s| s.action_text.clone())
        .collect()
}

fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>) -> String {
    let out: Vec<String> = items.into_iter().map(|i| i.to_string()).collect();
    if out.is_empty() {
        "-".into()
    } else {
        out.join("; ")
    }
}

fn replay(cfg: RunConfig, a: ReplayArgs) -> Result<()> {
    let plans = read_corpus(&a.plan)?;
    let plans: Vec<&ActionPlan> = match &a.plan_id {
        Some(id) => plans.iter().filter(|p| &p.id == id).collect(),
        None => plans.iter().collect(),
    };
    if plans.is_empty() {
        return Err(Error::Usage("no plan to replay".into()));
    }
    let gateways = Gateways::for_config(&cfg, false)?;
    let matcher: AnyMatcher = gateways.matcher(&cfg)?;
    let mut out = String::new();
    let (mut steps, mut invalid) = (0, 0);
    for plan in plans {
        let trace = derive_state_trace(plan, &matcher)?;
        let _ = writeln!(
            out,
            "plan {} ({} steps): {}",
            plan.id,
            plan.steps.len(),
            plan.task_description
        );
        let _ = writeln!(out, "state 0: {}", join(trace.states[0].iter()));
        for (k, step) in plan.steps.iter().enumerate() {
            let verdict = check_preconditions(&matcher, &step.preconditions, &trace.states[k])?;
            steps += 1;
            if verdict.valid {
                let _ = writeln!(
                    out,
                    "step {} {}: {}: valid",
                    k + 1,
                    step.id,
                    step.action_text
                );
            } else {
                invalid += 1;
                let _ = writeln!(
                    out,
                    "step {} {}: {}: INVALID, unmet: {}",
                    k + 1,
                    step.id,
                    step.action_text,
                    join(&verdict.unmatched)
                );
            }
            let delta = &trace.deltas[k];
            let _ = writeln!(out, "  add: {}", join(delta.additions()));
            let _ = writeln!(out, "  delete: {}", join(delta.deletions()));
            let _ = writeln!(out, "state {}: {}", k + 1, join(trace.states[k + 1].iter()));
        }
        for w in &trace.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
    }
    let _ = writeln!(out, "{}/{steps} steps valid", steps - invalid);
    print!("{out}");
    if invalid > 0 {
        return Err(Error::CheckFailed(format!(
            "{invalid} of {steps} steps are not valid in their state"
        )));
    }
    Ok(())
}

fn check(a: CheckEndpointArgs) -> Result<()> {
    let results = check_endpoint(&a.base_url, &a.model, a.timeout);
    let failed = results.iter().filter(|r| !r.passed).count();
    for r in &results {
        println!(
            "{} {}: {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    if failed > 0 {
        return Err(Error::CheckFailed(format!(
            "{failed} of {} endpoint checks failed",
            results.len()
        )));
    }
    Ok(())
}
