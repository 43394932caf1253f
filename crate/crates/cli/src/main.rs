//! `corpus` — command-line front end for the corpus construction pipeline.
//!
//! Every stage of the pipeline is exposed as a subcommand that reads an
//! input manifest (or a directory of WAV recordings, for `segment`) and
//! writes an output manifest plus machine-readable audit sidecars. `run-all`
//! chains the stages in order, keeping intermediate manifests in a work
//! directory so interrupted runs can resume. `evaluate` scores a hypothesis
//! manifest against references, and `mock-backend` serves the deterministic
//! mock model backends over stdio or HTTP for wiring tests.
//!
//! Exit codes: 0 success, 1 stage failure (invalid records, unwritable
//! output, backend registry problems), 2 usage errors (unknown flags,
//! missing inputs).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use corpus_core::manifest::Domain;
use corpus_core::pipeline::{
    fuse_stage, labels_stage, partition_stage, punctuate_stage, quality_stage, speakers_stage,
};

mod ops;
mod server;

use ops::CliError;

#[derive(Parser, Debug)]
#[command(name = "corpus", version, about = "Build and score speech corpus manifests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every pipeline stage. Precedence for each value is
/// CLI flag, then environment variable, then config file, then default.
#[derive(Args, Debug, Clone, Default)]
struct CommonOpts {
    /// Pipeline thresholds, TOML (defaults are built in).
    #[arg(long, value_name = "FILE", env = "CORPUS_CONFIG")]
    config: Option<PathBuf>,

    /// Maximum in-flight backend requests (default: available parallelism).
    #[arg(long, value_name = "N", env = "CORPUS_JOBS")]
    jobs: Option<usize>,

    /// Seed for the deterministic mock backends.
    #[arg(long, value_name = "N", env = "CORPUS_SEED")]
    seed: Option<u64>,

    /// Backend endpoints, TOML: `[endpoints]` mapping backend kinds to
    /// "mock", "http(s)://…", or "cmd:…". Unlisted kinds stay mocked.
    #[arg(long, value_name = "FILE", env = "CORPUS_BACKEND_REGISTRY")]
    backend_registry: Option<PathBuf>,
}

/// Input/output paths for a manifest-to-manifest stage.
#[derive(Args, Debug)]
struct StageIo {
    /// Input manifest (JSONL).
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,

    /// Output manifest (JSONL); `<out>.stats.json`, `<out>.discarded.jsonl`
    /// and `<out>.failed.jsonl` are written next to it.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,

    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    /// Directory of source WAV recordings.
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,

    /// Output manifest (JSONL).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,

    /// Domain tag for sources not listed in --domains.
    #[arg(long, value_name = "TAG", default_value = "short_video")]
    domain: Domain,

    /// Per-source domain map, JSON:
    /// {"default": "news", "sources": {"<source_id>": "drama"}}.
    #[arg(long, value_name = "FILE")]
    domains: Option<PathBuf>,

    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args, Debug)]
struct RunAllArgs {
    /// Directory of source WAV recordings.
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,

    /// Final partitioned manifest.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,

    /// Directory for intermediate per-stage manifests.
    #[arg(long, value_name = "DIR")]
    workdir: PathBuf,

    /// Reuse intermediate manifests already present in --workdir instead of
    /// recomputing the stages that produced them.
    #[arg(long)]
    resume: bool,

    /// Domain tag for sources not listed in --domains.
    #[arg(long, value_name = "TAG", default_value = "short_video")]
    domain: Domain,

    /// Per-source domain map, JSON (see `segment --help`).
    #[arg(long, value_name = "FILE")]
    domains: Option<PathBuf>,

    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Reference manifest with ground-truth transcriptions.
    #[arg(long = "ref", value_name = "FILE")]
    reference: PathBuf,

    /// Hypothesis manifest to score.
    #[arg(long = "hyp", value_name = "FILE")]
    hypothesis: PathBuf,

    /// Split assignment, JSON:
    /// {"order": ["Easy", "Hard"], "map": {"<utterance_id>": "Easy"}}.
    #[arg(long, value_name = "FILE")]
    splits: PathBuf,

    /// Also write the report as JSON.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MockBackendArgs {
    /// Seed; match the --seed given to pipeline commands.
    #[arg(long, value_name = "N", env = "CORPUS_SEED", default_value_t = 0)]
    seed: u64,

    /// Serve HTTP POST on this address (e.g. 127.0.0.1:8090) instead of
    /// answering newline-delimited JSON on stdio.
    #[arg(long, value_name = "ADDR")]
    http: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cut raw WAV recordings into clip records via energy VAD.
    Segment(SegmentArgs),
    /// Cluster speaker embeddings into per-source speaker ids.
    Speakers(StageIo),
    /// Attach gender, age-stage, and emotion labels.
    Labels(StageIo),
    /// Score perceptual quality and drop clips that fail the gate.
    Quality(StageIo),
    /// Fuse ASR hypotheses, apply the corrector, and score confidence.
    Fuse(StageIo),
    /// Restore punctuation from pause structure and text-model marks.
    Punctuate(StageIo),
    /// Assign final label tiers and drop low-confidence records.
    Partition(StageIo),
    /// Score a hypothesis manifest against references, per split.
    Evaluate(EvaluateArgs),
    /// Run segment → speakers → labels → quality → fuse → punctuate →
    /// partition from raw audio to the final manifest.
    RunAll(RunAllArgs),
    /// Serve the deterministic mock model backends (stdio or HTTP).
    MockBackend(MockBackendArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Failure(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Segment(args) => ops::segment(&args),
        Command::Speakers(io) => ops::manifest_stage("speakers", &io, speakers_stage),
        Command::Labels(io) => ops::manifest_stage("labels", &io, labels_stage),
        Command::Quality(io) => ops::manifest_stage("quality", &io, quality_stage),
        Command::Fuse(io) => ops::manifest_stage("fuse", &io, fuse_stage),
        Command::Punctuate(io) => ops::manifest_stage("punctuate", &io, punctuate_stage),
        Command::Partition(io) => ops::manifest_stage("partition", &io, partition_stage),
        Command::Evaluate(args) => ops::evaluate(&args),
        Command::RunAll(args) => ops::run_all(&args),
        Command::MockBackend(args) => server::serve(&args),
    }
}
