//! Command implementations: stage plumbing, audit sidecars, evaluation.

use std::path::{Path, PathBuf};

use corpus_core::backend::BackendRegistry;
use corpus_core::config::PipelineConfig;
use corpus_core::eval::{join_manifests, render_table, report, SplitFile};
use corpus_core::manifest::{read_manifest, write_manifest, UtteranceRecord};
use corpus_core::pipeline::{
    fuse_stage, labels_stage, partition_stage, punctuate_stage, quality_stage, segment_stage,
    speakers_stage, DomainMap, PipelineContext, StageOutcome,
};
use corpus_core::PipelineError;

use crate::{EvaluateArgs, RunAllArgs, SegmentArgs, StageIo};

/// Failures the top level turns into exit codes: `Usage` exits 2 (bad
/// invocation, missing inputs), `Failure` exits 1 (a stage could not run to
/// completion or could not write its output).
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::Failure(e.to_string())
    }
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} not found", path.display())))
    }
}

fn require_dir(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("{what} {} not found", path.display())))
    }
}

/// Build the stage context: thresholds from the config file (or defaults),
/// all backends mocked under the seed, then endpoint overrides from the
/// registry file, then from `CORPUS_BACKEND_*` environment variables.
fn build_context(common: &crate::CommonOpts) -> Result<PipelineContext, CliError> {
    let config = PipelineConfig::load_or_default(common.config.as_deref())?;
    let mut registry = BackendRegistry::with_mocks(common.seed.unwrap_or(0));
    if let Some(path) = &common.backend_registry {
        require_file(path, "backend registry")?;
        registry.load_file(path)?;
    }
    registry.apply_env()?;
    Ok(PipelineContext::new(config, registry, common.jobs))
}

fn domain_map(args_domain: corpus_core::manifest::Domain, file: Option<&Path>) -> Result<DomainMap, CliError> {
    match file {
        Some(path) => {
            require_file(path, "domain map")?;
            Ok(DomainMap::load(path, args_domain)?)
        }
        None => Ok(DomainMap::uniform(args_domain)),
    }
}

/// Sibling of `out` with the final extension swapped for `suffix`
/// (`seg.jsonl` → `seg.stats.json`).
fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

/// Write the machine-readable audit trail next to the output manifest:
/// stage stats as JSON, discarded records and per-record failures as JSONL.
fn write_sidecars(out: &Path, outcome: &StageOutcome) -> Result<(), CliError> {
    let stats_path = sidecar(out, "stats.json");
    let stats = serde_json::to_string_pretty(&outcome.stats)
        .map_err(|e| CliError::Failure(format!("serializing stage stats: {e}")))?;
    std::fs::write(&stats_path, stats + "\n")
        .map_err(|e| CliError::Failure(format!("writing {}: {e}", stats_path.display())))?;
    write_jsonl(&sidecar(out, "discarded.jsonl"), &outcome.discarded)?;
    write_jsonl(&sidecar(out, "failed.jsonl"), &outcome.failures)?;
    Ok(())
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> Result<(), CliError> {
    let mut buffer = String::new();
    for item in items {
        let line = serde_json::to_string(item)
            .map_err(|e| CliError::Failure(format!("serializing audit line: {e}")))?;
        buffer.push_str(&line);
        buffer.push('\n');
    }
    std::fs::write(path, buffer)
        .map_err(|e| CliError::Failure(format!("writing {}: {e}", path.display())))
}

/// Human-readable summary on standard error; the sidecars carry the same
/// information for machines.
fn print_summary(stage: &str, outcome: &StageOutcome) {
    let s = &outcome.stats;
    eprintln!(
        "[{stage}] processed {} | kept {} | discarded {} | failed {}",
        s.processed, s.kept, s.discarded, s.failed
    );
    for note in &outcome.notes {
        eprintln!("[{stage}] {note}");
    }
}

/// Shared driver for every manifest-to-manifest stage command.
pub fn manifest_stage(
    name: &str,
    io: &StageIo,
    stage: fn(Vec<UtteranceRecord>, &PipelineContext) -> Result<StageOutcome, PipelineError>,
) -> Result<(), CliError> {
    require_file(&io.input, "input manifest")?;
    let ctx = build_context(&io.common)?;
    let records = read_manifest(&io.input)?;
    let outcome = stage(records, &ctx)?;
    write_manifest(&outcome.records, &io.out)?;
    write_sidecars(&io.out, &outcome)?;
    print_summary(name, &outcome);
    Ok(())
}

pub fn segment(args: &SegmentArgs) -> Result<(), CliError> {
    require_dir(&args.input, "audio directory")?;
    let ctx = build_context(&args.common)?;
    let domains = domain_map(args.domain, args.domains.as_deref())?;
    let outcome = segment_stage(&args.input, &domains, &ctx)?;
    write_manifest(&outcome.records, &args.out)?;
    write_sidecars(&args.out, &outcome)?;
    print_summary("segment", &outcome);
    Ok(())
}

pub fn run_all(args: &RunAllArgs) -> Result<(), CliError> {
    require_dir(&args.input, "audio directory")?;
    let ctx = build_context(&args.common)?;
    let domains = domain_map(args.domain, args.domains.as_deref())?;
    std::fs::create_dir_all(&args.workdir)
        .map_err(|e| CliError::Failure(format!("creating {}: {e}", args.workdir.display())))?;

    // Each stage writes the same manifest the standalone subcommand would,
    // so a run-all work directory and a hand-chained run are interchangeable.
    let mut records = step(args, "segment", "01_segment.jsonl", None, |_| {
        segment_stage(&args.input, &domains, &ctx)
    })?;
    for (name, file, stage) in [
        ("speakers", "02_speakers.jsonl", speakers_stage as StageFn),
        ("labels", "03_labels.jsonl", labels_stage as StageFn),
        ("quality", "04_quality.jsonl", quality_stage as StageFn),
        ("fuse", "05_fuse.jsonl", fuse_stage as StageFn),
        ("punctuate", "06_punctuate.jsonl", punctuate_stage as StageFn),
    ] {
        records = step(args, name, file, Some(records), |input| {
            stage(input.expect("manifest stage input"), &ctx)
        })?;
    }

    let outcome = partition_stage(records, &ctx)?;
    write_manifest(&outcome.records, &args.out)?;
    write_sidecars(&args.out, &outcome)?;
    print_summary("partition", &outcome);
    Ok(())
}

type StageFn = fn(Vec<UtteranceRecord>, &PipelineContext) -> Result<StageOutcome, PipelineError>;

/// Run one stage of `run-all`, or reuse its intermediate manifest when
/// resuming. `input` is `None` for the segment stage, which reads audio.
fn step(
    args: &RunAllArgs,
    name: &str,
    file: &str,
    input: Option<Vec<UtteranceRecord>>,
    run: impl FnOnce(Option<Vec<UtteranceRecord>>) -> Result<StageOutcome, PipelineError>,
) -> Result<Vec<UtteranceRecord>, CliError> {
    let path = args.workdir.join(file);
    if args.resume && path.is_file() {
        eprintln!("[{name}] resuming from {}", path.display());
        return Ok(read_manifest(&path)?);
    }
    let outcome = run(input)?;
    write_manifest(&outcome.records, &path)?;
    write_sidecars(&path, &outcome)?;
    print_summary(name, &outcome);
    Ok(outcome.records)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    require_file(&args.reference, "reference manifest")?;
    require_file(&args.hypothesis, "hypothesis manifest")?;
    require_file(&args.splits, "split file")?;
    let reference = read_manifest(&args.reference)?;
    let hypothesis = read_manifest(&args.hypothesis)?;
    let splits = SplitFile::load(&args.splits)?;
    let pairs = join_manifests(&reference, &hypothesis, &splits)?;
    let eval_report = report(&pairs, &splits.order)?;
    print!("{}", render_table(&eval_report));
    if let Some(out) = &args.out {
        let body = serde_json::to_string_pretty(&eval_report)
            .map_err(|e| CliError::Failure(format!("serializing report: {e}")))?;
        std::fs::write(out, body + "\n")
            .map_err(|e| CliError::Failure(format!("writing {}: {e}", out.display())))?;
    }
    Ok(())
}
