//! The corpus-construction stages as library functions.
//!
//! Each stage maps the previous stage's records to the next stage's records
//! and reports uniform bookkeeping: how many records it saw, kept,
//! deliberately discarded, and failed on. Per-record failures never abort a
//! stage — failed records are surfaced for audit/retry while the rest flow
//! on. Every stage is deterministic under a fixed seed and independent of
//! the worker count.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::{detect_speech_regions, estimate_snr, frame_energies, read_wav, segment_regions};
use crate::backend::{
    call_age, call_align, call_asr, call_embed, call_emotion, call_gender, call_llm_correct,
    call_punct, call_quality, run_stage_batch, AlignPayload, AudioSpanPayload, BackendError,
    BackendRegistry, LlmCorrectPayload, PunctPayload, QualityPayload,
};
use crate::config::PipelineConfig;
use crate::error::PipelineError;
use crate::fusion::{
    build_wtn, compute_confidence, detokenize, llm_correct, partition_by_confidence,
    render_prompt, rover_vote, tokenize, Corrector, Hypothesis,
};
use crate::labels::{label_records, LabelResponses};
use crate::manifest::{Domain, Emotion, Gender, LabelTier, UtteranceRecord};
use crate::punctuate::{punctuate_record, words_from_spans};
use crate::quality::{gate, histogram_table, quality_histogram, score_quality};
use crate::speaker::{
    assign_speaker_ids, cluster_embeddings, filter_single_speaker, SpeakerEmbedding,
};

/// Everything a stage needs besides its records.
pub struct PipelineContext {
    pub config: PipelineConfig,
    pub registry: BackendRegistry,
    /// Maximum in-flight backend requests.
    pub jobs: usize,
}

impl PipelineContext {
    pub fn new(config: PipelineConfig, registry: BackendRegistry, jobs: Option<usize>) -> Self {
        let jobs = jobs
            .unwrap_or_else(|| {
                std::thread::available_parallelism()
                    .map(std::num::NonZeroUsize::get)
                    .unwrap_or(4)
            })
            .max(1);
        PipelineContext {
            config,
            registry,
            jobs,
        }
    }
}

/// Machine-readable stage audit: `kept + discarded + failed = processed`
/// for every manifest-to-manifest stage. The segmentation stage is the one
/// exception: it counts source recordings in `processed`/`failed` and
/// emitted clips in `kept`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageStats {
    pub processed: usize,
    pub kept: usize,
    pub discarded: usize,
    pub failed: usize,
}

/// One record (or source file) a stage could not process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub utterance_id: String,
    pub message: String,
    /// The record as it looked entering the stage, when one existed.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub record: Option<UtteranceRecord>,
}

/// One record a stage deliberately dropped, with the gate that dropped it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscardedRecord {
    pub reason: String,
    pub record: UtteranceRecord,
}

/// A stage's full output: surviving records plus the audit trail.
#[derive(Debug, Default)]
pub struct StageOutcome {
    pub records: Vec<UtteranceRecord>,
    pub discarded: Vec<DiscardedRecord>,
    pub failures: Vec<StageFailure>,
    pub stats: StageStats,
    /// Human-readable summary lines for standard error.
    pub notes: Vec<String>,
}

impl StageOutcome {
    fn fail(&mut self, utterance_id: &str, message: String, record: Option<UtteranceRecord>) {
        self.failures.push(StageFailure {
            utterance_id: utterance_id.to_string(),
            message,
            record,
        });
    }

    fn discard(&mut self, reason: &str, record: UtteranceRecord) {
        self.discarded.push(DiscardedRecord {
            reason: reason.to_string(),
            record,
        });
    }

    fn finish(mut self, processed: usize) -> Self {
        self.stats = StageStats {
            processed,
            kept: self.records.len(),
            discarded: self.discarded.len(),
            failed: self.failures.len(),
        };
        self
    }
}

/// Source-recording → domain assignment, with a default for unlisted
/// sources.
#[derive(Debug, Clone)]
pub struct DomainMap {
    default: Domain,
    by_source: BTreeMap<String, Domain>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainMapFile {
    default: Option<Domain>,
    #[serde(default)]
    sources: BTreeMap<String, Domain>,
}

impl DomainMap {
    pub fn uniform(default: Domain) -> Self {
        DomainMap {
            default,
            by_source: BTreeMap::new(),
        }
    }

    /// Load a JSON map `{"default": "...", "sources": {"<source_id>": "..."}}`.
    pub fn load(path: &Path, fallback: Domain) -> Result<Self, PipelineError> {
        let raw = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let file: DomainMapFile = serde_json::from_str(&raw).map_err(|e| {
            PipelineError::InvalidConfig(format!("bad domain map {}: {e}", path.display()))
        })?;
        Ok(DomainMap {
            default: file.default.unwrap_or(fallback),
            by_source: file.sources,
        })
    }

    pub fn resolve(&self, source_id: &str) -> Domain {
        self.by_source.get(source_id).copied().unwrap_or(self.default)
    }
}

fn span_payload(record: &UtteranceRecord) -> AudioSpanPayload {
    AudioSpanPayload {
        audio_path: record.audio_path.clone(),
        start_s: record.start_s,
        end_s: record.end_s,
    }
}

/// Scan a directory of WAV recordings and cut them into clip records.
///
/// Files are processed in name order; clips within one source are numbered
/// by start time, so output is independent of scan order and worker count.
/// Unreadable or undecodable files are reported as failures; the rest of
/// the directory still segments.
pub fn segment_stage(
    audio_dir: &Path,
    domains: &DomainMap,
    ctx: &PipelineContext,
) -> Result<StageOutcome, PipelineError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(audio_dir)
        .map_err(|e| PipelineError::io(audio_dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|ext| ext.eq_ignore_ascii_case("wav"))
                .unwrap_or(false)
        })
        .collect();
    paths.sort();

    let mut outcome = StageOutcome::default();
    let processed = paths.len();
    for path in paths {
        let source_id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let clips = match segment_one(&path, ctx) {
            Ok(clips) => clips,
            Err(e) => {
                outcome.fail(&source_id, e.to_string(), None);
                continue;
            }
        };
        for (index, (start_s, end_s, snr_db)) in clips.into_iter().enumerate() {
            outcome.records.push(UtteranceRecord::new(
                format!("{source_id}_{index:04}"),
                &source_id,
                path.display().to_string(),
                start_s,
                end_s,
                domains.resolve(&source_id),
                snr_db,
            ));
        }
    }
    outcome.notes.push(format!(
        "segmented {} clips from {} recordings",
        outcome.records.len(),
        processed - outcome.failures.len()
    ));
    Ok(outcome.finish(processed))
}

fn segment_one(
    path: &Path,
    ctx: &PipelineContext,
) -> Result<Vec<(f64, f64, f64)>, PipelineError> {
    let vad = &ctx.config.vad;
    let audio = read_wav::<f64>(path)?;
    let energies = frame_energies(&audio.samples, audio.sample_rate, vad.frame_ms, vad.hop_ms)?;
    let regions = detect_speech_regions(&energies, audio.sample_rate, vad);
    let clips = segment_regions(&regions, &energies, audio.sample_rate, vad, &ctx.config.segment);
    clips
        .into_iter()
        .map(|(start_s, end_s)| {
            let snr_db = estimate_snr(&energies, audio.sample_rate, vad, (start_s, end_s))?;
            Ok((start_s, end_s, snr_db))
        })
        .collect()
}

/// Embed every clip, drop multi-speaker clips, cluster the rest per source
/// recording, and stamp speaker ids.
pub fn speakers_stage(
    records: Vec<UtteranceRecord>,
    ctx: &PipelineContext,
) -> Result<StageOutcome, PipelineError> {
    let processed = records.len();
    let results = run_stage_batch(
        &records,
        |record| call_embed(&ctx.registry, &record.utterance_id, &span_payload(record)),
        ctx.jobs,
    )?;

    let mut outcome = StageOutcome::default();
    let mut flags: HashMap<String, bool> = HashMap::new();
    let mut embeddings: HashMap<String, SpeakerEmbedding<f64>> = HashMap::new();
    let mut embedded: Vec<UtteranceRecord> = Vec::with_capacity(records.len());
    for (record, result) in records.into_iter().zip(results) {
        let id = record.utterance_id.clone();
        match result.and_then(|r| {
            SpeakerEmbedding::new(&id, r.embedding, r.multi_speaker)
                .map_err(|e| BackendError::InvalidResponse {
                    kind: crate::backend::BackendKind::Embed,
                    field: e.to_string(),
                })
        }) {
            Ok(embedding) => {
                flags.insert(id.clone(), embedding.multi_speaker);
                embeddings.insert(id, embedding);
                embedded.push(record);
            }
            Err(e) => outcome.fail(&id, e.to_string(), Some(record)),
        }
    }

    let (mut kept, removed) = filter_single_speaker(embedded, &flags)?;
    for record in removed {
        outcome.discard("multi_speaker", record);
    }

    let mut by_source: BTreeMap<&str, Vec<&UtteranceRecord>> = BTreeMap::new();
    for record in &kept {
        by_source
            .entry(record.source_id.as_str())
            .or_default()
            .push(record);
    }
    let mut clusters: HashMap<String, usize> = HashMap::new();
    let mut speaker_total = 0usize;
    for (_, group) in by_source {
        let group_embeddings: Vec<SpeakerEmbedding<f64>> = group
            .iter()
            .map(|r| embeddings[&r.utterance_id].clone())
            .collect();
        let labels =
            cluster_embeddings(&group_embeddings, ctx.config.cluster.distance_threshold)?;
        speaker_total += labels.values().collect::<std::collections::HashSet<_>>().len();
        clusters.extend(labels);
    }
    assign_speaker_ids(&mut kept, &clusters)?;
    outcome.records = kept;
    outcome.notes.push(format!(
        "{} speakers across {} clips",
        speaker_total,
        outcome.records.len()
    ));
    Ok(outcome.finish(processed))
}

struct FetchedLabels {
    gender: Option<Gender>,
    age_years: Option<f64>,
    votes: Option<Vec<Emotion>>,
    backend_failures: usize,
}

/// Attach gender, age stage, and voted emotion to every record. Labeling
/// never drops records: any classifier failure just leaves that field
/// `unknown`.
pub fn labels_stage(
    mut records: Vec<UtteranceRecord>,
    ctx: &PipelineContext,
) -> Result<StageOutcome, PipelineError> {
    let processed = records.len();
    let fetched = run_stage_batch(
        &records,
        |record| -> Result<FetchedLabels, BackendError> {
            let id = &record.utterance_id;
            let span = span_payload(record);
            let mut backend_failures = 0usize;
            let gender = match call_gender(&ctx.registry, id, &span) {
                Ok(r) => Some(r.gender),
                Err(_) => {
                    backend_failures += 1;
                    None
                }
            };
            let age_years = match call_age(&ctx.registry, id, &span) {
                Ok(r) => Some(r.age_years),
                Err(_) => {
                    backend_failures += 1;
                    None
                }
            };
            let votes = match call_emotion(&ctx.registry, id, &span) {
                Ok(r) => Some(r.votes),
                Err(_) => {
                    backend_failures += 1;
                    None
                }
            };
            Ok(FetchedLabels {
                gender,
                age_years,
                votes,
                backend_failures,
            })
        },
        ctx.jobs,
    )?;

    let mut responses = LabelResponses::default();
    let mut backend_failures = 0usize;
    for (record, fetched) in records.iter().zip(fetched) {
        let fetched = fetched.expect("label fetching is infallible per record");
        let id = record.utterance_id.clone();
        backend_failures += fetched.backend_failures;
        if let Some(g) = fetched.gender {
            responses.gender.insert(id.clone(), g);
        }
        if let Some(age) = fetched.age_years {
            responses.age_years.insert(id.clone(), age);
        }
        if let Some(votes) = fetched.votes {
            responses.emotions.insert(id, votes);
        }
    }
    label_records(&mut records, &responses);

    let unknown_genders = records.iter().filter(|r| r.gender == Gender::Unknown).count();
    let unknown_emotions = records
        .iter()
        .filter(|r| r.emotion == Emotion::Unknown)
        .count();
    let mut outcome = StageOutcome {
        records,
        ..StageOutcome::default()
    };
    outcome.notes.push(format!(
        "labeled {} clips ({unknown_genders} unknown gender, {unknown_emotions} unknown emotion, {backend_failures} classifier failures)",
        outcome.records.len()
    ));
    Ok(outcome.finish(processed))
}

/// Score perceptual quality for every record, then apply the duration, SNR,
/// and quality gates. Records whose scorer call failed are routed to the
/// failure list for retry rather than being gated on a missing score.
pub fn quality_stage(
    records: Vec<UtteranceRecord>,
    ctx: &PipelineContext,
) -> Result<StageOutcome, PipelineError> {
    let processed = records.len();
    let results = run_stage_batch(
        &records,
        |record| {
            call_quality(
                &ctx.registry,
                &record.utterance_id,
                &QualityPayload {
                    audio_path: record.audio_path.clone(),
                    start_s: record.start_s,
                    end_s: record.end_s,
                    snr_db: record.snr_db,
                },
            )
        },
        ctx.jobs,
    )?;

    let mut outcome = StageOutcome::default();
    let mut scored: Vec<UtteranceRecord> = Vec::with_capacity(records.len());
    for (mut record, result) in records.into_iter().zip(results) {
        match result {
            Ok(quality) => {
                score_quality(&mut record, &|_: &UtteranceRecord| Ok(quality.score))
                    .expect("fixed scorer cannot fail");
                scored.push(record);
            }
            Err(e) => {
                let id = record.utterance_id.clone();
                outcome.fail(&id, e.to_string(), Some(record));
            }
        }
    }

    let bins = quality_histogram(&scored)?;
    let (kept, gated) = gate(scored, &ctx.config.gate)?;
    let mut reason_counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (record, reason) in gated {
        *reason_counts.entry(reason.as_str()).or_default() += 1;
        outcome.discard(&format!("gate:{}", reason.as_str()), record);
    }
    outcome.records = kept;
    outcome
        .notes
        .push(format!("score distribution:\n{}", histogram_table(&bins)));
    for (reason, count) in reason_counts {
        outcome.notes.push(format!("gated {count} clips on {reason}"));
    }
    Ok(outcome.finish(processed))
}

/// The correction model as seen through the backend hub.
struct BackendCorrector<'a> {
    registry: &'a BackendRegistry,
    utterance_id: &'a str,
}

impl Corrector for BackendCorrector<'_> {
    fn correct(
        &self,
        consensus: &[String],
        hypotheses: &[Hypothesis],
    ) -> Result<Vec<String>, BackendError> {
        let payload = LlmCorrectPayload {
            prompt: render_prompt(&detokenize(consensus), hypotheses),
            consensus: consensus.to_vec(),
        };
        call_llm_correct(self.registry, self.utterance_id, &payload).map(|r| r.tokens)
    }
}

struct FusedLine {
    tokens: Vec<String>,
    confidence: f64,
    accepted: bool,
    length_violation: bool,
    llm_failed: bool,
}

/// Transcribe every record: recognize with all systems, fuse by plurality
/// vote, offer the consensus to the correction model, and score agreement
/// as the record's confidence.
pub fn fuse_stage(
    records: Vec<UtteranceRecord>,
    ctx: &PipelineContext,
) -> Result<StageOutcome, PipelineError> {
    let processed = records.len();
    let priority = &ctx.config.fusion.system_priority;
    let results = run_stage_batch(
        &records,
        |record| -> Result<FusedLine, BackendError> {
            let id = &record.utterance_id;
            let asr = call_asr(&ctx.registry, id, &span_payload(record))?;
            let hypotheses: Vec<Hypothesis> = asr
                .hypotheses
                .iter()
                .map(|h| Hypothesis::from_text(&h.system_id, &h.text))
                .collect();
            let wtn = build_wtn(&hypotheses, priority).map_err(|e| {
                BackendError::InvalidResponse {
                    kind: crate::backend::BackendKind::Asr,
                    field: e.to_string(),
                }
            })?;
            let consensus = rover_vote(&wtn, priority);
            let correction = llm_correct(
                &consensus,
                &hypotheses,
                &BackendCorrector {
                    registry: &ctx.registry,
                    utterance_id: id,
                },
            );
            let mut candidates: Vec<&[String]> =
                hypotheses.iter().map(|h| h.tokens.as_slice()).collect();
            if let Some(proposed) = &correction.proposed {
                candidates.push(proposed.as_slice());
            }
            let confidence = compute_confidence(&correction.tokens, &candidates);
            Ok(FusedLine {
                tokens: correction.tokens,
                confidence,
                accepted: correction.accepted,
                length_violation: correction.length_violation,
                llm_failed: correction.backend_failed,
            })
        },
        ctx.jobs,
    )?;

    let mut outcome = StageOutcome::default();
    let (mut accepted, mut violations, mut llm_failures) = (0usize, 0usize, 0usize);
    let mut confidence_sum = 0.0;
    for (mut record, result) in records.into_iter().zip(results) {
        match result {
            Ok(line) => {
                record.transcription = detokenize(&line.tokens);
                record.confidence = Some(line.confidence);
                accepted += usize::from(line.accepted);
                violations += usize::from(line.length_violation);
                llm_failures += usize::from(line.llm_failed);
                confidence_sum += line.confidence;
                outcome.records.push(record);
            }
            Err(e) => {
                let id = record.utterance_id.clone();
                outcome.fail(&id, e.to_string(), Some(record));
            }
        }
    }
    if !outcome.records.is_empty() {
        outcome.notes.push(format!(
            "fused {} clips (mean confidence {:.3}; {} corrections adopted, {} length violations, {} corrector failures)",
            outcome.records.len(),
            confidence_sum / outcome.records.len() as f64,
            accepted,
            violations,
            llm_failures
        ));
    }
    Ok(outcome.finish(processed))
}

/// Restore punctuation: force-align the transcription, classify the pauses,
/// and merge the text model's candidate marks under the pause gates.
pub fn punctuate_stage(
    records: Vec<UtteranceRecord>,
    ctx: &PipelineContext,
) -> Result<StageOutcome, PipelineError> {
    let processed = records.len();
    struct Punctuation {
        spans: Vec<(String, f64, f64)>,
        candidates: Vec<crate::punctuate::PunctuationCandidate>,
    }
    let results = run_stage_batch(
        &records,
        |record| -> Result<Option<Punctuation>, BackendError> {
            let id = &record.utterance_id;
            let tokens = tokenize(&record.transcription);
            if tokens.is_empty() {
                return Ok(None);
            }
            let aligned = call_align(
                &ctx.registry,
                id,
                &AlignPayload {
                    audio_path: record.audio_path.clone(),
                    start_s: record.start_s,
                    end_s: record.end_s,
                    tokens: tokens.clone(),
                },
            )?;
            let marks = call_punct(&ctx.registry, id, &PunctPayload { tokens })?;
            Ok(Some(Punctuation {
                spans: aligned
                    .spans
                    .into_iter()
                    .map(|s| (s.token, s.start_s, s.end_s))
                    .collect(),
                candidates: marks.candidates,
            }))
        },
        ctx.jobs,
    )?;

    let mut outcome = StageOutcome::default();
    for (mut record, result) in records.into_iter().zip(results) {
        let applied = match result {
            Ok(None) => {
                punctuate_record(&mut record, &[], &[], &ctx.config.pause).map_err(|e| e.to_string())
            }
            Ok(Some(p)) => words_from_spans(&p.spans, record.duration_s)
                .and_then(|words| {
                    punctuate_record(&mut record, &words, &p.candidates, &ctx.config.pause)
                })
                .map_err(|e| e.to_string()),
            Err(e) => Err(e.to_string()),
        };
        match applied {
            Ok(()) => outcome.records.push(record),
            Err(message) => {
                let id = record.utterance_id.clone();
                outcome.fail(&id, message, Some(record));
            }
        }
    }
    outcome.notes.push(format!(
        "punctuated {} clips",
        outcome.records.len()
    ));
    Ok(outcome.finish(processed))
}

/// Partition records into label tiers by confidence. Records in the
/// discarded tier leave the corpus (they remain in the audit trail).
pub fn partition_stage(
    mut records: Vec<UtteranceRecord>,
    ctx: &PipelineContext,
) -> Result<StageOutcome, PipelineError> {
    let processed = records.len();
    partition_by_confidence(&mut records, &ctx.config.confidence)?;
    let mut outcome = StageOutcome::default();
    let (mut strong, mut weak) = (0usize, 0usize);
    for record in records {
        match record.label_tier {
            Some(LabelTier::Strong) => {
                strong += 1;
                outcome.records.push(record);
            }
            Some(LabelTier::Weak) => {
                weak += 1;
                outcome.records.push(record);
            }
            _ => outcome.discard("confidence", record),
        }
    }
    outcome.notes.push(format!(
        "partitioned: {strong} strong, {weak} weak, {} discarded",
        outcome.discarded.len()
    ));
    Ok(outcome.finish(processed))
}
