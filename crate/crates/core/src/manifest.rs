//! The utterance record schema and JSONL manifest I/O.
//!
//! A manifest is a UTF-8 file with one JSON object per line. Records are
//! written sorted by `(source_id, start_s)` and all timestamps are stored
//! with millisecond precision, so a manifest written twice from the same
//! records is byte-identical.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::PipelineError;

/// Lower bound (inclusive) of the `strong` confidence tier.
pub const STRONG_CONFIDENCE_LO: f64 = 0.9;
/// Lower bound (inclusive) of the `weak` confidence tier; below this a
/// record is discarded.
pub const WEAK_CONFIDENCE_LO: f64 = 0.6;

/// Perceived speaker gender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Male,
    Female,
    Unknown,
}

/// Coarse age stage of the speaker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeStage {
    Children,
    Teenager,
    Young,
    MiddleAged,
    Old,
    Unknown,
}

/// Utterance-level emotion label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emotion {
    Happy,
    Angry,
    Sad,
    Neutral,
    Fearful,
    Surprised,
    Disgusted,
    Unknown,
}

/// Content domain of the source recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    ShortVideo,
    Entertainment,
    LiveStream,
    Documentary,
    Audiobook,
    Interview,
    News,
    Reading,
    Drama,
}

impl Domain {
    /// All accepted domain tags, in schema order.
    pub const ALL: [Domain; 9] = [
        Domain::ShortVideo,
        Domain::Entertainment,
        Domain::LiveStream,
        Domain::Documentary,
        Domain::Audiobook,
        Domain::Interview,
        Domain::News,
        Domain::Reading,
        Domain::Drama,
    ];

    /// The snake_case tag used in manifests and on the command line.
    pub fn tag(self) -> &'static str {
        match self {
            Domain::ShortVideo => "short_video",
            Domain::Entertainment => "entertainment",
            Domain::LiveStream => "live_stream",
            Domain::Documentary => "documentary",
            Domain::Audiobook => "audiobook",
            Domain::Interview => "interview",
            Domain::News => "news",
            Domain::Reading => "reading",
            Domain::Drama => "drama",
        }
    }
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Domain::ALL
            .into_iter()
            .find(|d| d.tag() == s)
            .ok_or_else(|| {
                let tags: Vec<&str> = Domain::ALL.iter().map(|d| d.tag()).collect();
                format!("unknown domain {s:?}; expected one of {}", tags.join(", "))
            })
    }
}

/// Final usability tier assigned from the fusion confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelTier {
    Strong,
    Weak,
    Discarded,
}

/// The tier a confidence value falls in under the normative boundaries.
pub fn tier_for_confidence(confidence: f64) -> LabelTier {
    if confidence >= STRONG_CONFIDENCE_LO {
        LabelTier::Strong
    } else if confidence >= WEAK_CONFIDENCE_LO {
        LabelTier::Weak
    } else {
        LabelTier::Discarded
    }
}

/// Round a time in seconds to the millisecond grid used by manifests.
pub fn round_ms(seconds: f64) -> f64 {
    (seconds * 1000.0).round() / 1000.0
}

fn ser_ms<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round_ms(*v))
}

/// One utterance of the corpus: a clipped span of a source recording plus
/// every label the pipeline has attached so far.
///
/// Optional fields are absent (not `null`) until the stage that fills them
/// has run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub source_id: String,
    pub audio_path: String,
    #[serde(serialize_with = "ser_ms")]
    pub start_s: f64,
    #[serde(serialize_with = "ser_ms")]
    pub end_s: f64,
    #[serde(serialize_with = "ser_ms")]
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_id: Option<String>,
    pub gender: Gender,
    pub age_stage: AgeStage,
    pub emotion: Emotion,
    pub domain: Domain,
    pub snr_db: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_score: Option<f64>,
    pub transcription: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub punctuated_transcription: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_tier: Option<LabelTier>,
}

impl UtteranceRecord {
    /// A record fresh out of segmentation: times on the millisecond grid,
    /// all paralinguistic labels still `unknown`, transcript empty.
    pub fn new(
        utterance_id: impl Into<String>,
        source_id: impl Into<String>,
        audio_path: impl Into<String>,
        start_s: f64,
        end_s: f64,
        domain: Domain,
        snr_db: f64,
    ) -> Self {
        let start_s = round_ms(start_s);
        let end_s = round_ms(end_s);
        UtteranceRecord {
            utterance_id: utterance_id.into(),
            source_id: source_id.into(),
            audio_path: audio_path.into(),
            start_s,
            end_s,
            duration_s: round_ms(end_s - start_s),
            speaker_id: None,
            gender: Gender::Unknown,
            age_stage: AgeStage::Unknown,
            emotion: Emotion::Unknown,
            domain,
            snr_db,
            quality_score: None,
            transcription: String::new(),
            punctuated_transcription: None,
            confidence: None,
            label_tier: None,
        }
    }

    /// Check every record-level invariant, naming the offending field.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let id = &self.utterance_id;
        if id.is_empty() {
            return Err(PipelineError::record(id, "utterance_id", "must be non-empty"));
        }
        if self.source_id.is_empty() {
            return Err(PipelineError::record(id, "source_id", "must be non-empty"));
        }
        if !(self.start_s >= 0.0) {
            return Err(PipelineError::record(
                id,
                "start_s",
                format!("must be >= 0, got {}", self.start_s),
            ));
        }
        if !(self.end_s > self.start_s) {
            return Err(PipelineError::record(
                id,
                "end_s",
                format!("must be > start_s, got [{}, {}]", self.start_s, self.end_s),
            ));
        }
        let span = self.end_s - self.start_s;
        if !((self.duration_s - span).abs() <= 1e-3 + 1e-9) {
            return Err(PipelineError::record(
                id,
                "duration_s",
                format!("{} disagrees with end_s - start_s = {span} by more than 1 ms", self.duration_s),
            ));
        }
        if let Some(c) = self.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(PipelineError::record(
                    id,
                    "confidence",
                    format!("out of range: {c} not in [0, 1]"),
                ));
            }
        }
        if let Some(q) = self.quality_score {
            if !(1.0..=5.0).contains(&q) {
                return Err(PipelineError::record(
                    id,
                    "quality_score",
                    format!("out of range: {q} not in [1, 5]"),
                ));
            }
        }
        // A tier is only meaningful as a judgement of a confidence, so it
        // must not appear alone. The tier/confidence mapping itself is not
        // re-derived here: the boundaries are a pipeline setting, and a
        // manifest partitioned under custom boundaries must still read and
        // write cleanly.
        if self.label_tier.is_some() && self.confidence.is_none() {
            return Err(PipelineError::record(
                id,
                "label_tier",
                "present without a confidence",
            ));
        }
        Ok(())
    }
}

/// Read a JSONL manifest, validating every record.
///
/// Errors carry the 1-based line number; schema violations additionally name
/// the utterance and field.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceRecord>, PipelineError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let record: UtteranceRecord =
            serde_json::from_str(&line).map_err(|e| PipelineError::ManifestParse {
                line: lineno,
                message: e.to_string(),
            })?;
        record.validate().map_err(|e| PipelineError::AtLine {
            line: lineno,
            source: Box::new(e),
        })?;
        if !seen_ids.insert(record.utterance_id.clone()) {
            return Err(PipelineError::AtLine {
                line: lineno,
                source: Box::new(PipelineError::record(
                    &record.utterance_id,
                    "utterance_id",
                    "duplicate id in manifest",
                )),
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Write a JSONL manifest sorted by `(source_id, start_s)`.
///
/// All records are validated first; nothing is written if any record is
/// invalid. Writing the result of [`read_manifest`] back out reproduces the
/// file byte for byte.
pub fn write_manifest(
    records: &[UtteranceRecord],
    path: impl AsRef<Path>,
) -> Result<(), PipelineError> {
    let path = path.as_ref();
    for record in records {
        record.validate()?;
    }
    let mut ordered: Vec<&UtteranceRecord> = records.iter().collect();
    ordered.sort_by(|a, b| {
        a.source_id
            .cmp(&b.source_id)
            .then(a.start_s.total_cmp(&b.start_s))
    });
    let file = File::create(path).map_err(|e| PipelineError::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in ordered {
        let line = serde_json::to_string(record).map_err(|e| PipelineError::Invalid(
            format!("serializing record {}: {e}", record.utterance_id),
        ))?;
        writer
            .write_all(line.as_bytes())
            .and_then(|_| writer.write_all(b"\n"))
            .map_err(|e| PipelineError::io(path, e))?;
    }
    writer.flush().map_err(|e| PipelineError::io(path, e))?;
    Ok(())
}
