//! Kind-specific payload/result schemas, their validation, and typed call
//! helpers that wrap the JSON round trip.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BackendError, BackendKind, BackendRegistry, BackendRequest};
use crate::manifest::{Emotion, Gender};
use crate::punctuate::PunctuationCandidate;

/// A span of audio inside one source file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AudioSpanPayload {
    pub audio_path: String,
    pub start_s: f64,
    pub end_s: f64,
}

/// One recognizer's transcription of a clip.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsrHypothesisWire {
    pub system_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsrResult {
    pub hypotheses: Vec<AsrHypothesisWire>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmCorrectPayload {
    /// Rendered instruction for real LLM endpoints.
    pub prompt: String,
    /// Structured consensus for backends that prefer tokens over prose.
    pub consensus: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmCorrectResult {
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResult {
    pub embedding: Vec<f64>,
    pub multi_speaker: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderResult {
    pub gender: Gender,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeResult {
    pub age_years: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmotionResult {
    /// One vote per classifier; ties resolve downstream.
    pub votes: Vec<Emotion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityPayload {
    pub audio_path: String,
    pub start_s: f64,
    pub end_s: f64,
    pub snr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityResult {
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignPayload {
    pub audio_path: String,
    pub start_s: f64,
    pub end_s: f64,
    pub tokens: Vec<String>,
}

/// One token's span, in seconds relative to the clip start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignSpan {
    pub token: String,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignResult {
    pub spans: Vec<AlignSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PunctPayload {
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PunctResult {
    pub candidates: Vec<PunctuationCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VadPayload {
    pub audio_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VadRegion {
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VadResult {
    pub regions: Vec<VadRegion>,
}

/// Required top-level fields per payload schema.
fn payload_fields(kind: BackendKind) -> &'static [&'static str] {
    match kind {
        BackendKind::Asr | BackendKind::Embed | BackendKind::Gender | BackendKind::Age
        | BackendKind::Emotion => &["audio_path", "start_s", "end_s"],
        BackendKind::LlmCorrect => &["prompt", "consensus"],
        BackendKind::Quality => &["audio_path", "start_s", "end_s", "snr_db"],
        BackendKind::Align => &["audio_path", "start_s", "end_s", "tokens"],
        BackendKind::Punct => &["tokens"],
        BackendKind::Vad => &["audio_path"],
    }
}

/// Required top-level fields per result schema.
fn result_fields(kind: BackendKind) -> &'static [&'static str] {
    match kind {
        BackendKind::Asr => &["hypotheses"],
        BackendKind::LlmCorrect => &["tokens"],
        BackendKind::Embed => &["embedding", "multi_speaker"],
        BackendKind::Gender => &["gender"],
        BackendKind::Age => &["age_years"],
        BackendKind::Emotion => &["votes"],
        BackendKind::Quality => &["score"],
        BackendKind::Align => &["spans"],
        BackendKind::Punct => &["candidates"],
        BackendKind::Vad => &["regions"],
    }
}

/// Check the payload carries every required field for its kind.
pub fn validate_payload(kind: BackendKind, payload: &Value) -> Result<(), BackendError> {
    let object = payload.as_object().ok_or_else(|| BackendError::InvalidPayload {
        kind,
        message: "payload is not a JSON object".into(),
    })?;
    for field in payload_fields(kind) {
        if !object.contains_key(*field) {
            return Err(BackendError::InvalidPayload {
                kind,
                message: format!("missing field {field:?}"),
            });
        }
    }
    Ok(())
}

/// Check the result carries every required field for its kind.
pub fn validate_result(kind: BackendKind, result: &Value) -> Result<(), BackendError> {
    let object = result.as_object().ok_or_else(|| BackendError::InvalidResponse {
        kind,
        field: "(result object)".into(),
    })?;
    for field in result_fields(kind) {
        if !object.contains_key(*field) {
            return Err(BackendError::InvalidResponse {
                kind,
                field: (*field).to_string(),
            });
        }
    }
    Ok(())
}

/// Dispatch a typed payload and decode a typed result.
pub fn call_typed<P: Serialize, R: DeserializeOwned>(
    registry: &BackendRegistry,
    kind: BackendKind,
    utterance_id: &str,
    payload: &P,
) -> Result<R, BackendError> {
    let payload = serde_json::to_value(payload).map_err(|e| BackendError::InvalidPayload {
        kind,
        message: e.to_string(),
    })?;
    let request = BackendRequest {
        kind,
        utterance_id: utterance_id.to_string(),
        payload,
    };
    let response = registry.call(&request)?;
    serde_json::from_value(response.result).map_err(|e| BackendError::InvalidResponse {
        kind,
        field: e.to_string(),
    })
}

pub fn call_asr(
    registry: &BackendRegistry,
    utterance_id: &str,
    payload: &AudioSpanPayload,
) -> Result<AsrResult, BackendError> {
    call_typed(registry, BackendKind::Asr, utterance_id, payload)
}

pub fn call_llm_correct(
    registry: &BackendRegistry,
    utterance_id: &str,
    payload: &LlmCorrectPayload,
) -> Result<LlmCorrectResult, BackendError> {
    call_typed(registry, BackendKind::LlmCorrect, utterance_id, payload)
}

pub fn call_embed(
    registry: &BackendRegistry,
    utterance_id: &str,
    payload: &AudioSpanPayload,
) -> Result<EmbedResult, BackendError> {
    call_typed(registry, BackendKind::Embed, utterance_id, payload)
}

pub fn call_gender(
    registry: &BackendRegistry,
    utterance_id: &str,
    payload: &AudioSpanPayload,
) -> Result<GenderResult, BackendError> {
    call_typed(registry, BackendKind::Gender, utterance_id, payload)
}

pub fn call_age(
    registry: &BackendRegistry,
    utterance_id: &str,
    payload: &AudioSpanPayload,
) -> Result<AgeResult, BackendError> {
    call_typed(registry, BackendKind::Age, utterance_id, payload)
}

pub fn call_emotion(
    registry: &BackendRegistry,
    utterance_id: &str,
    payload: &AudioSpanPayload,
) -> Result<EmotionResult, BackendError> {
    call_typed(registry, BackendKind::Emotion, utterance_id, payload)
}

pub fn call_quality(
    registry: &BackendRegistry,
    utterance_id: &str,
    payload: &QualityPayload,
) -> Result<QualityResult, BackendError> {
    call_typed(registry, BackendKind::Quality, utterance_id, payload)
}

pub fn call_align(
    registry: &BackendRegistry,
    utterance_id: &str,
    payload: &AlignPayload,
) -> Result<AlignResult, BackendError> {
    call_typed(registry, BackendKind::Align, utterance_id, payload)
}

pub fn call_punct(
    registry: &BackendRegistry,
    utterance_id: &str,
    payload: &PunctPayload,
) -> Result<PunctResult, BackendError> {
    call_typed(registry, BackendKind::Punct, utterance_id, payload)
}

pub fn call_vad(
    registry: &BackendRegistry,
    utterance_id: &str,
    payload: &VadPayload,
) -> Result<VadResult, BackendError> {
    call_typed(registry, BackendKind::Vad, utterance_id, payload)
}
