//! Deterministic in-process mock backends.
//!
//! Every kind has a mock whose output is a pure function of (run seed,
//! kind, utterance id), so the whole pipeline is bit-reproducible without
//! network or models. Mock recognizers fabricate a ground-truth line per
//! utterance and corrupt it at an utterance-specific error rate, which
//! spreads fused confidences across the whole partitioning range; mock
//! embedders place each clip near one of a few orthogonal speaker
//! directions, so clustering has real structure to find.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::schema::{
    AlignPayload, AlignResult, AlignSpan, AsrHypothesisWire, AsrResult, EmbedResult,
    LlmCorrectPayload, PunctPayload, PunctResult, QualityPayload, VadPayload, VadRegion,
    VadResult,
};
use super::{Backend, BackendError, BackendKind, BackendRequest};
use crate::audio::{detect_speech_regions, frame_energies, read_wav};
use crate::config::VadSettings;
use crate::manifest::Emotion;
use crate::punctuate::{CandidateSource, Mark, PunctuationCandidate};

/// FNV-1a over byte chunks, with a separator byte folded in after each
/// chunk so (`"ab"`, `"c"`) and (`"a"`, `"bc"`) hash differently.
fn fnv1a(parts: &[&[u8]]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &byte in *part {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        hash ^= 0xff;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// The stream of randomness a mock uses for one utterance: stable across
/// attempts, calls, thread schedules, and processes.
pub fn mock_rng(seed: u64, scope: &str, utterance_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(fnv1a(&[
        &seed.to_le_bytes(),
        scope.as_bytes(),
        utterance_id.as_bytes(),
    ]))
}

/// Sichuanese-flavored syllable pool the mock recognizers speak.
const VOCAB: [&str; 40] = [
    "要", "得", "巴", "适", "莫", "来", "头", "吃", "了", "吗", "今", "天", "安", "逸", "撒",
    "子", "哈", "喃", "走", "嘛", "啥", "对", "晓", "板", "眼", "儿", "搞", "快", "点", "好",
    "多", "钱", "不", "存", "在", "雄", "起", "耍", "幺", "妹",
];

/// Latin loanword tokens sprinkled into fabricated lines.
const LOANWORDS: [&str; 4] = ["gps", "5g", "app", "wifi"];

/// One mock transport serving a single kind.
pub struct MockBackend {
    kind: BackendKind,
    seed: u64,
    latency_max_ms: u64,
    fail_marker: Option<String>,
}

impl MockBackend {
    pub fn new(kind: BackendKind, seed: u64) -> Self {
        MockBackend {
            kind,
            seed,
            latency_max_ms: 0,
            fail_marker: None,
        }
    }

    /// Sleep a deterministic per-utterance duration in `0..=max_ms` before
    /// answering (for ordering and timeout tests). The artificial latency
    /// is drawn from its own stream, so it never perturbs results.
    pub fn with_latency(mut self, max_ms: u64) -> Self {
        self.latency_max_ms = max_ms;
        self
    }

    /// Report a backend error for any utterance whose id contains the
    /// marker (for failure-path tests).
    pub fn with_failure_marker(mut self, marker: &str) -> Self {
        self.fail_marker = Some(marker.to_string());
        self
    }

    fn rng(&self, scope: &str, utterance_id: &str) -> ChaCha8Rng {
        mock_rng(self.seed, scope, utterance_id)
    }

    /// The fabricated ground-truth token line for an utterance.
    fn true_tokens(&self, utterance_id: &str) -> Vec<String> {
        let mut rng = self.rng("truth", utterance_id);
        let length = rng.random_range(8..=24);
        (0..length)
            .map(|_| {
                if rng.random_range(0..20) == 0 {
                    LOANWORDS[rng.random_range(0..LOANWORDS.len())].to_string()
                } else {
                    VOCAB[rng.random_range(0..VOCAB.len())].to_string()
                }
            })
            .collect()
    }

    /// Per-utterance corruption rate: a few clips are near-garbage, some
    /// are shaky, most are clean — spreading fused confidences across all
    /// three tiers.
    fn corruption_rate(rng: &mut ChaCha8Rng) -> f64 {
        match rng.random_range(0..20) {
            0 => 0.85,
            1..=3 => 0.35,
            _ => 0.07,
        }
    }

    fn corrupt(tokens: &[String], rate: f64, rng: &mut ChaCha8Rng) -> Vec<String> {
        let mut out = Vec::with_capacity(tokens.len());
        for token in tokens {
            if rng.random::<f64>() < rate {
                match rng.random_range(0..3) {
                    0 => out.push(VOCAB[rng.random_range(0..VOCAB.len())].to_string()),
                    1 => {}
                    _ => {
                        out.push(token.clone());
                        out.push(VOCAB[rng.random_range(0..VOCAB.len())].to_string());
                    }
                }
            } else {
                out.push(token.clone());
            }
        }
        if out.is_empty() {
            out.push(VOCAB[rng.random_range(0..VOCAB.len())].to_string());
        }
        out
    }

    fn asr(&self, utterance_id: &str) -> AsrResult {
        let truth = self.true_tokens(utterance_id);
        let mut rng = self.rng("asr", utterance_id);
        let rate = Self::corruption_rate(&mut rng);
        let hypotheses = ["asr_a", "asr_b", "asr_c"]
            .into_iter()
            .map(|system_id| {
                let mut system_rng = ChaCha8Rng::seed_from_u64(rng.random::<u64>());
                AsrHypothesisWire {
                    system_id: system_id.to_string(),
                    text: Self::corrupt(&truth, rate, &mut system_rng).concat(),
                }
            })
            .collect();
        AsrResult { hypotheses }
    }

    fn llm_correct(&self, utterance_id: &str, payload: &LlmCorrectPayload) -> Result<Value, String> {
        let mut rng = self.rng("llm_correct", utterance_id);
        let mut tokens = payload.consensus.clone();
        let roll = rng.random::<f64>();
        if roll < 0.65 {
            // Echo the consensus unchanged.
        } else if roll < 0.85 {
            // Propose one same-length substitution.
            if !tokens.is_empty() {
                let at = rng.random_range(0..tokens.len());
                tokens[at] = VOCAB[rng.random_range(0..VOCAB.len())].to_string();
            }
        } else if roll < 0.95 {
            // Violate the length constraint; the caller must reject this.
            tokens.pop();
        } else {
            return Err("correction model refused the prompt".to_string());
        }
        Ok(json!({ "tokens": tokens }))
    }

    /// Four mutually orthogonal unit directions in 8 dimensions.
    fn speaker_direction(index: u64) -> [f64; 8] {
        const R: f64 = 0.353_553_390_593_273_8; // 1/sqrt(8)
        match index % 4 {
            0 => [R; 8],
            1 => [R, -R, R, -R, R, -R, R, -R],
            2 => [R, R, -R, -R, R, R, -R, -R],
            _ => [R, -R, -R, R, R, -R, -R, R],
        }
    }

    fn embed(&self, utterance_id: &str) -> EmbedResult {
        // Clips cluster by source recording: the source chooses how many
        // speakers it contains (1–3), each clip picks one of them.
        let source_id = utterance_id
            .rsplit_once('_')
            .map_or(utterance_id, |(source, _)| source);
        let speaker_count = 1 + fnv1a(&[&self.seed.to_le_bytes(), b"spk_count", source_id.as_bytes()]) % 3;
        let mut rng = self.rng("embed", utterance_id);
        let speaker = rng.random_range(0..speaker_count);
        let direction_index = fnv1a(&[b"direction", source_id.as_bytes()]) + speaker;
        let base = Self::speaker_direction(direction_index);
        let embedding: Vec<f64> = base
            .iter()
            .map(|&v| v + rng.random_range(-0.05..0.05))
            .collect();
        EmbedResult {
            embedding,
            multi_speaker: rng.random::<f64>() < 0.10,
        }
    }

    fn gender(&self, utterance_id: &str) -> Value {
        let mut rng = self.rng("gender", utterance_id);
        let gender = match rng.random_range(0..100) {
            0..=47 => "male",
            48..=95 => "female",
            _ => "unknown",
        };
        json!({ "gender": gender })
    }

    fn age(&self, utterance_id: &str) -> Value {
        let mut rng = self.rng("age", utterance_id);
        if rng.random_range(0..50) == 0 {
            // A confidently wrong regressor; the labeling stage must leave
            // this utterance's age unknown rather than crash.
            return json!({ "age_years": 150.0 });
        }
        let age: f64 = rng.random_range(5.0..85.0);
        json!({ "age_years": (age * 10.0).round() / 10.0 })
    }

    fn emotion(&self, utterance_id: &str) -> Value {
        let mut rng = self.rng("emotion", utterance_id);
        let votes: Vec<Emotion> = (0..3)
            .map(|_| match rng.random_range(0..100) {
                0..=54 => Emotion::Neutral,
                55..=69 => Emotion::Happy,
                70..=79 => Emotion::Angry,
                80..=87 => Emotion::Sad,
                88..=92 => Emotion::Surprised,
                93..=96 => Emotion::Fearful,
                _ => Emotion::Disgusted,
            })
            .collect();
        json!({ "votes": votes })
    }

    fn quality(payload: &QualityPayload) -> Value {
        let score = (1.0 + payload.snr_db / 15.0).clamp(1.0, 5.0);
        json!({ "score": score })
    }

    fn align(&self, utterance_id: &str, payload: &AlignPayload) -> AlignResult {
        let duration = (payload.end_s - payload.start_s).max(0.0);
        let mut rng = self.rng("align", utterance_id);
        // Raw layout: token length proportional to its character count,
        // occasional phrase pauses after tokens; then scale to the clip.
        let mut pieces: Vec<(usize, f64, f64)> = Vec::new(); // (token idx, dur, pause)
        let mut total = 0.0;
        for (i, token) in payload.tokens.iter().enumerate() {
            let dur = 0.18 * token.chars().count().max(1) as f64;
            let pause = if i + 1 == payload.tokens.len() {
                0.10
            } else {
                match rng.random_range(0..100) {
                    0..=9 => 0.60,
                    10..=24 => 0.30,
                    _ => 0.02,
                }
            };
            total += dur + pause;
            pieces.push((i, dur, pause));
        }
        let scale = if total > 0.0 { duration / total } else { 0.0 };
        let mut clock = 0.0;
        let spans = pieces
            .into_iter()
            .map(|(i, dur, pause)| {
                let start_s = clock;
                let end_s = start_s + dur * scale;
                clock = end_s + pause * scale;
                AlignSpan {
                    token: payload.tokens[i].clone(),
                    start_s,
                    end_s,
                }
            })
            .collect();
        AlignResult { spans }
    }

    fn punct(&self, utterance_id: &str, payload: &PunctPayload) -> PunctResult {
        let mut rng = self.rng("punct", utterance_id);
        let candidates = payload
            .tokens
            .iter()
            .enumerate()
            .filter_map(|(i, token)| {
                let mark = if token.ends_with('吗') || token.ends_with('喃') {
                    Some(Mark::Question)
                } else if token.ends_with('嘛') || token.ends_with('哈') || token.ends_with('撒')
                {
                    Some(Mark::Exclamation)
                } else if matches!(token.as_str(), "了" | "的" | "子") && rng.random::<f64>() < 0.5
                {
                    Some(Mark::Comma)
                } else if rng.random::<f64>() < 0.15 {
                    Some(Mark::Comma)
                } else {
                    None
                };
                mark.map(|mark| PunctuationCandidate {
                    position: i + 1,
                    mark,
                    source: CandidateSource::TextModel,
                })
            })
            .collect();
        PunctResult { candidates }
    }

    fn vad(payload: &VadPayload) -> Result<VadResult, String> {
        let audio = read_wav::<f64>(std::path::Path::new(&payload.audio_path))
            .map_err(|e| e.to_string())?;
        let settings = VadSettings::default();
        let energies = frame_energies(
            &audio.samples,
            audio.sample_rate,
            settings.frame_ms,
            settings.hop_ms,
        )
        .map_err(|e| e.to_string())?;
        let regions = detect_speech_regions(&energies, audio.sample_rate, &settings)
            .into_iter()
            .map(|r| VadRegion {
                start_s: r.start_s,
                end_s: r.end_s,
            })
            .collect();
        Ok(VadResult { regions })
    }

    fn parse_payload<P: serde::de::DeserializeOwned>(
        &self,
        payload: &Value,
    ) -> Result<P, BackendError> {
        serde_json::from_value(payload.clone()).map_err(|e| BackendError::InvalidPayload {
            kind: self.kind,
            message: e.to_string(),
        })
    }

    fn answer(&self, request: &BackendRequest) -> Result<Result<Value, String>, BackendError> {
        let id = request.utterance_id.as_str();
        Ok(match self.kind {
            BackendKind::Asr => Ok(serde_json::to_value(self.asr(id)).expect("serializable")),
            BackendKind::LlmCorrect => {
                let payload: LlmCorrectPayload = self.parse_payload(&request.payload)?;
                self.llm_correct(id, &payload)
            }
            BackendKind::Embed => Ok(serde_json::to_value(self.embed(id)).expect("serializable")),
            BackendKind::Gender => Ok(self.gender(id)),
            BackendKind::Age => Ok(self.age(id)),
            BackendKind::Emotion => Ok(self.emotion(id)),
            BackendKind::Quality => {
                let payload: QualityPayload = self.parse_payload(&request.payload)?;
                Ok(Self::quality(&payload))
            }
            BackendKind::Align => {
                let payload: AlignPayload = self.parse_payload(&request.payload)?;
                Ok(serde_json::to_value(self.align(id, &payload)).expect("serializable"))
            }
            BackendKind::Punct => {
                let payload: PunctPayload = self.parse_payload(&request.payload)?;
                Ok(serde_json::to_value(self.punct(id, &payload)).expect("serializable"))
            }
            BackendKind::Vad => {
                let payload: VadPayload = self.parse_payload(&request.payload)?;
                Self::vad(&payload).map(|r| serde_json::to_value(r).expect("serializable"))
            }
        })
    }
}

impl Backend for MockBackend {
    fn call(&self, request: &BackendRequest, timeout_ms: u64) -> Result<Value, BackendError> {
        if self.latency_max_ms > 0 {
            let mut rng = self.rng("latency", &request.utterance_id);
            let latency = rng.random_range(0..=self.latency_max_ms);
            if latency > timeout_ms {
                return Err(BackendError::Timeout {
                    kind: self.kind,
                    timeout_ms,
                });
            }
            std::thread::sleep(std::time::Duration::from_millis(latency));
        }
        if let Some(marker) = &self.fail_marker {
            if request.utterance_id.contains(marker.as_str()) {
                return Ok(json!({
                    "utterance_id": request.utterance_id,
                    "kind": self.kind.as_str(),
                    "error": "injected failure",
                }));
            }
        }
        match self.answer(request)? {
            Ok(result) => Ok(json!({
                "utterance_id": request.utterance_id,
                "kind": self.kind.as_str(),
                "result": result,
            })),
            Err(message) => Ok(json!({
                "utterance_id": request.utterance_id,
                "kind": self.kind.as_str(),
                "error": message,
            })),
        }
    }
}

/// Serve any kind from one mock dispatcher (used by the standalone mock
/// server to answer whatever kind each request names).
pub struct AnyKindMock {
    seed: u64,
}

impl AnyKindMock {
    pub fn new(seed: u64) -> Self {
        AnyKindMock { seed }
    }

    pub fn respond(&self, request: &BackendRequest) -> Result<Value, BackendError> {
        MockBackend::new(request.kind, self.seed).call(request, u64::MAX)
    }
}
