//! Single integration point for external model inference.
//!
//! Every model the pipeline consults — recognizers, the correction LLM,
//! speaker embedders, paralinguistic classifiers, the quality scorer, the
//! aligner, the punctuation proposer, and voice-activity detection — sits
//! behind one request/response protocol. A backend is either an in-process
//! deterministic mock, a child process speaking newline-delimited JSON on
//! stdio, or an HTTP endpoint accepting one JSON object per POST. The wire
//! schema is identical for the last two, so real model servers can be
//! written in any ecosystem without linking model runtimes here.
//!
//! Wire shape, one JSON object per line / per POST body:
//!
//! ```json
//! {"kind": "asr", "utterance_id": "clip_0001", "payload": {...}}
//! {"utterance_id": "clip_0001", "kind": "asr", "result": {...}}
//! {"utterance_id": "clip_0001", "kind": "asr", "error": "message"}
//! ```

mod batch;
mod http;
mod mock;
mod process;
mod schema;

pub use batch::run_stage_batch;
pub use http::HttpBackend;
pub use mock::{mock_rng, AnyKindMock, MockBackend};
pub use process::ProcessBackend;
pub use schema::*;

use std::collections::HashMap;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::PipelineError;

/// The model families the pipeline can consult.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Asr,
    LlmCorrect,
    Embed,
    Gender,
    Age,
    Emotion,
    Quality,
    Align,
    Punct,
    Vad,
}

impl BackendKind {
    pub const ALL: [BackendKind; 10] = [
        BackendKind::Asr,
        BackendKind::LlmCorrect,
        BackendKind::Embed,
        BackendKind::Gender,
        BackendKind::Age,
        BackendKind::Emotion,
        BackendKind::Quality,
        BackendKind::Align,
        BackendKind::Punct,
        BackendKind::Vad,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Asr => "asr",
            BackendKind::LlmCorrect => "llm_correct",
            BackendKind::Embed => "embed",
            BackendKind::Gender => "gender",
            BackendKind::Age => "age",
            BackendKind::Emotion => "emotion",
            BackendKind::Quality => "quality",
            BackendKind::Align => "align",
            BackendKind::Punct => "punct",
            BackendKind::Vad => "vad",
        }
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BackendKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BackendKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| PipelineError::InvalidConfig(format!("unknown backend kind {s:?}")))
    }
}

/// One inference request. The payload schema is fixed per kind and
/// validated before dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub kind: BackendKind,
    pub utterance_id: String,
    pub payload: Value,
}

/// One successful inference response; `latency_ms` is measured by the hub
/// over the winning attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub utterance_id: String,
    pub kind: BackendKind,
    pub result: Value,
    pub latency_ms: u64,
}

/// Typed dispatch failures. Per-record failures are values, not panics, so
/// a batch can complete around them.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("no {0} backend registered")]
    Unregistered(BackendKind),
    #[error("invalid {kind} payload: {message}")]
    InvalidPayload { kind: BackendKind, message: String },
    #[error("invalid {kind} response: missing or malformed field {field:?}")]
    InvalidResponse { kind: BackendKind, field: String },
    #[error("{kind} backend timed out after {timeout_ms} ms")]
    Timeout { kind: BackendKind, timeout_ms: u64 },
    #[error("{kind} backend transport failed: {message}")]
    Transport { kind: BackendKind, message: String },
    #[error("{kind} backend reported an error: {message}")]
    Remote { kind: BackendKind, message: String },
    #[error("{kind} backend failed after {attempts} attempts: {last}")]
    Exhausted {
        kind: BackendKind,
        attempts: u32,
        last: Box<BackendError>,
    },
}

impl BackendError {
    /// The failure that ended the final attempt, unwrapped.
    pub fn root(&self) -> &BackendError {
        match self {
            BackendError::Exhausted { last, .. } => last.root(),
            other => other,
        }
    }
}

/// Timeout and retry budget for one dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub timeout_ms: u64,
    /// Additional attempts after the first; `retries = 1` means at most 2.
    pub retries: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            timeout_ms: 10_000,
            retries: 1,
        }
    }
}

/// One transport. Implementations return the full wire response object
/// (`result` or `error` envelope); the hub validates and unwraps it.
pub trait Backend: Send + Sync {
    fn call(&self, request: &BackendRequest, timeout_ms: u64) -> Result<Value, BackendError>;
}

/// Send one request through the registry under the retry policy.
///
/// The payload is schema-checked before the first attempt; unregistered
/// kinds and payload violations never consume attempts. Transport, timeout,
/// and backend-reported errors are retried up to `retries` extra attempts
/// and then wrapped in [`BackendError::Exhausted`]; a response that parses
/// but violates the result schema fails immediately, naming the field.
pub fn dispatch(
    request: &BackendRequest,
    registry: &BackendRegistry,
    policy: &RetryPolicy,
) -> Result<BackendResponse, BackendError> {
    let kind = request.kind;
    let backend = registry
        .get(kind)
        .ok_or(BackendError::Unregistered(kind))?;
    schema::validate_payload(kind, &request.payload)?;
    let attempts = policy.retries + 1;
    let mut last = None;
    for _ in 0..attempts {
        let started = Instant::now();
        match backend.call(request, policy.timeout_ms) {
            Ok(envelope) => {
                let latency_ms = started.elapsed().as_millis() as u64;
                match unwrap_envelope(request, envelope, latency_ms)? {
                    Ok(response) => return Ok(response),
                    Err(remote) => last = Some(remote),
                }
            }
            Err(e @ (BackendError::Timeout { .. } | BackendError::Transport { .. })) => {
                last = Some(e)
            }
            Err(other) => return Err(other),
        }
    }
    Err(BackendError::Exhausted {
        kind,
        attempts,
        last: Box::new(last.expect("at least one attempt ran")),
    })
}

/// Parse the wire envelope. Outer `Err` is a schema violation (not
/// retried); inner `Err` is a backend-reported error (retried).
fn unwrap_envelope(
    request: &BackendRequest,
    envelope: Value,
    latency_ms: u64,
) -> Result<Result<BackendResponse, BackendError>, BackendError> {
    let kind = request.kind;
    let object = envelope.as_object().ok_or_else(|| BackendError::InvalidResponse {
        kind,
        field: "(response object)".into(),
    })?;
    let echoed_id = object
        .get("utterance_id")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::InvalidResponse {
            kind,
            field: "utterance_id".into(),
        })?;
    if echoed_id != request.utterance_id {
        return Err(BackendError::InvalidResponse {
            kind,
            field: "utterance_id".into(),
        });
    }
    let echoed_kind = object
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| BackendError::InvalidResponse {
            kind,
            field: "kind".into(),
        })?;
    if echoed_kind != kind.as_str() {
        return Err(BackendError::InvalidResponse {
            kind,
            field: "kind".into(),
        });
    }
    if let Some(message) = object.get("error") {
        let message = message
            .as_str()
            .map(str::to_string)
            .unwrap_or_else(|| message.to_string());
        return Ok(Err(BackendError::Remote { kind, message }));
    }
    let result = object
        .get("result")
        .ok_or_else(|| BackendError::InvalidResponse {
            kind,
            field: "result".into(),
        })?
        .clone();
    schema::validate_result(kind, &result)?;
    Ok(Ok(BackendResponse {
        utterance_id: request.utterance_id.clone(),
        kind,
        result,
        latency_ms,
    }))
}

/// Kind → transport table plus the retry policy, shared across worker
/// threads.
#[derive(Clone)]
pub struct BackendRegistry {
    backends: HashMap<BackendKind, Arc<dyn Backend>>,
    pub policy: RetryPolicy,
    seed: u64,
}

impl BackendRegistry {
    /// All ten kinds served by deterministic in-process mocks keyed by
    /// `seed`. Registry files and environment overrides replace individual
    /// kinds on top of this base, so every kind is always served.
    pub fn with_mocks(seed: u64) -> Self {
        let mut backends: HashMap<BackendKind, Arc<dyn Backend>> = HashMap::new();
        for kind in BackendKind::ALL {
            backends.insert(kind, Arc::new(MockBackend::new(kind, seed)));
        }
        BackendRegistry {
            backends,
            policy: RetryPolicy::default(),
            seed,
        }
    }

    /// A registry with no transports at all (tests of the unregistered
    /// path).
    pub fn empty(seed: u64) -> Self {
        BackendRegistry {
            backends: HashMap::new(),
            policy: RetryPolicy::default(),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn register(&mut self, kind: BackendKind, backend: Arc<dyn Backend>) {
        self.backends.insert(kind, backend);
    }

    pub fn get(&self, kind: BackendKind) -> Option<&Arc<dyn Backend>> {
        self.backends.get(&kind)
    }

    /// Dispatch under this registry's own policy.
    pub fn call(&self, request: &BackendRequest) -> Result<BackendResponse, BackendError> {
        dispatch(request, self, &self.policy)
    }

    /// Apply a TOML registry file: endpoint strings per kind plus optional
    /// `timeout_ms` / `retries`.
    ///
    /// ```toml
    /// timeout_ms = 10000
    /// retries = 1
    ///
    /// [endpoints]
    /// asr = "mock"
    /// embed = "http://127.0.0.1:9000/embed"
    /// quality = "cmd:python3 scorer.py"
    /// ```
    pub fn load_file(&mut self, path: &Path) -> Result<(), PipelineError> {
        let raw = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let file: RegistryFile = toml::from_str(&raw).map_err(|e| {
            PipelineError::InvalidConfig(format!("bad registry file {}: {e}", path.display()))
        })?;
        if let Some(timeout_ms) = file.timeout_ms {
            self.policy.timeout_ms = timeout_ms;
        }
        if let Some(retries) = file.retries {
            self.policy.retries = retries;
        }
        for (name, endpoint) in &file.endpoints {
            let kind = name.parse::<BackendKind>()?;
            let backend = self.parse_endpoint(kind, endpoint)?;
            self.backends.insert(kind, backend);
        }
        Ok(())
    }

    /// Apply environment overrides: `CORPUS_BACKEND_<KIND>` (endpoint
    /// string, e.g. `CORPUS_BACKEND_ASR`), `CORPUS_BACKEND_TIMEOUT_MS`,
    /// `CORPUS_BACKEND_RETRIES`.
    pub fn apply_env(&mut self) -> Result<(), PipelineError> {
        if let Ok(raw) = std::env::var("CORPUS_BACKEND_TIMEOUT_MS") {
            self.policy.timeout_ms = raw.parse().map_err(|_| {
                PipelineError::InvalidConfig(format!("bad CORPUS_BACKEND_TIMEOUT_MS {raw:?}"))
            })?;
        }
        if let Ok(raw) = std::env::var("CORPUS_BACKEND_RETRIES") {
            self.policy.retries = raw.parse().map_err(|_| {
                PipelineError::InvalidConfig(format!("bad CORPUS_BACKEND_RETRIES {raw:?}"))
            })?;
        }
        for kind in BackendKind::ALL {
            let var = format!("CORPUS_BACKEND_{}", kind.as_str().to_uppercase());
            if let Ok(endpoint) = std::env::var(&var) {
                let backend = self.parse_endpoint(kind, &endpoint)?;
                self.backends.insert(kind, backend);
            }
        }
        Ok(())
    }

    /// Endpoint syntax: `mock`, `http(s)://…`, or `cmd:<shell command>`.
    fn parse_endpoint(
        &self,
        kind: BackendKind,
        endpoint: &str,
    ) -> Result<Arc<dyn Backend>, PipelineError> {
        if endpoint == "mock" {
            return Ok(Arc::new(MockBackend::new(kind, self.seed)));
        }
        if endpoint.starts_with("http://") || endpoint.starts_with("https://") {
            return Ok(Arc::new(HttpBackend::new(endpoint)));
        }
        if let Some(command) = endpoint.strip_prefix("cmd:") {
            return Ok(Arc::new(ProcessBackend::new(command)));
        }
        Err(PipelineError::InvalidConfig(format!(
            "bad endpoint for {kind}: {endpoint:?} (expected \"mock\", \"http(s)://…\", or \"cmd:…\")"
        )))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryFile {
    timeout_ms: Option<u64>,
    retries: Option<u32>,
    #[serde(default)]
    endpoints: std::collections::BTreeMap<String, String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn asr_request(id: &str) -> BackendRequest {
        BackendRequest {
            kind: BackendKind::Asr,
            utterance_id: id.into(),
            payload: json!({"audio_path": "a.wav", "start_s": 0.0, "end_s": 6.0}),
        }
    }

    #[test]
    fn kind_round_trips_through_names() {
        for kind in BackendKind::ALL {
            assert_eq!(kind.as_str().parse::<BackendKind>().unwrap(), kind);
            let as_json = serde_json::to_string(&kind).unwrap();
            assert_eq!(as_json, format!("\"{}\"", kind.as_str()));
        }
        assert!("whisperer".parse::<BackendKind>().is_err());
    }

    #[test]
    fn unregistered_kind_is_reported() {
        let registry = BackendRegistry::empty(7);
        let err = registry.call(&asr_request("u1")).unwrap_err();
        assert!(matches!(err, BackendError::Unregistered(BackendKind::Asr)));
    }

    #[test]
    fn mock_dispatch_is_deterministic_across_attempts_and_calls() {
        let registry = BackendRegistry::with_mocks(42);
        let a = registry.call(&asr_request("clip_0001")).unwrap();
        let b = registry.call(&asr_request("clip_0001")).unwrap();
        assert_eq!(a.result, b.result);
        assert_eq!(a.utterance_id, "clip_0001");
        let hyps = a.result["hypotheses"].as_array().unwrap();
        assert_eq!(hyps.len(), 3);
    }

    #[test]
    fn different_seeds_or_ids_change_mock_output() {
        let r42 = BackendRegistry::with_mocks(42);
        let r43 = BackendRegistry::with_mocks(43);
        let same_id = r42.call(&asr_request("clip_0001")).unwrap();
        assert_ne!(
            same_id.result,
            r43.call(&asr_request("clip_0001")).unwrap().result
        );
        assert_ne!(
            same_id.result,
            r42.call(&asr_request("clip_0002")).unwrap().result
        );
    }

    struct FlakyBackend {
        calls: std::sync::atomic::AtomicU32,
    }

    impl Backend for FlakyBackend {
        fn call(&self, request: &BackendRequest, timeout_ms: u64) -> Result<Value, BackendError> {
            self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            Err(BackendError::Timeout {
                kind: request.kind,
                timeout_ms,
            })
        }
    }

    #[test]
    fn one_retry_means_exactly_two_attempts() {
        let mut registry = BackendRegistry::empty(0);
        let flaky = Arc::new(FlakyBackend {
            calls: std::sync::atomic::AtomicU32::new(0),
        });
        registry.register(BackendKind::Asr, flaky.clone());
        registry.policy = RetryPolicy {
            timeout_ms: 150,
            retries: 1,
        };
        let err = registry.call(&asr_request("u1")).unwrap_err();
        assert_eq!(flaky.calls.load(std::sync::atomic::Ordering::SeqCst), 2);
        match err {
            BackendError::Exhausted { attempts, last, .. } => {
                assert_eq!(attempts, 2);
                assert!(matches!(*last, BackendError::Timeout { timeout_ms: 150, .. }));
            }
            other => panic!("expected exhaustion, got {other}"),
        }
    }

    struct CannedBackend(Value);

    impl Backend for CannedBackend {
        fn call(&self, _: &BackendRequest, _: u64) -> Result<Value, BackendError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn missing_result_field_names_the_field() {
        let mut registry = BackendRegistry::empty(0);
        registry.register(
            BackendKind::Asr,
            Arc::new(CannedBackend(json!({
                "utterance_id": "u1", "kind": "asr",
                "result": {"guesses": []}
            }))),
        );
        let err = registry.call(&asr_request("u1")).unwrap_err();
        match err {
            BackendError::InvalidResponse { field, .. } => assert_eq!(field, "hypotheses"),
            other => panic!("expected schema error, got {other}"),
        }
    }

    #[test]
    fn wrong_echo_is_a_schema_error() {
        let mut registry = BackendRegistry::empty(0);
        registry.register(
            BackendKind::Asr,
            Arc::new(CannedBackend(json!({
                "utterance_id": "someone_else", "kind": "asr",
                "result": {"hypotheses": []}
            }))),
        );
        let err = registry.call(&asr_request("u1")).unwrap_err();
        assert!(
            matches!(err, BackendError::InvalidResponse { ref field, .. } if field == "utterance_id"),
            "{err}"
        );
    }

    #[test]
    fn remote_error_is_retried_then_surfaced() {
        let mut registry = BackendRegistry::empty(0);
        registry.register(
            BackendKind::Asr,
            Arc::new(CannedBackend(json!({
                "utterance_id": "u1", "kind": "asr", "error": "model exploded"
            }))),
        );
        let err = registry.call(&asr_request("u1")).unwrap_err();
        match err.root() {
            BackendError::Remote { message, .. } => assert_eq!(message, "model exploded"),
            other => panic!("expected remote error, got {other}"),
        }
    }

    #[test]
    fn bad_payload_fails_before_any_attempt() {
        let registry = BackendRegistry::with_mocks(1);
        let request = BackendRequest {
            kind: BackendKind::Asr,
            utterance_id: "u1".into(),
            payload: json!({"audio_path": "a.wav"}),
        };
        let err = registry.call(&request).unwrap_err();
        assert!(
            matches!(err, BackendError::InvalidPayload { .. }),
            "{err}"
        );
    }

    #[test]
    fn registry_file_overrides_endpoints_and_policy() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("registry.toml");
        std::fs::write(
            &path,
            "timeout_ms = 250\nretries = 3\n\n[endpoints]\nasr = \"mock\"\n",
        )
        .unwrap();
        let mut registry = BackendRegistry::with_mocks(5);
        registry.load_file(&path).unwrap();
        assert_eq!(registry.policy.timeout_ms, 250);
        assert_eq!(registry.policy.retries, 3);
        assert!(registry.call(&asr_request("u1")).is_ok());
    }

    #[test]
    fn registry_file_rejects_unknown_kind_and_bad_endpoint() {
        let dir = tempfile::tempdir().unwrap();
        let bad_kind = dir.path().join("bad_kind.toml");
        std::fs::write(&bad_kind, "[endpoints]\noracle = \"mock\"\n").unwrap();
        let mut registry = BackendRegistry::with_mocks(5);
        assert!(registry.load_file(&bad_kind).is_err());

        let bad_endpoint = dir.path().join("bad_endpoint.toml");
        std::fs::write(&bad_endpoint, "[endpoints]\nasr = \"carrier-pigeon\"\n").unwrap();
        assert!(registry.load_file(&bad_endpoint).is_err());
    }
}
