//! HTTP transport: one JSON request object per POST, one JSON response
//! object per body.

use std::time::Duration;

use serde_json::Value;

use super::{Backend, BackendError, BackendRequest};

/// A backend served by an HTTP endpoint. Stateless per request; the
/// timeout covers the whole POST round trip.
pub struct HttpBackend {
    url: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(url: &str) -> Self {
        HttpBackend {
            url: url.to_string(),
            agent: ureq::Agent::new_with_defaults(),
        }
    }
}

impl Backend for HttpBackend {
    fn call(&self, request: &BackendRequest, timeout_ms: u64) -> Result<Value, BackendError> {
        let kind = request.kind;
        let sent = self
            .agent
            .post(&self.url)
            .config()
            .timeout_global(Some(Duration::from_millis(timeout_ms)))
            .build()
            .send_json(request);
        match sent {
            Ok(mut response) => response
                .body_mut()
                .read_json::<Value>()
                .map_err(|e| BackendError::Transport {
                    kind,
                    message: format!("bad response body from {}: {e}", self.url),
                }),
            Err(ureq::Error::Timeout(_)) => Err(BackendError::Timeout { kind, timeout_ms }),
            Err(ureq::Error::StatusCode(code)) => Err(BackendError::Remote {
                kind,
                message: format!("{} answered HTTP {code}", self.url),
            }),
            Err(e) => Err(BackendError::Transport {
                kind,
                message: format!("POST {} failed: {e}", self.url),
            }),
        }
    }
}
