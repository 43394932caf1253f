//! Standalone mock-backend server.
//!
//! Speaks the backend wire protocol — one JSON request object in, one JSON
//! response envelope out — over either newline-delimited stdio (for `cmd:`
//! endpoints) or HTTP POST (for `http://` endpoints). Answers come from the
//! same deterministic mocks the pipeline uses when no endpoint is
//! configured, so a registry pointing at this server reproduces the all-mock
//! run bit for bit.

use std::io::{BufRead, Write};

use corpus_core::backend::{AnyKindMock, BackendRequest};
use serde_json::{json, Value};

use crate::ops::CliError;
use crate::MockBackendArgs;

pub fn serve(args: &MockBackendArgs) -> Result<(), CliError> {
    let mock = AnyKindMock::new(args.seed);
    match &args.http {
        Some(addr) => serve_http(&mock, addr),
        None => serve_stdio(&mock),
    }
}

/// Answer one raw request body. Malformed requests and mock-side errors
/// still produce a response envelope, carrying an `error` field, so the
/// client's per-record error handling sees them instead of a hangup.
fn respond(mock: &AnyKindMock, body: &str) -> Value {
    match serde_json::from_str::<BackendRequest>(body) {
        Ok(request) => match mock.respond(&request) {
            Ok(envelope) => envelope,
            Err(e) => json!({
                "utterance_id": request.utterance_id,
                "kind": request.kind.as_str(),
                "error": e.to_string(),
            }),
        },
        Err(e) => json!({
            "utterance_id": "",
            "kind": "",
            "error": format!("unreadable request: {e}"),
        }),
    }
}

fn serve_stdio(mock: &AnyKindMock) -> Result<(), CliError> {
    let stdin = std::io::stdin().lock();
    let mut stdout = std::io::stdout().lock();
    for line in stdin.lines() {
        let line = line.map_err(|e| CliError::Failure(format!("reading request: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = respond(mock, &line);
        writeln!(stdout, "{reply}")
            .and_then(|()| stdout.flush())
            .map_err(|e| CliError::Failure(format!("writing response: {e}")))?;
    }
    Ok(())
}

fn serve_http(mock: &AnyKindMock, addr: &str) -> Result<(), CliError> {
    let server = tiny_http::Server::http(addr)
        .map_err(|e| CliError::Failure(format!("binding {addr}: {e}")))?;
    eprintln!("mock backends listening on http://{addr}");
    for mut request in server.incoming_requests() {
        let mut body = String::new();
        if let Err(e) = request.as_reader().read_to_string(&mut body) {
            eprintln!("dropping request: {e}");
            continue;
        }
        let reply = respond(mock, &body).to_string();
        let response = tiny_http::Response::from_string(reply).with_header(
            tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"application/json"[..])
                .expect("static header"),
        );
        if let Err(e) = request.respond(response) {
            eprintln!("dropping response: {e}");
        }
    }
    Ok(())
}
