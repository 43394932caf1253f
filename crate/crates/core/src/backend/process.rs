//! Child-process transport: one JSON request per line on the child's
//! stdin, one JSON response per line on its stdout.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use serde_json::Value;

use super::{Backend, BackendError, BackendRequest};

/// A backend served by a long-lived child process. The child is spawned
/// lazily on first use and respawned after any timeout or stream failure:
/// once a response is overdue, a late line would desynchronize the
/// request/response pairing, so the only safe recovery is a fresh process.
pub struct ProcessBackend {
    command: String,
    channel: Mutex<Option<ChildChannel>>,
}

struct ChildChannel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Drop for ChildChannel {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl ProcessBackend {
    pub fn new(command: &str) -> Self {
        ProcessBackend {
            command: command.to_string(),
            channel: Mutex::new(None),
        }
    }

    fn spawn(&self) -> std::io::Result<ChildChannel> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = child.stdout.take().expect("stdout was piped");
        let (sender, lines) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let mut line = String::new();
                match reader.read_line(&mut line) {
                    Ok(0) => break,
                    Ok(_) => {
                        if sender.send(Ok(line)).is_err() {
                            break;
                        }
                    }
                    Err(e) => {
                        let _ = sender.send(Err(e));
                        break;
                    }
                }
            }
        });
        Ok(ChildChannel {
            child,
            stdin,
            lines,
        })
    }
}

impl Backend for ProcessBackend {
    fn call(&self, request: &BackendRequest, timeout_ms: u64) -> Result<Value, BackendError> {
        let kind = request.kind;
        let fail = |message: String| BackendError::Transport { kind, message };
        let mut slot = self.channel.lock().unwrap_or_else(|e| e.into_inner());
        if slot.is_none() {
            *slot = Some(
                self.spawn()
                    .map_err(|e| fail(format!("spawn failed: {e}")))?,
            );
        }
        let channel = slot.as_mut().expect("channel was just ensured");
        let line = serde_json::to_string(request)
            .map_err(|e| fail(format!("request serialization failed: {e}")))?;
        if let Err(e) = writeln!(channel.stdin, "{line}").and_then(|_| channel.stdin.flush()) {
            *slot = None;
            return Err(fail(format!("write to backend failed: {e}")));
        }
        match channel.lines.recv_timeout(Duration::from_millis(timeout_ms)) {
            Ok(Ok(response)) => serde_json::from_str(&response).map_err(|e| {
                *slot = None;
                fail(format!("backend wrote invalid JSON: {e}"))
            }),
            Ok(Err(e)) => {
                *slot = None;
                Err(fail(format!("read from backend failed: {e}")))
            }
            Err(RecvTimeoutError::Timeout) => {
                *slot = None;
                Err(BackendError::Timeout { kind, timeout_ms })
            }
            Err(RecvTimeoutError::Disconnected) => {
                *slot = None;
                Err(fail("backend closed its output".into()))
            }
        }
    }
}
