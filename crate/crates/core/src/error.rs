//! Error types shared across the pipeline.

use std::path::PathBuf;

use thiserror::Error;

use crate::backend::BackendError;

/// Errors produced by manifest I/O, audio decoding, configuration, and the
/// pipeline stages themselves.
#[derive(Debug, Error)]
pub enum PipelineError {
    /// Filesystem error, annotated with the path that failed.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A manifest line that is not valid JSON or does not match the record
    /// schema.
    #[error("line {line}: {message}")]
    ManifestParse { line: usize, message: String },

    /// A structurally valid record that violates an invariant.
    #[error("utterance {utterance_id}: {field} {message}")]
    InvalidRecord {
        utterance_id: String,
        field: &'static str,
        message: String,
    },

    /// An error tagged with the manifest line it came from.
    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<PipelineError>,
    },

    /// Bad configuration value or unparseable config file.
    #[error("config: {0}")]
    InvalidConfig(String),

    /// A file that is not a decodable RIFF/WAVE container.
    #[error("{path}: not a decodable WAV file: {message}")]
    WavFormat { path: PathBuf, message: String },

    /// A WAV file using a codec other than PCM16 / IEEE float32.
    #[error(
        "{path}: unsupported WAV codec (format tag {format_tag:#06x}); \
         only mono PCM16 and IEEE float32 are supported"
    )]
    UnsupportedWavCodec { path: PathBuf, format_tag: u16 },

    /// A required per-utterance input (flag, response, field) was absent.
    #[error("utterance {utterance_id}: missing {what}")]
    Missing { utterance_id: String, what: String },

    /// Failure reported by a model backend.
    #[error(transparent)]
    Backend(#[from] BackendError),

    /// A precondition violation not tied to a single record.
    #[error("{0}")]
    Invalid(String),
}

impl PipelineError {
    /// Wrap an I/O error with the path that produced it.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn record(
        utterance_id: impl Into<String>,
        field: &'static str,
        message: impl Into<String>,
    ) -> Self {
        PipelineError::InvalidRecord {
            utterance_id: utterance_id.into(),
            field,
            message: message.into(),
        }
    }
}
