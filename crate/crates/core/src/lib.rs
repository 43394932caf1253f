//! Batch pipeline for constructing richly annotated speech corpora from raw,
//! in-the-wild audio.
//!
//! The pipeline turns a directory of WAV recordings plus the outputs of
//! pluggable model backends (ASR, speaker embedding, paralinguistic
//! classifiers, quality scoring, forced alignment, punctuation) into a JSONL
//! manifest of utterance records, each carrying speaker / gender / age /
//! emotion / domain labels, an SNR and quality estimate, a fused
//! transcription with a confidence score, and a final label tier
//! (`strong` / `weak` / `discarded`).
//!
//! Stages are manifest-to-manifest: every stage reads utterance records,
//! transforms them, and hands back records plus audit lists (discards,
//! failures). Everything is deterministic for a fixed seed — running with one
//! worker or eight produces byte-identical manifests.
//!
//! The signal-path math (frame energies, VAD, SNR, embedding clustering) is
//! generic over the scalar type via [`Real`]; `f32` keeps memory down on long
//! recordings, `f64` is the default everywhere the manifest is concerned.

pub mod audio;
pub mod backend;
pub mod config;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod labels;
pub mod manifest;
pub mod pipeline;
pub mod punctuate;
pub mod quality;
pub mod scalar;
pub mod speaker;

pub use error::PipelineError;
pub use manifest::{read_manifest, write_manifest, UtteranceRecord};
pub use scalar::Real;

/// Speech region produced by the energy VAD, single precision.
pub type SpeechRegionF32 = audio::SpeechRegion<f32>;
/// Speech region produced by the energy VAD, double precision.
pub type SpeechRegionF64 = audio::SpeechRegion<f64>;
/// Speaker embedding with unit-normalized single-precision vector.
pub type SpeakerEmbeddingF32 = speaker::SpeakerEmbedding<f32>;
/// Speaker embedding with unit-normalized double-precision vector.
pub type SpeakerEmbeddingF64 = speaker::SpeakerEmbedding<f64>;
