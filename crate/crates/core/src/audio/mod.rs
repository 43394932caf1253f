//! Audio ingestion and segmentation: WAV decoding, frame energies,
//! energy-based voice activity detection, clip-length policy, and SNR
//! estimation.

mod energy;
mod synth;
mod vad;
mod wav;

pub use energy::{frame_energies, frame_params, noise_floor_db};
pub use synth::{noise, silence, tone};
pub use vad::{detect_speech_regions, estimate_snr, segment_regions, SpeechRegion};
pub use wav::{read_wav, write_wav_f32, write_wav_pcm16, WavAudio};
