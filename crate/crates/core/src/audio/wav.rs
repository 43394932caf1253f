//! Minimal RIFF/WAVE reader and writer.
//!
//! Decodes mono PCM16 and IEEE float32, the two encodings the pipeline
//! accepts; everything else (ADPCM, a-law, MP3-in-WAV, multichannel) is
//! rejected with a named error so batch runs fail loudly instead of
//! mis-decoding. Samples are normalized to [-1, 1].

use std::path::Path;

use crate::error::PipelineError;
use crate::scalar::{real, Real};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_IEEE_FLOAT: u16 = 0x0003;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Decoded mono audio.
#[derive(Debug, Clone)]
pub struct WavAudio<T: Real> {
    pub sample_rate: u32,
    pub samples: Vec<T>,
}

impl<T: Real> WavAudio<T> {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> PipelineError {
    PipelineError::WavFormat {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

struct FmtChunk {
    format_tag: u16,
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

/// Read a mono WAV file into normalized samples.
pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<WavAudio<T>, PipelineError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(format_err(path, "missing RIFF/WAVE header"));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut offset = 12usize;
    while offset + 8 <= bytes.len() {
        let id = &bytes[offset..offset + 4];
        let size = u32_at(&bytes, offset + 4) as usize;
        let body_start = offset + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| format_err(path, "truncated chunk"))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(format_err(path, "fmt chunk too short"));
                }
                let mut format_tag = u16_at(body, 0);
                if format_tag == FORMAT_EXTENSIBLE {
                    // WAVE_FORMAT_EXTENSIBLE: the real format is the first
                    // two bytes of the SubFormat GUID at offset 24.
                    if body.len() < 26 {
                        return Err(format_err(path, "extensible fmt chunk too short"));
                    }
                    format_tag = u16_at(body, 24);
                }
                fmt = Some(FmtChunk {
                    format_tag,
                    channels: u16_at(body, 2),
                    sample_rate: u32_at(body, 4),
                    bits_per_sample: u16_at(body, 14),
                });
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned; odd sizes carry a pad byte.
        offset = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| format_err(path, "no fmt chunk"))?;
    let data = data.ok_or_else(|| format_err(path, "no data chunk"))?;
    if fmt.channels != 1 {
        return Err(format_err(
            path,
            format!("expected mono audio, got {} channels", fmt.channels),
        ));
    }
    if fmt.sample_rate == 0 {
        return Err(format_err(path, "sample rate is zero"));
    }

    let samples = match (fmt.format_tag, fmt.bits_per_sample) {
        (FORMAT_PCM, 16) => {
            let scale = real::<T>(1.0 / 32768.0);
            data.chunks_exact(2)
                .map(|c| real::<T>(i16::from_le_bytes([c[0], c[1]]) as f64) * scale)
                .collect()
        }
        (FORMAT_PCM, bits) => {
            return Err(format_err(
                path,
                format!("unsupported PCM bit depth {bits}; expected 16"),
            ));
        }
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| real::<T>(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect(),
        (FORMAT_IEEE_FLOAT, bits) => {
            return Err(format_err(
                path,
                format!("unsupported float bit depth {bits}; expected 32"),
            ));
        }
        (tag, _) => {
            return Err(PipelineError::UnsupportedWavCodec {
                path: path.to_path_buf(),
                format_tag: tag,
            });
        }
    };

    Ok(WavAudio {
        sample_rate: fmt.sample_rate,
        samples,
    })
}

fn write_riff(
    path: &Path,
    format_tag: u16,
    bits: u16,
    sample_rate: u32,
    payload: &[u8],
    fact_frames: Option<u32>,
) -> Result<(), PipelineError> {
    let bytes_per_sample = u32::from(bits / 8);
    let fact_len: u32 = if fact_frames.is_some() { 12 } else { 0 };
    let riff_size = 4 + 24 + fact_len + 8 + payload.len() as u32;
    let mut out = Vec::with_capacity(riff_size as usize + 8);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&riff_size.to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_tag.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * bytes_per_sample).to_le_bytes());
    out.extend_from_slice(&(bytes_per_sample as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    if let Some(frames) = fact_frames {
        out.extend_from_slice(b"fact");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&frames.to_le_bytes());
    }
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    std::fs::write(path, out).map_err(|e| PipelineError::io(path, e))
}

/// Write mono IEEE float32 WAV.
pub fn write_wav_f32(
    path: impl AsRef<Path>,
    samples: &[f32],
    sample_rate: u32,
) -> Result<(), PipelineError> {
    let payload: Vec<u8> = samples.iter().flat_map(|s| s.to_le_bytes()).collect();
    write_riff(
        path.as_ref(),
        FORMAT_IEEE_FLOAT,
        32,
        sample_rate,
        &payload,
        Some(samples.len() as u32),
    )
}

/// Write mono PCM16 WAV.
pub fn write_wav_pcm16(
    path: impl AsRef<Path>,
    samples: &[i16],
    sample_rate: u32,
) -> Result<(), PipelineError> {
    let payload: Vec<u8> = samples.iter().flat_map(|s| s.to_le_bytes()).collect();
    write_riff(path.as_ref(), FORMAT_PCM, 16, sample_rate, &payload, None)
}
