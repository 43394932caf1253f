//! Short-time frame energies in decibels.

use crate::error::PipelineError;
use crate::scalar::{real, Real};

/// Additive floor inside the log so digital silence stays finite:
/// 10·log10(1e-12) = -120 dB.
const ENERGY_EPSILON: f64 = 1e-12;

/// Convert frame/hop lengths in milliseconds to sample counts (each at
/// least 1).
pub fn frame_params(
    sample_rate: u32,
    frame_ms: f64,
    hop_ms: f64,
) -> Result<(usize, usize), PipelineError> {
    if !(hop_ms > 0.0 && frame_ms >= hop_ms) {
        return Err(PipelineError::Invalid(format!(
            "need frame_ms >= hop_ms > 0, got frame_ms={frame_ms} hop_ms={hop_ms}"
        )));
    }
    let to_samples = |ms: f64| ((ms / 1000.0 * sample_rate as f64).round() as usize).max(1);
    Ok((to_samples(frame_ms), to_samples(hop_ms)))
}

/// Energy of each analysis frame: `10·log10(mean(x²) + 1e-12)`, one value
/// per hop. Audio shorter than one frame yields no frames.
pub fn frame_energies<T: Real>(
    samples: &[T],
    sample_rate: u32,
    frame_ms: f64,
    hop_ms: f64,
) -> Result<Vec<T>, PipelineError> {
    if samples.is_empty() {
        return Err(PipelineError::Invalid("empty audio".into()));
    }
    let (frame_len, hop_len) = frame_params(sample_rate, frame_ms, hop_ms)?;
    if samples.len() < frame_len {
        return Ok(Vec::new());
    }
    let eps = real::<T>(ENERGY_EPSILON);
    let ten = real::<T>(10.0);
    let inv_len = real::<T>(1.0 / frame_len as f64);
    let count = (samples.len() - frame_len) / hop_len + 1;
    let mut energies = Vec::with_capacity(count);
    for i in 0..count {
        let frame = &samples[i * hop_len..i * hop_len + frame_len];
        let mut acc = T::zero();
        for &s in frame {
            acc = acc + s * s;
        }
        energies.push(ten * (acc * inv_len + eps).log10());
    }
    Ok(energies)
}

/// Noise floor: the given percentile (0.10 = 10th) of the frame energies.
pub fn noise_floor_db<T: Real>(energies: &[T], percentile: f64) -> T {
    debug_assert!(!energies.is_empty());
    let mut sorted: Vec<T> = energies.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("energies are finite"));
    let idx = (percentile * (sorted.len() - 1) as f64).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}
