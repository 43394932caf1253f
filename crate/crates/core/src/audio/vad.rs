//! Energy-based voice activity detection, clip-length policy, and SNR.

use crate::config::{SegmentSettings, VadSettings};
use crate::error::PipelineError;
use crate::scalar::{real, to_f64, Real};

use super::energy::{frame_params, noise_floor_db};

/// Reported SNR is capped here; digital-silence backgrounds would otherwise
/// produce arbitrarily large values.
pub const SNR_CAP_DB: f64 = 60.0;

/// A contiguous run of speech found by the VAD.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeechRegion<T: Real> {
    pub start_s: f64,
    pub end_s: f64,
    /// Mean energy of the frames classified as speech inside the region.
    pub mean_speech_energy_db: T,
    /// Noise floor of the whole recording (energy percentile).
    pub noise_floor_db: T,
}

fn grid(sample_rate: u32, settings: &VadSettings) -> (f64, f64, usize, usize) {
    let (frame_len, hop_len) =
        frame_params(sample_rate, settings.frame_ms, settings.hop_ms).expect("validated config");
    let frame_s = frame_len as f64 / sample_rate as f64;
    let hop_s = hop_len as f64 / sample_rate as f64;
    (frame_s, hop_s, frame_len, hop_len)
}

fn speech_mask<T: Real>(energies: &[T], settings: &VadSettings) -> (Vec<bool>, T) {
    let floor = noise_floor_db(energies, settings.noise_percentile);
    let threshold = floor + real::<T>(settings.speech_margin_db);
    let mask = energies.iter().map(|&e| e > threshold).collect();
    (mask, floor)
}

/// Find speech regions: frames above `noise_floor + margin` are speech, and
/// non-speech gaps shorter than the hangover are bridged. Returns an empty
/// list when nothing is above the threshold.
pub fn detect_speech_regions<T: Real>(
    energies: &[T],
    sample_rate: u32,
    settings: &VadSettings,
) -> Vec<SpeechRegion<T>> {
    if energies.is_empty() {
        return Vec::new();
    }
    let (frame_s, hop_s, _, _) = grid(sample_rate, settings);
    let (mask, floor) = speech_mask(energies, settings);

    // Raw speech runs as half-open frame-index ranges.
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < mask.len() {
        if mask[i] {
            let start = i;
            while i < mask.len() && mask[i] {
                i += 1;
            }
            runs.push((start, i));
        } else {
            i += 1;
        }
    }

    // Bridge gaps shorter than the hangover window.
    let mut bridged: Vec<(usize, usize)> = Vec::new();
    for run in runs {
        match bridged.last_mut() {
            Some(last) if ((run.0 - last.1) as f64 * hop_s * 1000.0) < settings.hangover_ms => {
                last.1 = run.1;
            }
            _ => bridged.push(run),
        }
    }

    bridged
        .into_iter()
        .map(|(start, end)| {
            let mut acc = T::zero();
            let mut n = 0usize;
            for f in start..end {
                if mask[f] {
                    acc = acc + energies[f];
                    n += 1;
                }
            }
            SpeechRegion {
                start_s: start as f64 * hop_s,
                end_s: (end - 1) as f64 * hop_s + frame_s,
                mean_speech_energy_db: acc / real::<T>(n as f64),
                noise_floor_db: floor,
            }
        })
        .collect()
}

/// Apply the clip-length policy to detected regions: merge regions separated
/// by less than `merge_gap_s`, split anything longer than `max_s` at its
/// lowest-energy internal frame nearest the midpoint, and drop what is still
/// shorter than `min_s`.
pub fn segment_regions<T: Real>(
    regions: &[SpeechRegion<T>],
    energies: &[T],
    sample_rate: u32,
    vad: &VadSettings,
    settings: &SegmentSettings,
) -> Vec<(f64, f64)> {
    let (_, hop_s, _, _) = grid(sample_rate, vad);

    let mut merged: Vec<(f64, f64)> = Vec::new();
    for region in regions {
        match merged.last_mut() {
            Some(last) if region.start_s - last.1 < settings.merge_gap_s => {
                last.1 = region.end_s;
            }
            _ => merged.push((region.start_s, region.end_s)),
        }
    }

    let mut clips = Vec::new();
    for span in merged {
        split_span(span, energies, hop_s, settings, &mut clips);
    }
    clips
}

fn split_span<T: Real>(
    (start, end): (f64, f64),
    energies: &[T],
    hop_s: f64,
    settings: &SegmentSettings,
    out: &mut Vec<(f64, f64)>,
) {
    let duration = end - start;
    if duration <= settings.max_s + 1e-9 {
        if duration >= settings.min_s - 1e-9 {
            out.push((start, end));
        }
        return;
    }

    // Candidate cut frames keep both halves at least min_s long.
    let zone = (start + settings.min_s, end - settings.min_s);
    let mid = (start + end) / 2.0;
    let mut best: Option<(T, f64, usize)> = None; // (energy, |t - mid|, index)
    let first = (zone.0 / hop_s).ceil() as usize;
    for i in first..energies.len() {
        let t = i as f64 * hop_s;
        if t > zone.1 + 1e-9 {
            break;
        }
        let key = (energies[i], (t - mid).abs(), i);
        let better = match &best {
            None => true,
            Some(b) => match key.0.partial_cmp(&b.0).expect("finite energies") {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Greater => false,
                std::cmp::Ordering::Equal => key.1 < b.1,
            },
        };
        if better {
            best = Some(key);
        }
    }
    let cut = match best {
        Some((_, _, i)) => i as f64 * hop_s,
        // Degenerate config (max_s < 2·min_s): halve and let the length
        // check sort it out.
        None => mid,
    };
    split_span((start, cut), energies, hop_s, settings, out);
    split_span((cut, end), energies, hop_s, settings, out);
}

/// Estimate the SNR of one clip: mean energy of its speech frames minus the
/// recording's noise floor, capped at [`SNR_CAP_DB`]. Falls back to the mean
/// over all clip frames when nothing in the clip clears the speech
/// threshold.
pub fn estimate_snr<T: Real>(
    energies: &[T],
    sample_rate: u32,
    settings: &VadSettings,
    clip: (f64, f64),
) -> Result<f64, PipelineError> {
    if energies.is_empty() {
        return Err(PipelineError::Invalid("no frame energies".into()));
    }
    let (frame_s, hop_s, _, _) = grid(sample_rate, settings);
    let (mask, floor) = speech_mask(energies, settings);

    let inside = |i: usize| {
        let t = i as f64 * hop_s;
        t >= clip.0 - 1e-9 && t + frame_s <= clip.1 + 1e-9
    };
    let overlaps = |i: usize| {
        let t = i as f64 * hop_s;
        t < clip.1 && t + frame_s > clip.0
    };
    let mut frames: Vec<usize> = (0..energies.len()).filter(|&i| inside(i)).collect();
    if frames.is_empty() {
        frames = (0..energies.len()).filter(|&i| overlaps(i)).collect();
    }
    if frames.is_empty() {
        return Err(PipelineError::Invalid(format!(
            "clip [{}, {}] covers no analysis frames",
            clip.0, clip.1
        )));
    }

    let speech: Vec<usize> = frames.iter().copied().filter(|&i| mask[i]).collect();
    let base = if speech.is_empty() { &frames } else { &speech };
    let mut acc = T::zero();
    for &i in base {
        acc = acc + energies[i];
    }
    let mean = acc / real::<T>(base.len() as f64);
    Ok(to_f64(mean - floor).min(SNR_CAP_DB))
}
