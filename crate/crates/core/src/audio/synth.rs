//! Deterministic signal generators for tests, fixtures, and demos.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A sine tone at the given amplitude.
pub fn tone(sample_rate: u32, freq_hz: f64, amplitude: f64, duration_s: f64) -> Vec<f32> {
    let n = (duration_s * sample_rate as f64).round() as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / sample_rate as f64;
            (amplitude * (2.0 * std::f64::consts::PI * freq_hz * t).sin()) as f32
        })
        .collect()
}

/// Digital silence.
pub fn silence(sample_rate: u32, duration_s: f64) -> Vec<f32> {
    vec![0.0; (duration_s * sample_rate as f64).round() as usize]
}

/// Seeded uniform noise in [-amplitude, amplitude].
pub fn noise(sample_rate: u32, amplitude: f64, duration_s: f64, seed: u64) -> Vec<f32> {
    let n = (duration_s * sample_rate as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (rng.random_range(-amplitude..=amplitude)) as f32)
        .collect()
}
