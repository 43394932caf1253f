//! Pipeline configuration: thresholds for every stage, loadable from TOML.
//!
//! Every knob has a built-in default. Values in a config file override the
//! defaults; the few settings that are also exposed as environment variables
//! or CLI flags (seed, worker count, backend endpoints) override the file —
//! precedence is CLI flag > environment variable > config file > default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::PipelineError;
use crate::manifest::{STRONG_CONFIDENCE_LO, WEAK_CONFIDENCE_LO};

/// Energy-VAD framing and thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VadSettings {
    /// Analysis frame length in milliseconds.
    pub frame_ms: f64,
    /// Hop between frame starts in milliseconds.
    pub hop_ms: f64,
    /// Percentile of frame energies taken as the noise floor (0.10 = 10th).
    pub noise_percentile: f64,
    /// Margin above the noise floor, in dB, for a frame to count as speech.
    pub speech_margin_db: f64,
    /// Non-speech gaps shorter than this are bridged into the surrounding
    /// speech run.
    pub hangover_ms: f64,
}

impl Default for VadSettings {
    fn default() -> Self {
        VadSettings {
            frame_ms: 25.0,
            hop_ms: 10.0,
            noise_percentile: 0.10,
            speech_margin_db: 6.0,
            hangover_ms: 200.0,
        }
    }
}

/// Clip-length policy applied to VAD regions.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentSettings {
    /// Clips shorter than this are dropped (seconds).
    pub min_s: f64,
    /// Regions longer than this are split at low-energy frames (seconds).
    pub max_s: f64,
    /// Speech regions separated by less than this are merged (seconds).
    pub merge_gap_s: f64,
}

impl Default for SegmentSettings {
    fn default() -> Self {
        SegmentSettings {
            min_s: 5.0,
            max_s: 25.0,
            merge_gap_s: 1.0,
        }
    }
}

/// Speaker-clustering threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSettings {
    /// Average-linkage cosine distance above which clusters stay separate.
    pub distance_threshold: f64,
}

impl Default for ClusterSettings {
    fn default() -> Self {
        ClusterSettings {
            distance_threshold: 0.3,
        }
    }
}

/// Quality gate thresholds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateSettings {
    /// Minimum clip duration in seconds.
    pub min_duration_s: f64,
    /// Minimum estimated SNR in dB.
    pub snr_floor_db: f64,
    /// Minimum quality score on the 1-5 scale.
    pub quality_floor: f64,
}

impl Default for GateSettings {
    fn default() -> Self {
        GateSettings {
            min_duration_s: 5.0,
            snr_floor_db: 5.0,
            quality_floor: 2.5,
        }
    }
}

/// Pause classification thresholds for punctuation restoration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PauseSettings {
    /// Inter-word gaps at or above this are short pauses (seconds).
    pub short_s: f64,
    /// Inter-word gaps at or above this are long pauses (seconds).
    pub long_s: f64,
}

impl Default for PauseSettings {
    fn default() -> Self {
        PauseSettings {
            short_s: 0.25,
            long_s: 0.5,
        }
    }
}

/// Confidence tier boundaries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfidenceSettings {
    /// Records with confidence >= this are `strong`.
    pub strong_lo: f64,
    /// Records with confidence in [this, strong_lo) are `weak`; below,
    /// `discarded`.
    pub weak_lo: f64,
}

impl Default for ConfidenceSettings {
    fn default() -> Self {
        ConfidenceSettings {
            strong_lo: STRONG_CONFIDENCE_LO,
            weak_lo: WEAK_CONFIDENCE_LO,
        }
    }
}

/// Hypothesis-fusion settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSettings {
    /// Recognizer ids in falling priority order; used to break voting ties.
    /// Systems not in the list rank below all listed ones, ordered by id.
    pub system_priority: Vec<String>,
}

impl Default for FusionSettings {
    fn default() -> Self {
        FusionSettings {
            system_priority: vec!["asr_a".into(), "asr_b".into(), "asr_c".into()],
        }
    }
}

/// All stage thresholds in one place.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub vad: VadSettings,
    pub segment: SegmentSettings,
    pub cluster: ClusterSettings,
    pub gate: GateSettings,
    pub pause: PauseSettings,
    pub confidence: ConfidenceSettings,
    pub fusion: FusionSettings,
}

impl PipelineConfig {
    /// Load from a TOML file and validate.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| PipelineError::InvalidConfig(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Load from an optional path, falling back to defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, PipelineError> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }

    /// Reject configurations that violate cross-field invariants.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::InvalidConfig(msg));
        let v = &self.vad;
        if !(v.hop_ms > 0.0 && v.frame_ms >= v.hop_ms) {
            return bad(format!(
                "vad: need frame_ms >= hop_ms > 0, got frame_ms={} hop_ms={}",
                v.frame_ms, v.hop_ms
            ));
        }
        if !(0.0..1.0).contains(&v.noise_percentile) {
            return bad(format!(
                "vad.noise_percentile must be in [0, 1), got {}",
                v.noise_percentile
            ));
        }
        if !(v.hangover_ms >= 0.0) {
            return bad(format!("vad.hangover_ms must be >= 0, got {}", v.hangover_ms));
        }
        let s = &self.segment;
        if !(s.min_s > 0.0 && s.min_s < s.max_s) {
            return bad(format!(
                "segment: need 0 < min_s < max_s, got min_s={} max_s={}",
                s.min_s, s.max_s
            ));
        }
        if !(s.merge_gap_s >= 0.0) {
            return bad(format!("segment.merge_gap_s must be >= 0, got {}", s.merge_gap_s));
        }
        if !(self.cluster.distance_threshold > 0.0) {
            return bad(format!(
                "cluster.distance_threshold must be > 0, got {}",
                self.cluster.distance_threshold
            ));
        }
        let g = &self.gate;
        if !(g.min_duration_s >= 0.0) {
            return bad(format!("gate.min_duration_s must be >= 0, got {}", g.min_duration_s));
        }
        if !(1.0..=5.0).contains(&g.quality_floor) {
            return bad(format!("gate.quality_floor must be in [1, 5], got {}", g.quality_floor));
        }
        let p = &self.pause;
        if !(p.short_s > 0.0 && p.short_s < p.long_s) {
            return bad(format!(
                "pause: need 0 < short_s < long_s, got short_s={} long_s={}",
                p.short_s, p.long_s
            ));
        }
        let c = &self.confidence;
        if !(0.0 <= c.weak_lo && c.weak_lo < c.strong_lo && c.strong_lo <= 1.0) {
            return bad(format!(
                "confidence: need 0 <= weak_lo < strong_lo <= 1, got weak_lo={} strong_lo={}",
                c.weak_lo, c.strong_lo
            ));
        }
        Ok(())
    }
}
