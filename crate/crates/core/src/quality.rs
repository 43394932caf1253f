//! Quality scoring, threshold gating, and the score histogram.

use crate::backend::BackendError;
use crate::config::GateSettings;
use crate::error::PipelineError;
use crate::manifest::UtteranceRecord;

/// Something that can score perceptual quality for a clip on the 1-5 scale.
pub trait QualityScorer {
    fn score(&self, record: &UtteranceRecord) -> Result<f64, BackendError>;
}

impl<F> QualityScorer for F
where
    F: Fn(&UtteranceRecord) -> Result<f64, BackendError>,
{
    fn score(&self, record: &UtteranceRecord) -> Result<f64, BackendError> {
        self(record)
    }
}

/// Obtain and store the quality score, clamped to [1, 5]. On backend failure
/// the record is left untouched (score absent) and the error is returned so
/// the caller can route the record to a retry list.
pub fn score_quality(
    record: &mut UtteranceRecord,
    scorer: &dyn QualityScorer,
) -> Result<f64, BackendError> {
    let score = scorer.score(record)?.clamp(1.0, 5.0);
    record.quality_score = Some(score);
    Ok(score)
}

/// The first threshold a discarded record failed, in fixed evaluation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateReason {
    Duration,
    Snr,
    QualityScore,
}

impl GateReason {
    pub fn as_str(self) -> &'static str {
        match self {
            GateReason::Duration => "duration",
            GateReason::Snr => "snr",
            GateReason::QualityScore => "quality_score",
        }
    }
}

/// Split records into (kept, discarded-with-reason). A record is discarded
/// iff it fails at least one threshold; the reason is the first failure in
/// the order duration, snr, quality_score. Records must already carry a
/// quality score.
pub fn gate(
    records: Vec<UtteranceRecord>,
    settings: &GateSettings,
) -> Result<(Vec<UtteranceRecord>, Vec<(UtteranceRecord, GateReason)>), PipelineError> {
    let mut kept = Vec::with_capacity(records.len());
    let mut discarded = Vec::new();
    for record in records {
        let quality = record
            .quality_score
            .ok_or_else(|| PipelineError::Missing {
                utterance_id: record.utterance_id.clone(),
                what: "quality_score (run scoring first)".into(),
            })?;
        let reason = if record.duration_s < settings.min_duration_s {
            Some(GateReason::Duration)
        } else if record.snr_db < settings.snr_floor_db {
            Some(GateReason::Snr)
        } else if quality < settings.quality_floor {
            Some(GateReason::QualityScore)
        } else {
            None
        };
        match reason {
            Some(r) => discarded.push((record, r)),
            None => kept.push(record),
        }
    }
    Ok((kept, discarded))
}

/// Histogram of quality scores over eight 0.5-wide bins spanning [1.0, 5.0];
/// the last bin is closed so a score of exactly 5.0 lands in [4.5, 5.0].
pub fn quality_histogram(records: &[UtteranceRecord]) -> Result<[usize; 8], PipelineError> {
    let mut bins = [0usize; 8];
    for record in records {
        let score = record
            .quality_score
            .ok_or_else(|| PipelineError::Missing {
                utterance_id: record.utterance_id.clone(),
                what: "quality_score".into(),
            })?;
        let bin = (((score - 1.0) / 0.5).floor() as isize).clamp(0, 7) as usize;
        bins[bin] += 1;
    }
    Ok(bins)
}

/// Plain-text bar table of the histogram, one row per bin.
pub fn histogram_table(bins: &[usize; 8]) -> String {
    let mut out = String::from("quality_score distribution\n");
    let max = bins.iter().copied().max().unwrap_or(0).max(1);
    for (i, &count) in bins.iter().enumerate() {
        let lo = 1.0 + 0.5 * i as f64;
        let hi = lo + 0.5;
        let closer = if i == 7 { ']' } else { ')' };
        let width = (count * 40).div_ceil(max);
        out.push_str(&format!(
            "  [{lo:.1}, {hi:.1}{closer} {:<40} {count}\n",
            "#".repeat(if count == 0 { 0 } else { width })
        ));
    }
    out
}
