//! Corrector integration, confidence scoring, and tier partitioning.

use crate::backend::BackendError;
use crate::config::ConfidenceSettings;
use crate::error::PipelineError;
use crate::fusion::align::align_pair;
use crate::fusion::tokenize::detokenize;
use crate::fusion::wtn::Hypothesis;
use crate::manifest::{LabelTier, UtteranceRecord};

/// Prompt handed to the corrector model along with the consensus text.
///
/// The correction is only usable when it keeps the token count, so the
/// template spells that constraint out.
pub const DEFAULT_PROMPT_TEMPLATE: &str = "\
You are correcting the transcript of a Sichuanese (Southwestern Mandarin) utterance.\n\
Several recognizers produced the hypotheses below; the consensus line is their fusion.\n\
Fix recognition errors, keeping dialect wording intact. You must keep exactly the same\n\
number of tokens as the consensus: substitute characters only, never insert or delete.\n\
Reply with the corrected text only.\n\
\n\
Consensus: {consensus}\n\
{hypotheses}";

/// Render the corrector prompt for one utterance.
pub fn render_prompt(consensus_text: &str, hypotheses: &[Hypothesis]) -> String {
    let hyp_lines: Vec<String> = hypotheses
        .iter()
        .map(|h| format!("Hypothesis ({}): {}", h.system_id, detokenize(&h.tokens)))
        .collect();
    DEFAULT_PROMPT_TEMPLATE
        .replace("{consensus}", consensus_text)
        .replace("{hypotheses}", &hyp_lines.join("\n"))
}

/// Something that can propose a corrected token sequence for a consensus.
pub trait Corrector {
    fn correct(
        &self,
        consensus: &[String],
        hypotheses: &[Hypothesis],
    ) -> Result<Vec<String>, BackendError>;
}

impl<F> Corrector for F
where
    F: Fn(&[String], &[Hypothesis]) -> Result<Vec<String>, BackendError>,
{
    fn correct(
        &self,
        consensus: &[String],
        hypotheses: &[Hypothesis],
    ) -> Result<Vec<String>, BackendError> {
        self(consensus, hypotheses)
    }
}

/// Result of running the corrector over a consensus sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionOutcome {
    /// The tokens to carry forward (corrected, or the consensus on
    /// rejection/failure).
    pub tokens: Vec<String>,
    /// What the corrector proposed, when it answered at all. Kept even when
    /// rejected so it still participates in confidence scoring.
    pub proposed: Option<Vec<String>>,
    /// True when the proposal was adopted.
    pub accepted: bool,
    /// True when the proposal changed the token count and was rejected.
    pub length_violation: bool,
    /// True when the corrector backend failed outright.
    pub backend_failed: bool,
}

/// Ask the corrector for a rewrite of `consensus`, enforcing the
/// token-count-preserving constraint.
///
/// A proposal with a different token count is rejected (the consensus is kept
/// and `length_violation` is set); a backend failure also falls back to the
/// consensus. Never errors: fusion always has the consensus to fall back on.
pub fn llm_correct(
    consensus: &[String],
    hypotheses: &[Hypothesis],
    corrector: &dyn Corrector,
) -> CorrectionOutcome {
    match corrector.correct(consensus, hypotheses) {
        Ok(proposed) => {
            let accepted = proposed.len() == consensus.len();
            CorrectionOutcome {
                tokens: if accepted {
                    proposed.clone()
                } else {
                    consensus.to_vec()
                },
                length_violation: !accepted,
                proposed: Some(proposed),
                accepted,
                backend_failed: false,
            }
        }
        Err(_) => CorrectionOutcome {
            tokens: consensus.to_vec(),
            proposed: None,
            accepted: false,
            length_violation: false,
            backend_failed: true,
        },
    }
}

/// Score agreement between the final token sequence and every candidate.
///
/// For candidate `i` with edit distance `d_i` to the final sequence, the
/// agreement term is `1 - d_i / max(|final|, |candidate_i|)`; the confidence
/// is the mean over all candidates, clamped to [0, 1]. An empty final
/// sequence (or an empty candidate list) scores 0.
pub fn compute_confidence(final_tokens: &[String], candidates: &[&[String]]) -> f64 {
    if final_tokens.is_empty() || candidates.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for candidate in candidates {
        let denom = final_tokens.len().max(candidate.len());
        let d = align_pair(final_tokens, candidate).distance;
        sum += 1.0 - d as f64 / denom as f64;
    }
    (sum / candidates.len() as f64).clamp(0.0, 1.0)
}

/// Assign a label tier to every record from its confidence.
///
/// `strong` iff confidence >= `strong_lo`, `weak` iff in
/// [`weak_lo`, `strong_lo`), `discarded` below. Errors if any record has no
/// confidence.
pub fn partition_by_confidence(
    records: &mut [UtteranceRecord],
    boundaries: &ConfidenceSettings,
) -> Result<(), PipelineError> {
    for record in records.iter_mut() {
        let c = record.confidence.ok_or_else(|| PipelineError::Missing {
            utterance_id: record.utterance_id.clone(),
            what: "confidence (run the fusion stage first)".into(),
        })?;
        let tier = if c >= boundaries.strong_lo {
            LabelTier::Strong
        } else if c >= boundaries.weak_lo {
            LabelTier::Weak
        } else {
            LabelTier::Discarded
        };
        record.label_tier = Some(tier);
    }
    Ok(())
}
