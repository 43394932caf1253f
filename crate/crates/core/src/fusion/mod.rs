//! Multi-system hypothesis fusion.
//!
//! Several recognizers transcribe the same clip; their hypotheses are
//! tokenized, aligned into a word transition network, and fused by plurality
//! vote. An external corrector model may then rewrite the consensus (accepted
//! only when it preserves token count), and a confidence score is computed
//! from how much the final text agrees with every candidate.

mod align;
mod correct;
mod tokenize;
mod wtn;

pub use align::{align_pair, AlignedPair, PairAlignment};
pub use correct::{
    compute_confidence, llm_correct, partition_by_confidence, render_prompt, CorrectionOutcome,
    Corrector, DEFAULT_PROMPT_TEMPLATE,
};
pub use tokenize::{detokenize, tokenize};
pub use wtn::{build_wtn, rover_vote, Hypothesis, Slot, SlotEntry, WordTransitionNetwork};
