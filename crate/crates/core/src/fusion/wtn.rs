//! Word transition network construction and plurality voting.

use crate::error::PipelineError;
use crate::fusion::align::align_pair;
use crate::fusion::tokenize::tokenize;

/// One recognizer's tokenized output for an utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypothesis {
    pub system_id: String,
    pub tokens: Vec<String>,
}

impl Hypothesis {
    /// Build from pre-tokenized tokens, rejecting empty token strings.
    pub fn new(
        system_id: impl Into<String>,
        tokens: Vec<String>,
    ) -> Result<Self, PipelineError> {
        let system_id = system_id.into();
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(PipelineError::Invalid(format!(
                "hypothesis from {system_id} contains an empty token"
            )));
        }
        Ok(Hypothesis { system_id, tokens })
    }

    /// Tokenize raw recognizer text.
    pub fn from_text(system_id: impl Into<String>, text: &str) -> Self {
        Hypothesis {
            system_id: system_id.into(),
            tokens: tokenize(text),
        }
    }
}

/// One system's token (or gap) in a slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotEntry {
    pub system_id: String,
    /// `None` is a gap: this system had no token at this position.
    pub token: Option<String>,
}

/// One aligned position across all systems.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Slot {
    pub entries: Vec<SlotEntry>,
}

/// All hypotheses aligned into parallel slots.
///
/// Invariant: every slot holds exactly one entry per folded hypothesis, in
/// folding order, and at least one entry is a real token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordTransitionNetwork {
    /// System ids in folding order, one per input hypothesis.
    pub systems: Vec<String>,
    pub slots: Vec<Slot>,
}

/// Rank key for a system: position in the priority list, then id. Systems
/// absent from the list sort after all listed ones.
fn system_rank<'a>(system_id: &'a str, priority: &[String]) -> (usize, &'a str) {
    let pos = priority
        .iter()
        .position(|p| p == system_id)
        .unwrap_or(priority.len());
    (pos, system_id)
}

/// Pick the winning token among `entries`: highest count, ties broken by the
/// best (lowest-ranked) supporting system, then by token string. Returns
/// `None` only for an empty entry list; `Some(None)` means the gap won.
fn plurality<'a>(
    entries: impl Iterator<Item = &'a SlotEntry>,
    priority: &[String],
) -> Option<Option<String>> {
    struct Candidate<'a> {
        token: Option<&'a str>,
        count: usize,
        best_rank: (usize, &'a str),
    }
    let mut candidates: Vec<Candidate> = Vec::new();
    for entry in entries {
        let token = entry.token.as_deref();
        let rank = system_rank(&entry.system_id, priority);
        match candidates.iter_mut().find(|c| c.token == token) {
            Some(c) => {
                c.count += 1;
                if rank < c.best_rank {
                    c.best_rank = rank;
                }
            }
            None => candidates.push(Candidate { token, count: 1, best_rank: rank }),
        }
    }
    candidates.sort_by(|x, y| {
        y.count
            .cmp(&x.count)
            .then_with(|| x.best_rank.cmp(&y.best_rank))
            .then_with(|| x.token.unwrap_or("").cmp(y.token.unwrap_or("")))
    });
    candidates.first().map(|c| c.token.map(String::from))
}

/// The current consensus skeleton: the winning real token of each slot.
fn skeleton(wtn: &WordTransitionNetwork, priority: &[String]) -> Vec<String> {
    wtn.slots
        .iter()
        .map(|slot| {
            plurality(slot.entries.iter().filter(|e| e.token.is_some()), priority)
                .flatten()
                .expect("every slot holds at least one real token")
        })
        .collect()
}

/// Iteratively align hypotheses into a word transition network.
///
/// The first hypothesis seeds one slot per token; each later hypothesis is
/// aligned against the evolving skeleton (the plurality token of each slot).
/// Matched and substituted tokens join the existing slot, a gap adds a gap
/// entry, and an inserted token opens a fresh slot with gap entries for all
/// previously folded systems. Ties during voting prefer higher count, then
/// the `priority` order, then the token string.
pub fn build_wtn(
    hypotheses: &[Hypothesis],
    priority: &[String],
) -> Result<WordTransitionNetwork, PipelineError> {
    let first = hypotheses
        .first()
        .ok_or_else(|| PipelineError::Invalid("fusion needs at least one hypothesis".into()))?;
    for h in hypotheses {
        if h.tokens.iter().any(|t| t.is_empty()) {
            return Err(PipelineError::Invalid(format!(
                "hypothesis from {} contains an empty token",
                h.system_id
            )));
        }
    }
    let mut wtn = WordTransitionNetwork {
        systems: vec![first.system_id.clone()],
        slots: first
            .tokens
            .iter()
            .map(|t| Slot {
                entries: vec![SlotEntry {
                    system_id: first.system_id.clone(),
                    token: Some(t.clone()),
                }],
            })
            .collect(),
    };
    for hyp in &hypotheses[1..] {
        fold(&mut wtn, hyp, priority);
    }
    Ok(wtn)
}

fn fold(wtn: &mut WordTransitionNetwork, hyp: &Hypothesis, priority: &[String]) {
    let skel = skeleton(wtn, priority);
    let alignment = align_pair(&skel, &hyp.tokens);
    let mut old: Vec<Option<Slot>> = std::mem::take(&mut wtn.slots)
        .into_iter()
        .map(Some)
        .collect();
    let mut slots = Vec::with_capacity(alignment.pairs.len());
    for pair in &alignment.pairs {
        let slot = match (pair.a, pair.b) {
            (Some(i), token_idx) => {
                let mut slot = old[i].take().expect("each slot consumed once");
                slot.entries.push(SlotEntry {
                    system_id: hyp.system_id.clone(),
                    token: token_idx.map(|j| hyp.tokens[j].clone()),
                });
                slot
            }
            (None, Some(j)) => {
                let mut entries: Vec<SlotEntry> = wtn
                    .systems
                    .iter()
                    .map(|s| SlotEntry { system_id: s.clone(), token: None })
                    .collect();
                entries.push(SlotEntry {
                    system_id: hyp.system_id.clone(),
                    token: Some(hyp.tokens[j].clone()),
                });
                Slot { entries }
            }
            (None, None) => unreachable!("alignment never pairs two gaps"),
        };
        slots.push(slot);
    }
    wtn.slots = slots;
    wtn.systems.push(hyp.system_id.clone());
}

/// Fuse the network into a consensus token sequence by per-slot plurality
/// vote; slots where the gap wins contribute nothing.
pub fn rover_vote(wtn: &WordTransitionNetwork, priority: &[String]) -> Vec<String> {
    wtn.slots
        .iter()
        .filter_map(|slot| plurality(slot.entries.iter(), priority).flatten())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hyp(id: &str, text: &str) -> Hypothesis {
        Hypothesis::from_text(id, text)
    }

    fn priority() -> Vec<String> {
        vec!["asr_a".into(), "asr_b".into(), "asr_c".into()]
    }

    fn fuse(hyps: &[Hypothesis]) -> String {
        let wtn = build_wtn(hyps, &priority()).unwrap();
        rover_vote(&wtn, &priority()).join("")
    }

    #[test]
    fn majority_wins_a_slot() {
        let out = fuse(&[hyp("asr_a", "甲"), hyp("asr_b", "甲"), hyp("asr_c", "乙")]);
        assert_eq!(out, "甲");
    }

    #[test]
    fn all_different_falls_back_to_priority() {
        let out = fuse(&[hyp("asr_a", "甲"), hyp("asr_b", "乙"), hyp("asr_c", "丙")]);
        assert_eq!(out, "甲");
        let reversed: Vec<String> = vec!["asr_c".into(), "asr_b".into(), "asr_a".into()];
        let wtn = build_wtn(
            &[hyp("asr_a", "甲"), hyp("asr_b", "乙"), hyp("asr_c", "丙")],
            &reversed,
        )
        .unwrap();
        assert_eq!(rover_vote(&wtn, &reversed).join(""), "丙");
    }

    #[test]
    fn identical_hypotheses_pass_through() {
        let out = fuse(&[hyp("asr_a", "吃了吗"), hyp("asr_b", "吃了吗")]);
        assert_eq!(out, "吃了吗");
    }

    #[test]
    fn missing_token_becomes_gap_entry() {
        let wtn = build_wtn(&[hyp("asr_a", "吃了吗"), hyp("asr_b", "吃吗")], &priority()).unwrap();
        assert_eq!(wtn.slots.len(), 3);
        let middle = &wtn.slots[1];
        assert_eq!(middle.entries[0].token.as_deref(), Some("了"));
        assert_eq!(middle.entries[1].token, None);
        // Count tie (1 vs 1) broken by priority: asr_a's token wins.
        assert_eq!(fuse(&[hyp("asr_a", "吃了吗"), hyp("asr_b", "吃吗")]), "吃了吗");
    }

    #[test]
    fn gap_majority_drops_the_token() {
        let out = fuse(&[hyp("asr_a", "吃了吗"), hyp("asr_b", "吃吗"), hyp("asr_c", "吃吗")]);
        assert_eq!(out, "吃吗");
    }

    #[test]
    fn insertion_opens_slot_with_gaps_for_prior_systems() {
        let wtn = build_wtn(&[hyp("asr_a", "吃吗"), hyp("asr_b", "吃了吗")], &priority()).unwrap();
        assert_eq!(wtn.slots.len(), 3);
        let inserted = &wtn.slots[1];
        assert_eq!(inserted.entries.len(), 2);
        assert_eq!(inserted.entries[0].system_id, "asr_a");
        assert_eq!(inserted.entries[0].token, None);
        assert_eq!(inserted.entries[1].token.as_deref(), Some("了"));
    }

    #[test]
    fn one_corrupted_hypothesis_cannot_outvote_two_clean_ones() {
        let out = fuse(&[
            hyp("asr_a", "今天吃火锅"),
            hyp("asr_b", "今天吃火锅"),
            hyp("asr_c", "明天去火锅"),
        ]);
        assert_eq!(out, "今天吃火锅");
    }

    #[test]
    fn disjoint_corruption_sites_recover_the_clean_text() {
        let out = fuse(&[
            hyp("asr_a", "今天吃火锅"),
            hyp("asr_b", "明天吃火锅"),
            hyp("asr_c", "今天吃锅"),
        ]);
        assert_eq!(out, "今天吃火锅");
    }

    #[test]
    fn empty_hypothesis_list_is_an_error() {
        assert!(build_wtn(&[], &priority()).is_err());
    }

    #[test]
    fn empty_token_string_is_an_error() {
        let bad = Hypothesis { system_id: "asr_a".into(), tokens: vec!["".into()] };
        assert!(build_wtn(&[bad], &priority()).is_err());
        assert!(Hypothesis::new("asr_a", vec!["".into()]).is_err());
    }

    #[test]
    fn empty_first_hypothesis_still_folds_later_ones() {
        let out = fuse(&[hyp("asr_a", ""), hyp("asr_b", "要得"), hyp("asr_c", "要得")]);
        assert_eq!(out, "要得");
    }

    proptest! {
        /// Every slot ends up with exactly one entry per hypothesis (in
        /// folding order) and at least one real token.
        #[test]
        fn slot_shape_invariant(
            texts in prop::collection::vec(
                prop::collection::vec(prop::sample::select(vec!["甲", "乙", "丙"]), 0..6),
                1..5,
            ),
        ) {
            let hyps: Vec<Hypothesis> = texts
                .iter()
                .enumerate()
                .map(|(i, toks)| Hypothesis {
                    system_id: format!("sys{i}"),
                    tokens: toks.iter().map(|s| s.to_string()).collect(),
                })
                .collect();
            let ids: Vec<String> = hyps.iter().map(|h| h.system_id.clone()).collect();
            let wtn = build_wtn(&hyps, &ids).unwrap();
            prop_assert_eq!(&wtn.systems, &ids);
            for slot in &wtn.slots {
                prop_assert_eq!(slot.entries.len(), hyps.len());
                for (entry, id) in slot.entries.iter().zip(&ids) {
                    prop_assert_eq!(&entry.system_id, id);
                }
                prop_assert!(slot.entries.iter().any(|e| e.token.is_some()));
            }
            // Voting output never exceeds the slot count.
            prop_assert!(rover_vote(&wtn, &ids).len() <= wtn.slots.len());
        }

        /// Fusing N identical hypotheses reproduces the input exactly.
        #[test]
        fn unanimous_fusion_is_identity(
            tokens in prop::collection::vec(prop::sample::select(vec!["甲", "乙", "丙"]), 0..8),
            n in 1usize..5,
        ) {
            let hyps: Vec<Hypothesis> = (0..n)
                .map(|i| Hypothesis {
                    system_id: format!("sys{i}"),
                    tokens: tokens.iter().map(|s| s.to_string()).collect(),
                })
                .collect();
            let ids: Vec<String> = hyps.iter().map(|h| h.system_id.clone()).collect();
            let wtn = build_wtn(&hyps, &ids).unwrap();
            let voted: Vec<String> = rover_vote(&wtn, &ids);
            let expected: Vec<String> = tokens.iter().map(|s| s.to_string()).collect();
            prop_assert_eq!(voted, expected);
        }
    }
}
