//! Punctuation restoration by merging acoustic pauses with text-model
//! candidates.
//!
//! The text model alone misplaces marks relative to actual speech pauses, so
//! marks are gated by pause class: a short pause admits a comma (whatever
//! the model proposed), a long pause takes the model's terminal mark (or a
//! period when the model is silent or proposed a comma), and positions
//! without a pause never receive a mark.

use serde::{Deserialize, Serialize};

use crate::config::PauseSettings;
use crate::error::PipelineError;
use crate::fusion::detokenize;
use crate::manifest::UtteranceRecord;

/// One aligned token with its timing and the gap to the next token (for the
/// last token: the gap to the end of the utterance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedWord {
    pub token: String,
    pub start_s: f64,
    pub end_s: f64,
    pub pause_after_s: f64,
}

/// Build [`AlignedWord`]s from aligner spans (token, start, end), measured
/// relative to the clip start. Overlapping spans clamp to a zero pause.
pub fn words_from_spans(
    spans: &[(String, f64, f64)],
    clip_duration_s: f64,
) -> Result<Vec<AlignedWord>, PipelineError> {
    for (token, start, end) in spans {
        if token.is_empty() || !(start <= end) {
            return Err(PipelineError::Invalid(format!(
                "bad aligned span {token:?} [{start}, {end}]"
            )));
        }
    }
    Ok(spans
        .iter()
        .enumerate()
        .map(|(i, (token, start, end))| {
            let next_start = spans.get(i + 1).map_or(clip_duration_s, |s| s.1);
            AlignedWord {
                token: token.clone(),
                start_s: *start,
                end_s: *end,
                pause_after_s: (next_start - end).max(0.0),
            }
        })
        .collect())
}

/// Pause class of the gap after each token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PauseClass {
    None,
    Short,
    Long,
}

/// Punctuation mark vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mark {
    Comma,
    Period,
    Question,
    Exclamation,
}

impl Mark {
    /// The full-width character written into transcripts.
    pub fn full_width(self) -> char {
        match self {
            Mark::Comma => '，',
            Mark::Period => '。',
            Mark::Question => '？',
            Mark::Exclamation => '！',
        }
    }
}

/// Where punctuation candidates come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    #[default]
    TextModel,
}

/// A text-model punctuation proposal: a mark after `position` tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PunctuationCandidate {
    /// Number of tokens before the mark; position p means "after token
    /// p-1", so valid positions are 1..=len.
    pub position: usize,
    pub mark: Mark,
    #[serde(default)]
    pub source: CandidateSource,
}

/// Classify the gap after each token. The final gap is always long: every
/// utterance ends with a terminal mark.
pub fn classify_pauses(words: &[AlignedWord], settings: &PauseSettings) -> Vec<PauseClass> {
    let n = words.len();
    words
        .iter()
        .enumerate()
        .map(|(i, w)| {
            if i + 1 == n {
                PauseClass::Long
            } else if w.pause_after_s >= settings.long_s {
                PauseClass::Long
            } else if w.pause_after_s >= settings.short_s {
                PauseClass::Short
            } else {
                PauseClass::None
            }
        })
        .collect()
}

/// Merge tokens, pause classes, and text-model candidates into a punctuated
/// string (full-width marks).
pub fn merge_punctuation(
    words: &[AlignedWord],
    classes: &[PauseClass],
    candidates: &[PunctuationCandidate],
) -> Result<String, PipelineError> {
    if classes.len() != words.len() {
        return Err(PipelineError::Invalid(format!(
            "{} pause classes for {} words",
            classes.len(),
            words.len()
        )));
    }
    for c in candidates {
        if c.position == 0 || c.position > words.len() {
            return Err(PipelineError::Invalid(format!(
                "candidate position {} outside 1..={}",
                c.position,
                words.len()
            )));
        }
    }
    let candidate_at = |position: usize| -> Option<Mark> {
        candidates
            .iter()
            .find(|c| c.position == position)
            .map(|c| c.mark)
    };
    let mut out = String::new();
    for (i, word) in words.iter().enumerate() {
        out.push_str(&word.token);
        let mark = match classes[i] {
            PauseClass::None => None,
            PauseClass::Short => candidate_at(i + 1).map(|_| Mark::Comma),
            PauseClass::Long => Some(match candidate_at(i + 1) {
                Some(Mark::Question) => Mark::Question,
                Some(Mark::Exclamation) => Mark::Exclamation,
                _ => Mark::Period,
            }),
        };
        if let Some(mark) = mark {
            out.push(mark.full_width());
        }
    }
    Ok(out)
}

/// Remove the four full-width marks this module inserts.
pub fn strip_punctuation(text: &str) -> String {
    text.chars()
        .filter(|c| !matches!(c, '，' | '。' | '？' | '！'))
        .collect()
}

/// Attach `punctuated_transcription` to a record from aligner output and
/// text-model candidates.
///
/// Fails (leaving the record untouched) when the aligned tokens do not
/// concatenate to the record's transcription or when stripping the result
/// would not reproduce it — both signal a bad alignment rather than a bad
/// record.
pub fn punctuate_record(
    record: &mut UtteranceRecord,
    words: &[AlignedWord],
    candidates: &[PunctuationCandidate],
    settings: &PauseSettings,
) -> Result<(), PipelineError> {
    if record.transcription.is_empty() && words.is_empty() {
        record.punctuated_transcription = Some(String::new());
        return Ok(());
    }
    let tokens: Vec<&str> = words.iter().map(|w| w.token.as_str()).collect();
    if detokenize(&tokens) != record.transcription {
        return Err(PipelineError::record(
            &record.utterance_id,
            "punctuated_transcription",
            "aligned tokens do not concatenate to the transcription",
        ));
    }
    let classes = classify_pauses(words, settings);
    let punctuated = merge_punctuation(words, &classes, candidates)?;
    if strip_punctuation(&punctuated) != record.transcription {
        return Err(PipelineError::record(
            &record.utterance_id,
            "punctuated_transcription",
            "stripping marks does not reproduce the transcription",
        ));
    }
    record.punctuated_transcription = Some(punctuated);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::Domain;
    use proptest::prelude::*;

    /// Words with the given inter-word gaps (n words => n-1 gaps), 0.2 s per
    /// word; the final pause is whatever remains of the clip.
    fn words_with_gaps(tokens: &[&str], gaps: &[f64], clip_end: f64) -> Vec<AlignedWord> {
        assert_eq!(gaps.len() + 1, tokens.len());
        let mut spans = Vec::new();
        // Word duration of 0.25 keeps boundary-valued gaps (0.25, 0.5) exact
        // in floating point across the running-time accumulation.
        let mut t = 0.0;
        for (i, token) in tokens.iter().enumerate() {
            spans.push((token.to_string(), t, t + 0.25));
            t += 0.25;
            if i < gaps.len() {
                t += gaps[i];
            }
        }
        words_from_spans(&spans, clip_end).unwrap()
    }

    fn candidate(position: usize, mark: Mark) -> PunctuationCandidate {
        PunctuationCandidate { position, mark, source: CandidateSource::TextModel }
    }

    #[test]
    fn pause_classes_follow_thresholds() {
        let words = words_with_gaps(&["一", "二", "三", "四"], &[0.30, 0.60, 0.10], 10.0);
        let classes = classify_pauses(&words, &PauseSettings::default());
        assert_eq!(
            classes,
            [PauseClass::Short, PauseClass::Long, PauseClass::None, PauseClass::Long]
        );
    }

    #[test]
    fn threshold_boundaries_are_inclusive() {
        let words = words_with_gaps(&["一", "二", "三"], &[0.25, 0.5], 10.0);
        let classes = classify_pauses(&words, &PauseSettings::default());
        assert_eq!(classes[0], PauseClass::Short);
        assert_eq!(classes[1], PauseClass::Long);
    }

    #[test]
    fn long_pause_takes_the_model_mark() {
        let words = words_with_gaps(&["吃", "吗"], &[0.7], 2.0);
        let classes = classify_pauses(&words, &PauseSettings::default());
        let out = merge_punctuation(&words, &classes, &[candidate(1, Mark::Question)]).unwrap();
        assert_eq!(out, "吃？吗。");
    }

    #[test]
    fn short_pause_coerces_any_mark_to_comma() {
        let words = words_with_gaps(&["今", "天"], &[0.3], 2.0);
        let classes = classify_pauses(&words, &PauseSettings::default());
        let out = merge_punctuation(&words, &classes, &[candidate(1, Mark::Period)]).unwrap();
        assert_eq!(out, "今，天。");
    }

    #[test]
    fn no_pause_suppresses_candidates() {
        let words = words_with_gaps(&["今", "天"], &[0.1], 2.0);
        let classes = classify_pauses(&words, &PauseSettings::default());
        let out = merge_punctuation(&words, &classes, &[candidate(1, Mark::Comma)]).unwrap();
        assert_eq!(out, "今天。");
    }

    #[test]
    fn long_pause_without_candidate_defaults_to_period() {
        let words = words_with_gaps(&["走", "嘛"], &[0.8], 2.0);
        let classes = classify_pauses(&words, &PauseSettings::default());
        let out = merge_punctuation(&words, &classes, &[]).unwrap();
        assert_eq!(out, "走。嘛。");
    }

    #[test]
    fn long_pause_comma_candidate_upgrades_to_period() {
        let words = words_with_gaps(&["走", "嘛"], &[0.8], 2.0);
        let classes = classify_pauses(&words, &PauseSettings::default());
        let out = merge_punctuation(&words, &classes, &[candidate(1, Mark::Comma)]).unwrap();
        assert_eq!(out, "走。嘛。");
    }

    #[test]
    fn out_of_range_candidate_is_an_error() {
        let words = words_with_gaps(&["走"], &[], 1.0);
        let classes = classify_pauses(&words, &PauseSettings::default());
        assert!(merge_punctuation(&words, &classes, &[candidate(2, Mark::Comma)]).is_err());
        assert!(merge_punctuation(&words, &classes, &[candidate(0, Mark::Comma)]).is_err());
    }

    fn record_with(transcription: &str) -> UtteranceRecord {
        let mut r = UtteranceRecord::new("u", "s", "s.wav", 0.0, 6.0, Domain::ShortVideo, 20.0);
        r.transcription = transcription.into();
        r
    }

    #[test]
    fn single_word_gets_final_period() {
        let mut record = record_with("要");
        let words = words_with_gaps(&["要"], &[], 6.0);
        punctuate_record(&mut record, &words, &[], &PauseSettings::default()).unwrap();
        assert_eq!(record.punctuated_transcription.as_deref(), Some("要。"));
    }

    #[test]
    fn worked_five_word_example() {
        // Gaps {0.1, 0.3, 0.1, 0.7} with candidates after tokens 2 and 4:
        // comma at the short pause, mark at the long pause, plus final.
        let mut record = record_with("一二三四五");
        let words = words_with_gaps(&["一", "二", "三", "四", "五"], &[0.1, 0.3, 0.1, 0.7], 10.0);
        let cands = [candidate(2, Mark::Comma), candidate(4, Mark::Question)];
        punctuate_record(&mut record, &words, &cands, &PauseSettings::default()).unwrap();
        assert_eq!(
            record.punctuated_transcription.as_deref(),
            Some("一二，三四？五。")
        );
    }

    #[test]
    fn mismatched_alignment_is_flagged() {
        let mut record = record_with("要得");
        let words = words_with_gaps(&["不", "得"], &[0.1], 6.0);
        let err = punctuate_record(&mut record, &words, &[], &PauseSettings::default())
            .unwrap_err()
            .to_string();
        assert!(err.contains("concatenate"), "{err}");
        assert_eq!(record.punctuated_transcription, None);
    }

    #[test]
    fn empty_transcription_stays_empty() {
        let mut record = record_with("");
        punctuate_record(&mut record, &[], &[], &PauseSettings::default()).unwrap();
        assert_eq!(record.punctuated_transcription.as_deref(), Some(""));
    }

    proptest! {
        /// Strip identity, pause gating, and mark placement over random gap
        /// vectors and candidate sets.
        #[test]
        fn random_gaps_respect_gating_and_identity(
            gaps in prop::collection::vec(0.0f64..1.0, 0..9),
            positions in prop::collection::vec((1usize..10, 0usize..4), 0..6),
        ) {
            let tokens: Vec<String> = (0..gaps.len() + 1).map(|i| format!("t{i}")).collect();
            let token_refs: Vec<&str> = tokens.iter().map(|s| s.as_str()).collect();
            let words = words_with_gaps(&token_refs, &gaps, 60.0);
            let settings = PauseSettings::default();
            let classes = classify_pauses(&words, &settings);
            let candidates: Vec<PunctuationCandidate> = positions
                .iter()
                .filter(|(p, _)| *p <= words.len())
                .map(|&(p, m)| candidate(p, [Mark::Comma, Mark::Period, Mark::Question, Mark::Exclamation][m]))
                .collect();
            let out = merge_punctuation(&words, &classes, &candidates).unwrap();

            prop_assert_eq!(strip_punctuation(&out), detokenize(&token_refs));

            // Every inserted mark must sit at a gap >= short threshold;
            // every non-final terminal mark at a gap >= long threshold.
            let mut rest = out.as_str();
            for (i, word) in words.iter().enumerate() {
                prop_assert!(rest.starts_with(word.token.as_str()));
                rest = &rest[word.token.len()..];
                if let Some(c) = rest.chars().next() {
                    match c {
                        '，' => {
                            prop_assert!(word.pause_after_s >= settings.short_s);
                            rest = &rest[c.len_utf8()..];
                        }
                        '。' | '？' | '！' => {
                            if i + 1 < words.len() {
                                prop_assert!(word.pause_after_s >= settings.long_s);
                            }
                            rest = &rest[c.len_utf8()..];
                        }
                        _ => {}
                    }
                }
            }
            prop_assert!(rest.is_empty());
        }

        /// Raising the short threshold never increases the mark count.
        #[test]
        fn mark_count_is_monotone_in_short_threshold(
            gaps in prop::collection::vec(0.0f64..0.6, 1..9),
        ) {
            let tokens: Vec<String> = (0..gaps.len() + 1).map(|i| format!("t{i}")).collect();
            let token_refs: Vec<&str> = tokens.iter().map(|s| s.as_str()).collect();
            let words = words_with_gaps(&token_refs, &gaps, 60.0);
            let candidates: Vec<PunctuationCandidate> =
                (1..=words.len()).map(|p| candidate(p, Mark::Comma)).collect();
            let mut previous = usize::MAX;
            for short in [0.05, 0.15, 0.25, 0.35, 0.45] {
                let settings = PauseSettings { short_s: short, long_s: 0.5 };
                let classes = classify_pauses(&words, &settings);
                let out = merge_punctuation(&words, &classes, &candidates).unwrap();
                let marks = out.chars().filter(|c| matches!(c, '，' | '。' | '？' | '！')).count();
                prop_assert!(marks <= previous);
                previous = marks;
            }
        }
    }
}
