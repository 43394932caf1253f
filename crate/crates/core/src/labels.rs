//! Paralinguistic labels: age-stage mapping, emotion vote fusion, and
//! applying classifier responses to records.

use std::collections::HashMap;

use crate::error::PipelineError;
use crate::manifest::{AgeStage, Emotion, Gender, UtteranceRecord};

/// Map an age in years onto the coarse stage vocabulary:
/// children [0,13), teenager [13,20), young [20,40), middle_aged [40,60),
/// old [60,120].
pub fn map_age_to_stage(age_years: f64) -> Result<AgeStage, PipelineError> {
    if !(0.0..=120.0).contains(&age_years) {
        return Err(PipelineError::Invalid(format!(
            "age {age_years} outside [0, 120]"
        )));
    }
    Ok(if age_years < 13.0 {
        AgeStage::Children
    } else if age_years < 20.0 {
        AgeStage::Teenager
    } else if age_years < 40.0 {
        AgeStage::Young
    } else if age_years < 60.0 {
        AgeStage::MiddleAged
    } else {
        AgeStage::Old
    })
}

/// Fuse several emotion predictions: the unique most-frequent label wins; a
/// tie returns `neutral` when neutral is among the tied labels, otherwise
/// `unknown`. `unknown` is not a valid prediction.
pub fn vote_emotion(predictions: &[Emotion]) -> Result<Emotion, PipelineError> {
    if predictions.is_empty() {
        return Err(PipelineError::Invalid(
            "emotion vote needs at least one prediction".into(),
        ));
    }
    if predictions.contains(&Emotion::Unknown) {
        return Err(PipelineError::Invalid(
            "unknown is not a votable emotion label".into(),
        ));
    }
    let mut counts: Vec<(Emotion, usize)> = Vec::new();
    for &p in predictions {
        match counts.iter_mut().find(|(e, _)| *e == p) {
            Some((_, c)) => *c += 1,
            None => counts.push((p, 1)),
        }
    }
    let top = counts.iter().map(|&(_, c)| c).max().expect("non-empty");
    let tied: Vec<Emotion> = counts
        .iter()
        .filter(|&&(_, c)| c == top)
        .map(|&(e, _)| e)
        .collect();
    Ok(match tied.as_slice() {
        [winner] => *winner,
        _ if tied.contains(&Emotion::Neutral) => Emotion::Neutral,
        _ => Emotion::Unknown,
    })
}

/// Classifier responses for a batch, keyed by utterance id. Missing entries
/// simply leave the corresponding field `unknown`.
#[derive(Debug, Clone, Default)]
pub struct LabelResponses {
    pub gender: HashMap<String, Gender>,
    pub age_years: HashMap<String, f64>,
    pub emotions: HashMap<String, Vec<Emotion>>,
}

/// Apply classifier responses to records in place. Never drops a record and
/// never fails: unusable responses (age out of range, empty or unknown-only
/// emotion votes) leave the field `unknown`.
pub fn label_records(records: &mut [UtteranceRecord], responses: &LabelResponses) {
    for record in records.iter_mut() {
        let id = &record.utterance_id;
        if let Some(&g) = responses.gender.get(id) {
            record.gender = g;
        }
        if let Some(&age) = responses.age_years.get(id) {
            if let Ok(stage) = map_age_to_stage(age) {
                record.age_stage = stage;
            }
        }
        if let Some(predictions) = responses.emotions.get(id) {
            let votable: Vec<Emotion> = predictions
                .iter()
                .copied()
                .filter(|&e| e != Emotion::Unknown)
                .collect();
            if !votable.is_empty() {
                if let Ok(emotion) = vote_emotion(&votable) {
                    record.emotion = emotion;
                }
            }
        }
    }
}
