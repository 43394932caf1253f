//! Speaker embeddings, multi-speaker filtering, and agglomerative
//! clustering so every utterance from one person shares a speaker id.

use std::collections::HashMap;

use crate::error::PipelineError;
use crate::manifest::UtteranceRecord;
use crate::scalar::{real, Real};

/// One utterance's speaker embedding, unit-normalized at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerEmbedding<T: Real> {
    pub utterance_id: String,
    pub vector: Vec<T>,
    /// Diarization verdict: more than one speaker audible in the clip.
    pub multi_speaker: bool,
}

impl<T: Real> SpeakerEmbedding<T> {
    /// Normalize and wrap a raw embedding vector.
    pub fn new(
        utterance_id: impl Into<String>,
        vector: Vec<T>,
        multi_speaker: bool,
    ) -> Result<Self, PipelineError> {
        let utterance_id = utterance_id.into();
        let norm = vector
            .iter()
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt();
        if vector.is_empty() || !(norm > T::zero()) {
            return Err(PipelineError::record(
                utterance_id,
                "embedding",
                "vector must be non-empty with positive norm",
            ));
        }
        Ok(SpeakerEmbedding {
            utterance_id,
            vector: vector.into_iter().map(|v| v / norm).collect(),
            multi_speaker,
        })
    }
}

/// Cosine distance between two unit vectors: `1 - a·b`, in [0, 2].
pub fn cosine_distance<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let dot = a
        .iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + x * y);
    T::one() - dot
}

/// Drop records whose diarization flag says multiple speakers; returns
/// (kept, removed) preserving input order.
pub fn filter_single_speaker(
    records: Vec<UtteranceRecord>,
    flags: &HashMap<String, bool>,
) -> Result<(Vec<UtteranceRecord>, Vec<UtteranceRecord>), PipelineError> {
    let mut kept = Vec::with_capacity(records.len());
    let mut removed = Vec::new();
    for record in records {
        let multi = *flags
            .get(&record.utterance_id)
            .ok_or_else(|| PipelineError::Missing {
                utterance_id: record.utterance_id.clone(),
                what: "multi_speaker flag".into(),
            })?;
        if multi {
            removed.push(record);
        } else {
            kept.push(record);
        }
    }
    Ok((kept, removed))
}

/// Average-linkage agglomerative clustering under cosine distance.
///
/// Merging continues while the closest pair of clusters is within
/// `distance_threshold`; equal-distance merges prefer the pair whose member
/// utterance ids compare smallest, which (together with summing pair
/// distances in id order) makes the partition independent of input order.
/// Labels are dense integers ordered by first appearance in the input.
pub fn cluster_embeddings<T: Real>(
    embeddings: &[SpeakerEmbedding<T>],
    distance_threshold: f64,
) -> Result<HashMap<String, usize>, PipelineError> {
    if embeddings.is_empty() {
        return Err(PipelineError::Invalid(
            "clustering needs at least one embedding".into(),
        ));
    }
    let dim = embeddings[0].vector.len();
    for e in embeddings {
        if e.vector.len() != dim {
            return Err(PipelineError::record(
                &e.utterance_id,
                "embedding",
                format!("dimension {} differs from {}", e.vector.len(), dim),
            ));
        }
    }
    let threshold = real::<T>(distance_threshold);

    // Work on indices sorted by utterance id so that distance sums run in a
    // canonical order no matter how the input was shuffled.
    let mut order: Vec<usize> = (0..embeddings.len()).collect();
    order.sort_by(|&a, &b| embeddings[a].utterance_id.cmp(&embeddings[b].utterance_id));

    let n = embeddings.len();
    let mut pairwise = vec![T::zero(); n * n];
    for a in 0..n {
        for b in (a + 1)..n {
            let (i, j) = (order[a], order[b]);
            let d = cosine_distance(&embeddings[i].vector, &embeddings[j].vector);
            pairwise[i * n + j] = d;
            pairwise[j * n + i] = d;
        }
    }

    // Clusters hold original indices, kept sorted by utterance id.
    let mut clusters: Vec<Vec<usize>> = order.iter().map(|&i| vec![i]).collect();
    let id_of = |i: usize| embeddings[i].utterance_id.as_str();

    loop {
        if clusters.len() < 2 {
            break;
        }
        // (distance, (min id, max id of the pair's min ids), cluster indexes)
        let mut best: Option<(T, (&str, &str), (usize, usize))> = None;
        for a in 0..clusters.len() {
            for b in (a + 1)..clusters.len() {
                let mut sum = T::zero();
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        sum = sum + pairwise[i * n + j];
                    }
                }
                let d = sum / real::<T>((clusters[a].len() * clusters[b].len()) as f64);
                let min_a = id_of(clusters[a][0]);
                let min_b = id_of(clusters[b][0]);
                let key = if min_a <= min_b { (min_a, min_b) } else { (min_b, min_a) };
                let better = match &best {
                    None => true,
                    Some((bd, bkey, _)) => match d.partial_cmp(bd).expect("finite distances") {
                        std::cmp::Ordering::Less => true,
                        std::cmp::Ordering::Greater => false,
                        std::cmp::Ordering::Equal => key < *bkey,
                    },
                };
                if better {
                    best = Some((d, key, (a, b)));
                }
            }
        }
        let (d, _, (a, b)) = best.expect("at least one pair");
        if d > threshold {
            break;
        }
        let merged = clusters.remove(b);
        clusters[a].extend(merged);
        clusters[a].sort_by(|&x, &y| id_of(x).cmp(id_of(y)));
    }

    // Dense labels by first appearance in the original input order.
    clusters.sort_by_key(|members| members.iter().copied().min().expect("non-empty cluster"));
    let mut labels = HashMap::with_capacity(n);
    for (label, members) in clusters.iter().enumerate() {
        for &i in members {
            labels.insert(embeddings[i].utterance_id.clone(), label);
        }
    }
    Ok(labels)
}

/// Stamp `speaker_id = "spk{source_id}_{cluster}"` onto every record.
pub fn assign_speaker_ids(
    records: &mut [UtteranceRecord],
    clusters: &HashMap<String, usize>,
) -> Result<(), PipelineError> {
    for record in records.iter_mut() {
        let label = clusters
            .get(&record.utterance_id)
            .ok_or_else(|| PipelineError::Missing {
                utterance_id: record.utterance_id.clone(),
                what: "cluster label".into(),
            })?;
        record.speaker_id = Some(format!("spk{}_{}", record.source_id, label));
    }
    Ok(())
}
