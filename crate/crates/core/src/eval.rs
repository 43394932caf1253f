//! Character-error-rate evaluation: text normalization, per-pair edit
//! counts, and split-grouped report tables.
//!
//! Scoring runs on the same tokenizer as hypothesis fusion (one token per
//! Han character, one per Latin/digit run) so that loanwords count as one
//! error, not one per letter. Rates are reported unclamped and may exceed
//! 100% for insertion-heavy hypotheses.

use std::collections::BTreeMap;
use std::path::Path;

use icu_normalizer::ComposingNormalizerBorrowed;
use icu_properties::props::{GeneralCategory, GeneralCategoryGroup};
use icu_properties::CodePointMapData;
use serde::{Deserialize, Serialize};

use crate::error::PipelineError;
use crate::fusion::{align_pair, tokenize};
use crate::manifest::UtteranceRecord;

/// Canonicalize text before scoring: compatibility-compose (full-width
/// alphanumerics become half-width), drop punctuation and whitespace, and
/// lower-case.
pub fn normalize_text(s: &str) -> String {
    let composed = ComposingNormalizerBorrowed::new_nfkc().normalize(s);
    let category = CodePointMapData::<GeneralCategory>::new();
    composed
        .chars()
        .filter(|&c| {
            !c.is_whitespace() && !GeneralCategoryGroup::Punctuation.contains(category.get(c))
        })
        .flat_map(char::to_lowercase)
        .collect()
}

/// Edit counts from scoring one reference/hypothesis pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CerCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    /// Reference length in scoring tokens, after normalization.
    pub ref_tokens: usize,
}

impl CerCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// Error rate as a fraction of the reference length. Unclamped.
    pub fn fraction(&self) -> f64 {
        self.errors() as f64 / self.ref_tokens as f64
    }

    pub fn percent(&self) -> f64 {
        100.0 * self.fraction()
    }
}

/// Score one pair. Both sides are normalized and tokenized here; the
/// reference must be non-empty after normalization.
pub fn cer(reference: &str, hypothesis: &str) -> Result<CerCounts, PipelineError> {
    let ref_tokens = tokenize(&normalize_text(reference));
    if ref_tokens.is_empty() {
        return Err(PipelineError::Invalid(
            "reference is empty after normalization".into(),
        ));
    }
    let hyp_tokens = tokenize(&normalize_text(hypothesis));
    let alignment = align_pair(&ref_tokens, &hyp_tokens);
    let (substitutions, deletions, insertions) = alignment.edit_counts(&ref_tokens, &hyp_tokens);
    Ok(CerCounts {
        substitutions,
        deletions,
        insertions,
        ref_tokens: ref_tokens.len(),
    })
}

/// Split assignment file: the declared row order and the per-utterance map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFile {
    /// Row order for the report; every mapped split must appear here.
    pub order: Vec<String>,
    /// utterance_id -> split name.
    pub map: BTreeMap<String, String>,
}

impl SplitFile {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let raw = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let split: SplitFile = serde_json::from_str(&raw).map_err(|e| {
            PipelineError::Invalid(format!("bad split file {}: {e}", path.display()))
        })?;
        for (id, name) in &split.map {
            if !split.order.iter().any(|s| s == name) {
                return Err(PipelineError::Invalid(format!(
                    "utterance {id} mapped to unknown split {name:?}"
                )));
            }
        }
        Ok(split)
    }
}

/// One scored reference/hypothesis pair, tagged with its split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPair {
    pub utterance_id: String,
    pub split: String,
    pub reference: String,
    pub hypothesis: String,
}

/// Join reference and hypothesis manifests on utterance id and tag each
/// pair with its split. Every reference utterance must have a hypothesis
/// and a split assignment; extra hypothesis utterances are ignored.
pub fn join_manifests(
    reference: &[UtteranceRecord],
    hypothesis: &[UtteranceRecord],
    splits: &SplitFile,
) -> Result<Vec<EvalPair>, PipelineError> {
    let by_id: BTreeMap<&str, &UtteranceRecord> = hypothesis
        .iter()
        .map(|r| (r.utterance_id.as_str(), r))
        .collect();
    reference
        .iter()
        .map(|r| {
            let hyp = by_id.get(r.utterance_id.as_str()).ok_or_else(|| {
                PipelineError::Missing {
                    utterance_id: r.utterance_id.clone(),
                    what: "hypothesis transcription".into(),
                }
            })?;
            let split = splits.map.get(&r.utterance_id).ok_or_else(|| {
                PipelineError::Missing {
                    utterance_id: r.utterance_id.clone(),
                    what: "split assignment".into(),
                }
            })?;
            Ok(EvalPair {
                utterance_id: r.utterance_id.clone(),
                split: split.clone(),
                reference: r.transcription.clone(),
                hypothesis: hyp.transcription.clone(),
            })
        })
        .collect()
}

/// One report row: a split (or the Total union row) with summed counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRow {
    pub split: String,
    pub utterances: usize,
    pub ref_tokens: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    /// `None` for an empty split: the rate is undefined, rendered as "—".
    pub cer_percent: Option<f64>,
}

impl SplitRow {
    fn empty(split: &str) -> Self {
        SplitRow {
            split: split.to_string(),
            utterances: 0,
            ref_tokens: 0,
            substitutions: 0,
            deletions: 0,
            insertions: 0,
            cer_percent: None,
        }
    }

    fn add(&mut self, counts: &CerCounts) {
        self.utterances += 1;
        self.ref_tokens += counts.ref_tokens;
        self.substitutions += counts.substitutions;
        self.deletions += counts.deletions;
        self.insertions += counts.insertions;
    }

    fn finish(&mut self) {
        if self.ref_tokens > 0 {
            let errors = self.substitutions + self.deletions + self.insertions;
            self.cer_percent = Some(100.0 * errors as f64 / self.ref_tokens as f64);
        }
    }
}

/// Aggregate report: one row per declared split (in declared order), a
/// Total row over the union, and the token-weighted average rate (equal to
/// the Total row's rate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<SplitRow>,
    pub total: SplitRow,
    pub weighted_average_cer_percent: Option<f64>,
}

/// Score all pairs and aggregate by split. Pairs carrying a split name not
/// in `split_order` are rejected; empty declared splits get a zero row.
pub fn report(pairs: &[EvalPair], split_order: &[String]) -> Result<EvalReport, PipelineError> {
    let mut rows: Vec<SplitRow> = split_order.iter().map(|s| SplitRow::empty(s)).collect();
    let mut total = SplitRow::empty("Total");
    for pair in pairs {
        let row = rows
            .iter_mut()
            .find(|r| r.split == pair.split)
            .ok_or_else(|| {
                PipelineError::Invalid(format!(
                    "utterance {} tagged with unknown split {:?}",
                    pair.utterance_id, pair.split
                ))
            })?;
        let counts = cer(&pair.reference, &pair.hypothesis).map_err(|e| {
            PipelineError::Invalid(format!("utterance {}: {e}", pair.utterance_id))
        })?;
        row.add(&counts);
        total.add(&counts);
    }
    for row in &mut rows {
        row.finish();
    }
    total.finish();
    let weighted_average_cer_percent = total.cer_percent;
    Ok(EvalReport {
        rows,
        total,
        weighted_average_cer_percent,
    })
}

/// Render the report as an aligned plain-text table, one row per split plus
/// the Total row. Undefined rates print as "—".
pub fn render_table(report: &EvalReport) -> String {
    let headers = ["Split", "Utts", "RefTokens", "S", "D", "I", "CER%"];
    let mut cells: Vec<[String; 7]> = Vec::new();
    for row in report.rows.iter().chain(std::iter::once(&report.total)) {
        cells.push([
            row.split.clone(),
            row.utterances.to_string(),
            row.ref_tokens.to_string(),
            row.substitutions.to_string(),
            row.deletions.to_string(),
            row.insertions.to_string(),
            row.cer_percent
                .map_or_else(|| "—".to_string(), |p| format!("{p:.2}")),
        ]);
    }
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let render_row = |row: &[String]| -> String {
        let mut line = String::new();
        for (i, (cell, width)) in row.iter().zip(&widths).enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            let pad = width - cell.chars().count();
            if i == 0 {
                // Split names left-aligned, numbers right-aligned.
                line.push_str(cell);
                line.push_str(&" ".repeat(pad));
            } else {
                line.push_str(&" ".repeat(pad));
                line.push_str(cell);
            }
        }
        line
    };
    let header_cells: Vec<String> = headers.iter().map(|h| h.to_string()).collect();
    let mut out = render_row(&header_cells);
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in &cells {
        out.push_str(&render_row(row.as_slice()));
        out.push('\n');
    }
    out
}
