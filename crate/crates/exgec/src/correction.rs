//! Edit-based correction scoring: hypothesis/reference edit matching and
//! P/R/F-beta aggregation.
//!
//! A hypothesis edit counts as a true positive only when some unmatched
//! reference edit has the identical source span and replacement text.
//! Reference target offsets are ignored by the criterion since they depend
//! on the other edits in the set.

use crate::extract::EditSet;
use crate::model::Edit;
use thiserror::Error;

/// Default F-beta weighting: precision twice as important as recall.
pub const DEFAULT_BETA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorrectionError {
    #[error("hypothesis and reference annotate different sources: {hyp:?} vs {reference:?}")]
    SourceMismatch { hyp: String, reference: String },
    #[error("corpus lists differ in length: {hyps} hypothesis vs {refs} reference")]
    PairCountMismatch { hyps: usize, refs: usize },
    #[error("empty corpus")]
    EmptyCorpus,
}

/// Outcome of matching one hypothesis edit set against one reference set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub matched_pairs: Vec<(Edit, Edit)>,
}

/// Precision, recall, and F-beta, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PrfScore {
    pub precision: f64,
    pub recall: f64,
    pub f_beta: f64,
    pub beta: f64,
}

/// Match hypothesis edits against reference edits, greedy left-to-right.
/// Each reference edit matches at most once.
pub fn match_edits(hyp: &EditSet, reference: &EditSet) -> Result<MatchResult, CorrectionError> {
    if hyp.source != reference.source {
        return Err(CorrectionError::SourceMismatch {
            hyp: hyp.source.clone(),
            reference: reference.source.clone(),
        });
    }

    let mut used = vec![false; reference.edits.len()];
    let mut matched_pairs = Vec::new();
    for h in &hyp.edits {
        let hit = reference.edits.iter().enumerate().find(|(i, r)| {
            !used[*i]
                && r.src_start == h.src_start
                && r.src_end == h.src_end
                && r.tgt_text == h.tgt_text
        });
        if let Some((i, r)) = hit {
            used[i] = true;
            matched_pairs.push((h.clone(), r.clone()));
        }
    }

    let tp = matched_pairs.len();
    Ok(MatchResult {
        true_positives: tp,
        false_positives: hyp.edits.len() - tp,
        false_negatives: reference.edits.len() - tp,
        matched_pairs,
    })
}

/// P/R/F-beta from a match result.
///
/// Degenerate denominators use fixed conventions: an empty hypothesis set
/// has precision 1 when the reference is also empty, else 0 (and
/// symmetrically for recall); F is 1 only when both sets are empty.
pub fn prf(m: &MatchResult, beta: f64) -> PrfScore {
    prf_from_counts(m.true_positives, m.false_positives, m.false_negatives, beta)
}

pub(crate) fn prf_from_counts(tp: usize, fp: usize, fn_: usize, beta: f64) -> PrfScore {
    let precision = if tp + fp == 0 {
        if fn_ == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        if fp == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f_beta = if tp + fp == 0 && tp + fn_ == 0 {
        1.0
    } else {
        let b2 = beta * beta;
        let denom = b2 * precision + recall;
        if denom > 0.0 {
            (1.0 + b2) * precision * recall / denom
        } else {
            0.0
        }
    };
    PrfScore { precision, recall, f_beta, beta }
}

/// Micro-aggregated corpus score: sum tp/fp/fn over all aligned pairs,
/// then compute P/R/F once.
pub fn corpus_prf(
    hyps: &[EditSet],
    refs: &[EditSet],
    beta: f64,
) -> Result<PrfScore, CorrectionError> {
    if hyps.len() != refs.len() {
        return Err(CorrectionError::PairCountMismatch { hyps: hyps.len(), refs: refs.len() });
    }
    if hyps.is_empty() {
        return Err(CorrectionError::EmptyCorpus);
    }
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    for (h, r) in hyps.iter().zip(refs) {
        let m = match_edits(h, r)?;
        tp += m.true_positives;
        fp += m.false_positives;
        fn_ += m.false_negatives;
    }
    Ok(prf_from_counts(tp, fp, fn_, beta))
}
