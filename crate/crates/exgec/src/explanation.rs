//! Explanation evaluation: hit/miss edit accounting, error-type accuracy
//! and macro-F1, severity MAE, and the description text metrics (BLEU,
//! METEOR, ROUGE), all computed only over hit edits.
//!
//! Tokens everywhere are Unicode code points: Chinese is character-centric
//! and code-point tokens need no segmenter, so results are reproducible
//! from the raw strings alone.

use crate::model::{Edit, EditWiseExplanation, Sample};
use crate::taxonomy;
use std::collections::{BTreeSet, HashMap};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExplanationError {
    #[error("hypothesis and reference annotate different sources: {hyp:?} vs {reference:?}")]
    SourceMismatch { hyp: String, reference: String },
    #[error("no hit pairs to score")]
    EmptyPairs,
    #[error("every hypothesis severity is outside [1, 5]")]
    AllInvalid,
    #[error("corpora do not line up: {0}")]
    CorpusMismatch(String),
}

/// Hit/miss accounting for one sample: which hypothesis edits overlap a
/// reference edit, paired one-to-one.
#[derive(Debug, Clone, PartialEq)]
pub struct HitMissReport {
    pub hit_rate: f64,
    pub miss_rate: f64,
    pub hit_pairs: Vec<(EditWiseExplanation, EditWiseExplanation)>,
    pub hyp_edit_count: usize,
    pub ref_edit_count: usize,
}

impl HitMissReport {
    pub fn hit_count(&self) -> usize {
        self.hit_pairs.len()
    }

    pub fn miss_count(&self) -> usize {
        self.ref_edit_count - self.hit_pairs.len()
    }
}

/// Scores over hit pairs: error-type metrics, severity deviation, and
/// description text metrics.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ExplanationScores {
    pub type_accuracy: f64,
    pub type_macro_f1: f64,
    pub severity_mae: f64,
    pub invalid_severity_count: usize,
    pub bleu: f64,
    pub meteor: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
}

/// Corpus-level explanation evaluation. `scores` is absent when there are
/// no hit pairs to score.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CorpusExplanationReport {
    pub hit_rate: f64,
    pub miss_rate: f64,
    pub hit_count: usize,
    pub miss_count: usize,
    pub hyp_edit_count: usize,
    pub ref_edit_count: usize,
    pub scores: Option<ExplanationScores>,
}

/// True when the two edits overlap on the source side. Zero-width
/// (insertion) spans count as points and overlap a span whose closed
/// interval contains the insertion point.
pub fn spans_overlap(a: &Edit, b: &Edit) -> bool {
    let a_empty = a.src_start == a.src_end;
    let b_empty = b.src_start == b.src_end;
    match (a_empty, b_empty) {
        (true, true) => a.src_start == b.src_start,
        (true, false) => b.src_start <= a.src_start && a.src_start <= b.src_end,
        (false, true) => a.src_start <= b.src_start && b.src_start <= a.src_end,
        (false, false) => a.src_start.max(b.src_start) < a.src_end.min(b.src_end),
    }
}

/// Pair hypothesis edits with overlapping reference edits, greedy
/// left-to-right, each side used at most once. Only the resulting hit
/// pairs feed the explanation metrics.
pub fn hit_miss(hyp: &Sample, reference: &Sample) -> Result<HitMissReport, ExplanationError> {
    if hyp.source != reference.source {
        return Err(ExplanationError::SourceMismatch {
            hyp: hyp.source.clone(),
            reference: reference.source.clone(),
        });
    }
    let mut used = vec![false; reference.explanations.len()];
    let mut hit_pairs = Vec::new();
    for h in &hyp.explanations {
        let hit = reference
            .explanations
            .iter()
            .enumerate()
            .find(|(i, r)| !used[*i] && spans_overlap(&h.edit, &r.edit));
        if let Some((i, r)) = hit {
            used[i] = true;
            hit_pairs.push((h.clone(), r.clone()));
        }
    }
    let hits = hit_pairs.len();
    let hyp_edit_count = hyp.explanations.len();
    let ref_edit_count = reference.explanations.len();
    Ok(HitMissReport {
        hit_rate: hits as f64 / hyp_edit_count.max(1) as f64,
        miss_rate: (ref_edit_count - hits) as f64 / ref_edit_count.max(1) as f64,
        hit_pairs,
        hyp_edit_count,
        ref_edit_count,
    })
}

/// Hypothesis labels outside the catalog fall back to the sentinel so the
/// metrics stay well-defined under malformed model output.
pub fn normalize_minor(label: &str) -> &str {
    if taxonomy::is_known_minor(label) {
        label
    } else {
        taxonomy::OTHER
    }
}

/// Accuracy and macro-F1 over minor labels of hit pairs. Macro-F1 averages
/// per-class F1 over the union of labels on either side; a class with no
/// true positives scores 0.
pub fn type_metrics(
    pairs: &[(EditWiseExplanation, EditWiseExplanation)],
) -> Result<(f64, f64), ExplanationError> {
    let labels: Vec<(&str, &str)> = pairs
        .iter()
        .map(|(h, r)| (normalize_minor(&h.error_type_minor), r.error_type_minor.as_str()))
        .collect();
    type_metrics_from_labels(&labels)
}

pub(crate) fn type_metrics_from_labels(
    pairs: &[(&str, &str)],
) -> Result<(f64, f64), ExplanationError> {
    if pairs.is_empty() {
        return Err(ExplanationError::EmptyPairs);
    }
    let correct = pairs.iter().filter(|(h, r)| h == r).count();
    let accuracy = correct as f64 / pairs.len() as f64;

    let classes: BTreeSet<&str> = pairs.iter().flat_map(|(h, r)| [*h, *r]).collect();
    let mut f1_sum = 0.0;
    for class in &classes {
        let tp = pairs.iter().filter(|(h, r)| h == class && r == class).count();
        let fp = pairs.iter().filter(|(h, r)| h == class && r != class).count();
        let fn_ = pairs.iter().filter(|(h, r)| h != class && r == class).count();
        if tp > 0 {
            let p = tp as f64 / (tp + fp) as f64;
            let r = tp as f64 / (tp + fn_) as f64;
            f1_sum += 2.0 * p * r / (p + r);
        }
    }
    Ok((accuracy, f1_sum / classes.len() as f64))
}

/// Mean absolute severity error over hit pairs with a valid hypothesis
/// severity; invalid severities are excluded and counted.
pub fn severity_mae(
    pairs: &[(EditWiseExplanation, EditWiseExplanation)],
) -> Result<(f64, usize), ExplanationError> {
    if pairs.is_empty() {
        return Err(ExplanationError::EmptyPairs);
    }
    let severities: Vec<(i64, i64)> = pairs.iter().map(|(h, r)| (h.severity, r.severity)).collect();
    severity_mae_from_levels(&severities)
}

pub(crate) fn severity_mae_from_levels(
    pairs: &[(i64, i64)],
) -> Result<(f64, usize), ExplanationError> {
    let valid = |s: i64| (taxonomy::SEVERITY_MIN..=taxonomy::SEVERITY_MAX).contains(&s);
    let mut sum = 0.0;
    let mut counted = 0usize;
    let mut invalid = 0usize;
    for &(h, r) in pairs {
        if valid(h) {
            sum += (h - r).abs() as f64;
            counted += 1;
        } else {
            invalid += 1;
        }
    }
    if counted == 0 {
        return Err(ExplanationError::AllInvalid);
    }
    Ok((sum / counted as f64, invalid))
}

fn tokens(s: &str) -> Vec<char> {
    s.chars().collect()
}

fn ngram_counts(toks: &[char], n: usize) -> HashMap<&[char], usize> {
    let mut map = HashMap::new();
    if n > 0 && toks.len() >= n {
        for window in toks.windows(n) {
            *map.entry(window).or_insert(0) += 1;
        }
    }
    map
}

/// Clipped n-gram matches and total hypothesis n-grams.
fn clipped_overlap(hyp: &[char], reference: &[char], n: usize) -> (usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let matches = h
        .iter()
        .map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0)))
        .sum();
    let total = if hyp.len() >= n { hyp.len() - n + 1 } else { 0 };
    (matches, total)
}

/// Sentence-level BLEU over code-point tokens, orders 1–4, with brevity
/// penalty. Zero match counts are replaced by 1e-9 inside the log
/// (epsilon smoothing), as is any order the hypothesis is too short for.
pub fn bleu(hyp: &str, reference: &str) -> f64 {
    const EPS: f64 = 1e-9;
    let h = tokens(hyp);
    let r = tokens(reference);
    if h.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=4 {
        let (matches, total) = clipped_overlap(&h, &r, n);
        let p = if total == 0 {
            EPS
        } else if matches == 0 {
            EPS / total as f64
        } else {
            matches as f64 / total as f64
        };
        log_sum += p.ln();
    }
    let bp = if h.len() > r.len() {
        1.0
    } else {
        (1.0 - r.len() as f64 / h.len() as f64).exp()
    };
    bp * (log_sum / 4.0).exp()
}

/// Greedy longest-common-block matching: repeatedly take the longest run
/// of still-unmatched tokens common to both sides (leftmost in the
/// hypothesis, then leftmost in the reference, on ties). Every token with
/// an available counterpart ends up matched, so the cardinality equals
/// the maximum one-to-one exact matching; the number of blocks is the
/// chunk count.
fn chunk_match(hyp: &[char], reference: &[char]) -> (usize, usize) {
    let mut h_used = vec![false; hyp.len()];
    let mut r_used = vec![false; reference.len()];
    let mut matches = 0usize;
    let mut chunks = 0usize;

    loop {
        let mut best: Option<(usize, usize, usize)> = None; // (len, h_start, r_start)
        for hs in 0..hyp.len() {
            if h_used[hs] {
                continue;
            }
            for rs in 0..reference.len() {
                if r_used[rs] || hyp[hs] != reference[rs] {
                    continue;
                }
                let mut len = 0usize;
                while hs + len < hyp.len()
                    && rs + len < reference.len()
                    && !h_used[hs + len]
                    && !r_used[rs + len]
                    && hyp[hs + len] == reference[rs + len]
                {
                    len += 1;
                }
                let candidate = (len, hs, rs);
                let better = match best {
                    None => true,
                    // longest first; ties to the leftmost hyp, then ref
                    Some((bl, bh, br)) => {
                        len > bl || (len == bl && (hs < bh || (hs == bh && rs < br)))
                    }
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        match best {
            Some((len, hs, rs)) if len > 0 => {
                for k in 0..len {
                    h_used[hs + k] = true;
                    r_used[rs + k] = true;
                }
                matches += len;
                chunks += 1;
            }
            _ => break,
        }
    }
    (matches, chunks)
}

/// Exact-match unigram METEOR over code-point tokens with alpha = 0.9,
/// beta = 3.0, gamma = 0.5. Matched unigrams come from the greedy
/// longest-common-block alignment above; zero matches score 0.
pub fn meteor(hyp: &str, reference: &str) -> f64 {
    const ALPHA: f64 = 0.9;
    const BETA: f64 = 3.0;
    const GAMMA: f64 = 0.5;
    let h = tokens(hyp);
    let r = tokens(reference);
    if h.is_empty() || r.is_empty() {
        return 0.0;
    }
    let (matches, chunks) = chunk_match(&h, &r);
    if matches == 0 {
        return 0.0;
    }
    let p = matches as f64 / h.len() as f64;
    let rec = matches as f64 / r.len() as f64;
    let f_mean = p * rec / (ALPHA * p + (1.0 - ALPHA) * rec);
    let penalty = GAMMA * (chunks as f64 / matches as f64).powf(BETA);
    f_mean * (1.0 - penalty)
}

/// ROUGE variant selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RougeVariant {
    Rouge1,
    Rouge2,
    RougeL,
}

fn lcs_len(a: &[char], b: &[char]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for &ca in a {
        for (j, &cb) in b.iter().enumerate() {
            curr[j + 1] = if ca == cb {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

fn f1(overlap: f64, hyp_total: f64, ref_total: f64) -> f64 {
    if hyp_total == 0.0 || ref_total == 0.0 {
        return 0.0;
    }
    let p = overlap / hyp_total;
    let r = overlap / ref_total;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// F1-flavored ROUGE over code-point tokens: n-gram overlap for ROUGE-1/2,
/// longest common subsequence for ROUGE-L. Empty inputs score 0.
pub fn rouge(hyp: &str, reference: &str, variant: RougeVariant) -> f64 {
    let h = tokens(hyp);
    let r = tokens(reference);
    match variant {
        RougeVariant::Rouge1 | RougeVariant::Rouge2 => {
            let n = if variant == RougeVariant::Rouge1 { 1 } else { 2 };
            let (overlap, hyp_total) = clipped_overlap(&h, &r, n);
            let ref_total = if r.len() >= n { r.len() - n + 1 } else { 0 };
            f1(overlap as f64, hyp_total as f64, ref_total as f64)
        }
        RougeVariant::RougeL => {
            let l = lcs_len(&h, &r);
            f1(l as f64, h.len() as f64, r.len() as f64)
        }
    }
}

/// Corpus-level explanation evaluation over id-aligned sample lists.
///
/// Hit and miss rates are micro-averaged over edit counts; text metrics
/// are averaged uniformly over the pooled hit pairs; type metrics are
/// computed once over the pooled pairs. With no hit pairs, `scores` is
/// absent.
pub fn evaluate_explanations(
    hyp: &[Sample],
    reference: &[Sample],
) -> Result<CorpusExplanationReport, ExplanationError> {
    if hyp.len() != reference.len() {
        return Err(ExplanationError::CorpusMismatch(format!(
            "{} hypothesis samples vs {} reference samples",
            hyp.len(),
            reference.len()
        )));
    }
    let mut pooled = Vec::new();
    let mut hits = 0usize;
    let mut hyp_edits = 0usize;
    let mut ref_edits = 0usize;
    for (h, r) in hyp.iter().zip(reference) {
        if h.id != r.id {
            return Err(ExplanationError::CorpusMismatch(format!(
                "sample id {:?} paired with {:?}",
                h.id, r.id
            )));
        }
        let report = hit_miss(h, r)?;
        hits += report.hit_count();
        hyp_edits += report.hyp_edit_count;
        ref_edits += report.ref_edit_count;
        pooled.extend(report.hit_pairs);
    }

    let scores = if pooled.is_empty() {
        None
    } else {
        Some(score_pairs(&pooled)?)
    };
    Ok(CorpusExplanationReport {
        hit_rate: hits as f64 / hyp_edits.max(1) as f64,
        miss_rate: (ref_edits - hits) as f64 / ref_edits.max(1) as f64,
        hit_count: hits,
        miss_count: ref_edits - hits,
        hyp_edit_count: hyp_edits,
        ref_edit_count: ref_edits,
        scores,
    })
}

/// Score a pooled, nonempty list of hit pairs.
pub fn score_pairs(
    pairs: &[(EditWiseExplanation, EditWiseExplanation)],
) -> Result<ExplanationScores, ExplanationError> {
    let (type_accuracy, type_macro_f1) = type_metrics(pairs)?;
    let (severity, invalid_severity_count) = severity_mae(pairs)?;
    let n = pairs.len() as f64;
    let mut sums = [0.0f64; 5];
    for (h, r) in pairs {
        sums[0] += bleu(&h.description, &r.description);
        sums[1] += meteor(&h.description, &r.description);
        sums[2] += rouge(&h.description, &r.description, RougeVariant::Rouge1);
        sums[3] += rouge(&h.description, &r.description, RougeVariant::Rouge2);
        sums[4] += rouge(&h.description, &r.description, RougeVariant::RougeL);
    }
    Ok(ExplanationScores {
        type_accuracy,
        type_macro_f1,
        severity_mae: severity,
        invalid_severity_count,
        bleu: sums[0] / n,
        meteor: sums[1] / n,
        rouge1: sums[2] / n,
        rouge2: sums[3] / n,
        rouge_l: sums[4] / n,
    })
}
