//! Edit extraction: character alignment between a source/target pair and
//! grouping of the aligned differences into edits.
//!
//! The aligner is plain Levenshtein over code points with unit costs and a
//! fixed tie-break, so identical inputs give identical outputs everywhere.
//! Adjacent edits can then be merged COTE-style to avoid fragmented spans.

use crate::model::Edit;
use crate::text::slice_chars;

/// Source-side gap (in code points) at or below which adjacent edits merge.
pub const DEFAULT_MERGE_GAP: usize = 1;

/// One step of a monotone character alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignKind {
    Match,
    Substitute,
    Insert,
    Delete,
}

/// An alignment step and the code-point positions it consumes. `Insert`
/// consumes only a target position, `Delete` only a source position; the
/// untouched index records the cursor at that step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignmentOp {
    pub kind: AlignKind,
    pub src_index: usize,
    pub tgt_index: usize,
}

/// A source/target pair and the ordered edits transforming one into the
/// other. Applying the edits to the source reconstructs the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditSet {
    pub source: String,
    pub target: String,
    pub edits: Vec<Edit>,
}

/// Minimum-cost monotone alignment under unit costs (match = 0).
///
/// Ties are broken in fixed order match > substitute > delete > insert,
/// applied at each step of the backtrace from the end of both strings.
pub fn align(source: &str, target: &str) -> Vec<AlignmentOp> {
    let src: Vec<char> = source.chars().collect();
    let tgt: Vec<char> = target.chars().collect();
    let n = src.len();
    let m = tgt.len();

    // dp[i][j] = cost of aligning src[..i] with tgt[..j]
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        dp[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = dp[i - 1][j - 1] + usize::from(src[i - 1] != tgt[j - 1]);
            let del = dp[i - 1][j] + 1;
            let ins = dp[i][j - 1] + 1;
            dp[i][j] = diag.min(del).min(ins);
        }
    }

    let mut ops = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let cost = dp[i][j];
        if i > 0 && j > 0 && src[i - 1] == tgt[j - 1] && dp[i - 1][j - 1] == cost {
            i -= 1;
            j -= 1;
            ops.push(AlignmentOp { kind: AlignKind::Match, src_index: i, tgt_index: j });
        } else if i > 0 && j > 0 && src[i - 1] != tgt[j - 1] && dp[i - 1][j - 1] + 1 == cost {
            i -= 1;
            j -= 1;
            ops.push(AlignmentOp { kind: AlignKind::Substitute, src_index: i, tgt_index: j });
        } else if i > 0 && dp[i - 1][j] + 1 == cost {
            i -= 1;
            ops.push(AlignmentOp { kind: AlignKind::Delete, src_index: i, tgt_index: j });
        } else {
            j -= 1;
            ops.push(AlignmentOp { kind: AlignKind::Insert, src_index: i, tgt_index: j });
        }
    }
    ops.reverse();
    ops
}

/// Total cost of an alignment: every non-match op costs 1.
pub fn alignment_cost(ops: &[AlignmentOp]) -> usize {
    ops.iter().filter(|op| op.kind != AlignKind::Match).count()
}

/// Extract the edit set of a sentence pair: maximal runs of non-match
/// alignment ops become single edits.
pub fn extract_edits(source: &str, target: &str) -> EditSet {
    let ops = align(source, target);
    let mut edits = Vec::new();

    let mut run: Option<(usize, usize)> = None; // (src_start, tgt_start)
    let mut src_pos = 0usize;
    let mut tgt_pos = 0usize;

    let mut close_run = |run: &mut Option<(usize, usize)>, src_pos: usize, tgt_pos: usize| {
        if let Some((ss, ts)) = run.take() {
            edits.push(Edit {
                src_start: ss,
                src_end: src_pos,
                src_text: slice_chars(source, ss, src_pos).unwrap().to_string(),
                tgt_start: ts,
                tgt_end: tgt_pos,
                tgt_text: slice_chars(target, ts, tgt_pos).unwrap().to_string(),
            });
        }
    };

    for op in &ops {
        match op.kind {
            AlignKind::Match => {
                close_run(&mut run, src_pos, tgt_pos);
                src_pos += 1;
                tgt_pos += 1;
            }
            AlignKind::Substitute => {
                run.get_or_insert((src_pos, tgt_pos));
                src_pos += 1;
                tgt_pos += 1;
            }
            AlignKind::Delete => {
                run.get_or_insert((src_pos, tgt_pos));
                src_pos += 1;
            }
            AlignKind::Insert => {
                run.get_or_insert((src_pos, tgt_pos));
                tgt_pos += 1;
            }
        }
    }
    close_run(&mut run, src_pos, tgt_pos);

    EditSet {
        source: source.to_string(),
        target: target.to_string(),
        edits,
    }
}

/// Merge consecutive edits whose source-side gap is at most `max_gap`,
/// transitively. The unchanged characters between merged edits are copied
/// into both sides of the merged edit, so the round-trip property holds.
///
/// Idempotent: after one pass every remaining gap exceeds `max_gap`.
pub fn merge_adjacent(set: &EditSet, max_gap: usize) -> EditSet {
    let mut merged: Vec<Edit> = Vec::with_capacity(set.edits.len());
    for edit in &set.edits {
        match merged.last_mut() {
            Some(prev) if edit.src_start.saturating_sub(prev.src_end) <= max_gap => {
                let src_gap = slice_chars(&set.source, prev.src_end, edit.src_start)
                    .unwrap()
                    .to_string();
                let tgt_gap = slice_chars(&set.target, prev.tgt_end, edit.tgt_start)
                    .unwrap()
                    .to_string();
                prev.src_text = format!("{}{}{}", prev.src_text, src_gap, edit.src_text);
                prev.tgt_text = format!("{}{}{}", prev.tgt_text, tgt_gap, edit.tgt_text);
                prev.src_end = edit.src_end;
                prev.tgt_end = edit.tgt_end;
            }
            _ => merged.push(edit.clone()),
        }
    }
    EditSet {
        source: set.source.clone(),
        target: set.target.clone(),
        edits: merged,
    }
}
