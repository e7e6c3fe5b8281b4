//! Core data model: edits, edit-wise explanations, samples, and validation.
//!
//! All span offsets are Unicode code-point offsets, half-open. Text is never
//! normalized on load, so offsets stay stable across tools. All types are
//! immutable values after construction and safe to share between threads.

use crate::taxonomy;
use crate::text::{char_len, slice_chars};
use thiserror::Error;

/// One grammatical-error span: a source range and its replacement in the
/// target. An insertion has an empty source span, a deletion an empty
/// target span; an edit never has both sides empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Edit {
    pub src_start: usize,
    pub src_end: usize,
    pub src_text: String,
    pub tgt_start: usize,
    pub tgt_end: usize,
    pub tgt_text: String,
}

impl Edit {
    pub fn is_insertion(&self) -> bool {
        self.src_start == self.src_end
    }

    pub fn is_deletion(&self) -> bool {
        self.tgt_start == self.tgt_end
    }
}

/// An [`Edit`] plus its explanation: error type pair, severity 1–5, and a
/// free-text description possibly carrying 【evidence】 and {correction}
/// markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EditWiseExplanation {
    pub edit: Edit,
    pub error_type_major: String,
    pub error_type_minor: String,
    pub severity: i64,
    pub description: String,
}

/// One dataset sample: ungrammatical source, corrected target, and the
/// ordered list of edit-wise explanations covering their differences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub id: String,
    pub source: String,
    pub target: String,
    pub explanations: Vec<EditWiseExplanation>,
    pub provenance: Option<String>,
}

/// Machine-readable codes for sample invariant violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationCode {
    SrcSpanRange,
    TgtSpanRange,
    EditTextMismatch,
    EmptyEdit,
    SeverityRange,
    TypePairInvalid,
    EditOrder,
    EditOverlap,
    RoundTripMismatch,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::SrcSpanRange => "SRC_SPAN_RANGE",
            ViolationCode::TgtSpanRange => "TGT_SPAN_RANGE",
            ViolationCode::EditTextMismatch => "EDIT_TEXT_MISMATCH",
            ViolationCode::EmptyEdit => "EMPTY_EDIT",
            ViolationCode::SeverityRange => "SEVERITY_RANGE",
            ViolationCode::TypePairInvalid => "TYPE_PAIR_INVALID",
            ViolationCode::EditOrder => "EDIT_ORDER",
            ViolationCode::EditOverlap => "EDIT_OVERLAP",
            ViolationCode::RoundTripMismatch => "ROUNDTRIP_MISMATCH",
        }
    }
}

impl std::fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One violated invariant. `explanation_index` points at the offending
/// explanation when the violation is local to one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
    pub explanation_index: Option<usize>,
}

/// Every invariant violated by a sample; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid edit set: {0}")]
    InvalidEditSet(String),
}

/// Check every sample invariant and report all violations found.
///
/// Violations are data, not failures: a malformed sample yields a report,
/// never an error. Pure and idempotent.
pub fn validate_sample(sample: &Sample) -> ValidationReport {
    let mut violations = Vec::new();
    let src_len = char_len(&sample.source);
    let tgt_len = char_len(&sample.target);

    for (i, exp) in sample.explanations.iter().enumerate() {
        let e = &exp.edit;
        let mut spans_ok = true;

        if e.src_start > e.src_end || e.src_end > src_len {
            spans_ok = false;
            violations.push(Violation {
                code: ViolationCode::SrcSpanRange,
                message: format!(
                    "source span [{}, {}) out of range for source of length {}",
                    e.src_start, e.src_end, src_len
                ),
                explanation_index: Some(i),
            });
        }
        if e.tgt_start > e.tgt_end || e.tgt_end > tgt_len {
            spans_ok = false;
            violations.push(Violation {
                code: ViolationCode::TgtSpanRange,
                message: format!(
                    "target span [{}, {}) out of range for target of length {}",
                    e.tgt_start, e.tgt_end, tgt_len
                ),
                explanation_index: Some(i),
            });
        }

        if spans_ok {
            let src_slice = slice_chars(&sample.source, e.src_start, e.src_end).unwrap();
            if src_slice != e.src_text {
                violations.push(Violation {
                    code: ViolationCode::EditTextMismatch,
                    message: format!(
                        "src_text {:?} does not equal source slice {:?} at [{}, {})",
                        e.src_text, src_slice, e.src_start, e.src_end
                    ),
                    explanation_index: Some(i),
                });
            }
            let tgt_slice = slice_chars(&sample.target, e.tgt_start, e.tgt_end).unwrap();
            if tgt_slice != e.tgt_text {
                violations.push(Violation {
                    code: ViolationCode::EditTextMismatch,
                    message: format!(
                        "tgt_text {:?} does not equal target slice {:?} at [{}, {})",
                        e.tgt_text, tgt_slice, e.tgt_start, e.tgt_end
                    ),
                    explanation_index: Some(i),
                });
            }
        }

        if e.src_start == e.src_end && e.tgt_start == e.tgt_end {
            violations.push(Violation {
                code: ViolationCode::EmptyEdit,
                message: "edit changes nothing: both spans are empty".to_string(),
                explanation_index: Some(i),
            });
        }

        if !(taxonomy::SEVERITY_MIN..=taxonomy::SEVERITY_MAX).contains(&exp.severity) {
            violations.push(Violation {
                code: ViolationCode::SeverityRange,
                message: format!("severity {} outside [1, 5]", exp.severity),
                explanation_index: Some(i),
            });
        }

        if !taxonomy::is_valid_pair(&exp.error_type_major, &exp.error_type_minor) {
            violations.push(Violation {
                code: ViolationCode::TypePairInvalid,
                message: format!(
                    "({:?}, {:?}) is not a catalog pair",
                    exp.error_type_major, exp.error_type_minor
                ),
                explanation_index: Some(i),
            });
        }
    }

    for (i, window) in sample.explanations.windows(2).enumerate() {
        let a = &window[0].edit;
        let b = &window[1].edit;
        if (b.src_start, b.src_end) < (a.src_start, a.src_end) {
            violations.push(Violation {
                code: ViolationCode::EditOrder,
                message: format!(
                    "edit {} at [{}, {}) precedes edit {} at [{}, {})",
                    i + 1,
                    b.src_start,
                    b.src_end,
                    i,
                    a.src_start,
                    a.src_end
                ),
                explanation_index: Some(i + 1),
            });
        } else if overlaps_on_source(a, b) {
            violations.push(Violation {
                code: ViolationCode::EditOverlap,
                message: format!(
                    "source spans [{}, {}) and [{}, {}) overlap",
                    a.src_start, a.src_end, b.src_start, b.src_end
                ),
                explanation_index: Some(i + 1),
            });
        }
    }

    // Round trip only makes sense once the edits are structurally sound.
    if violations.iter().all(|v| {
        matches!(
            v.code,
            ViolationCode::SeverityRange | ViolationCode::TypePairInvalid
        )
    }) {
        let edits: Vec<Edit> = sample.explanations.iter().map(|e| e.edit.clone()).collect();
        match apply_edits(&sample.source, &edits) {
            Ok(result) if result == sample.target => {}
            Ok(result) => violations.push(Violation {
                code: ViolationCode::RoundTripMismatch,
                message: format!(
                    "applying all edits yields {:?}, expected target {:?}",
                    result, sample.target
                ),
                explanation_index: None,
            }),
            Err(err) => violations.push(Violation {
                code: ViolationCode::RoundTripMismatch,
                message: format!("edits cannot be applied: {err}"),
                explanation_index: None,
            }),
        }
    }

    ValidationReport { violations }
}

fn overlaps_on_source(a: &Edit, b: &Edit) -> bool {
    // Half-open ranges; zero-width spans at the boundary do not overlap.
    a.src_start < b.src_end && b.src_start < a.src_end
}

/// Replace each source span with its `tgt_text`, left to right.
///
/// Application is positional: `src_text` is not consulted. Edits must be
/// sorted, non-overlapping on the source side, and in range.
pub fn apply_edits(source: &str, edits: &[Edit]) -> Result<String, ModelError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = String::new();
    let mut cursor = 0usize;
    for (i, e) in edits.iter().enumerate() {
        if e.src_start > e.src_end || e.src_end > chars.len() {
            return Err(ModelError::InvalidEditSet(format!(
                "edit {i} span [{}, {}) out of range for source of length {}",
                e.src_start,
                e.src_end,
                chars.len()
            )));
        }
        if e.src_start < cursor {
            return Err(ModelError::InvalidEditSet(format!(
                "edit {i} at [{}, {}) overlaps or precedes an earlier edit",
                e.src_start, e.src_end
            )));
        }
        out.extend(&chars[cursor..e.src_start]);
        out.push_str(&e.tgt_text);
        cursor = e.src_end;
    }
    out.extend(&chars[cursor..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn edit(
        src: (usize, usize),
        src_text: &str,
        tgt: (usize, usize),
        tgt_text: &str,
    ) -> Edit {
        Edit {
            src_start: src.0,
            src_end: src.1,
            src_text: src_text.to_string(),
            tgt_start: tgt.0,
            tgt_end: tgt.1,
            tgt_text: tgt_text.to_string(),
        }
    }

    fn explanation(e: Edit, major: &str, minor: &str, severity: i64) -> EditWiseExplanation {
        EditWiseExplanation {
            edit: e,
            error_type_major: major.to_string(),
            error_type_minor: minor.to_string(),
            severity,
            description: "【x】应改为{y}。原句有误。建议修改。".to_string(),
        }
    }

    fn one_edit_sample() -> Sample {
        Sample {
            id: "s1".to_string(),
            source: "我去学校".to_string(),
            target: "我去了学校".to_string(),
            explanations: vec![explanation(
                edit((2, 2), "", (2, 3), "了"),
                "Word-level Error",
                "词语丢失",
                2,
            )],
            provenance: None,
        }
    }

    #[test]
    fn well_formed_sample_is_valid() {
        let report = validate_sample(&one_edit_sample());
        assert!(report.is_valid(), "unexpected violations: {:?}", report.violations);
    }

    #[test]
    fn src_text_mismatch_is_reported() {
        let mut sample = one_edit_sample();
        sample.explanations[0].edit = edit((2, 3), "不对", (2, 3), "了");
        let report = validate_sample(&sample);
        assert!(report
            .violations
            .iter()
            .any(|v| v.code == ViolationCode::EditTextMismatch));
    }

    #[test]
    fn severity_out_of_range_is_reported() {
        let mut sample = one_edit_sample();
        sample.explanations[0].severity = 6;
        let report = validate_sample(&sample);
        let codes: Vec<_> = report.violations.iter().map(|v| v.code).collect();
        assert_eq!(codes, vec![ViolationCode::SeverityRange]);
        assert_eq!(report.violations[0].code.as_str(), "SEVERITY_RANGE");
    }

    #[test]
    fn overlapping_edits_are_rejected_not_merged() {
        let sample = Sample {
            id: "s2".to_string(),
            source: "abcdef".to_string(),
            target: "abXdef".to_string(),
            explanations: vec![
                explanation(edit((1, 3), "bc", (1, 3), "bX"), "Other", "Other", 3),
                explanation(edit((2, 4), "cd", (2, 4), "Xd"), "Other", "Other", 3),
            ],
            provenance: None,
        };
        let report = validate_sample(&sample);
        assert!(report
            .violations
            .iter()
            .any(|v| v.code == ViolationCode::EditOverlap));
    }

    #[test]
    fn round_trip_mismatch_is_reported() {
        let mut sample = one_edit_sample();
        sample.target = "我去学校了".to_string();
        let report = validate_sample(&sample);
        assert!(report
            .violations
            .iter()
            .any(|v| v.code == ViolationCode::RoundTripMismatch));
    }

    #[test]
    fn validate_is_idempotent() {
        let sample = one_edit_sample();
        assert_eq!(validate_sample(&sample), validate_sample(&sample));
    }

    #[test]
    fn apply_edits_identity_on_empty_set() {
        assert_eq!(apply_edits("abc", &[]).unwrap(), "abc");
    }

    #[test]
    fn apply_edits_insertion() {
        let e = edit((2, 2), "", (2, 3), "了");
        assert_eq!(apply_edits("我去学校", &[e]).unwrap(), "我去了学校");
    }

    #[test]
    fn apply_edits_substitution() {
        let e = edit((2, 3), "c", (2, 3), "d");
        assert_eq!(apply_edits("abc", &[e]).unwrap(), "abd");
    }

    #[test]
    fn apply_edits_rejects_out_of_range() {
        let e = edit((3, 5), "xx", (3, 5), "yy");
        assert!(apply_edits("abc", &[e]).is_err());
    }

    #[test]
    fn apply_edits_rejects_overlap() {
        let edits = vec![edit((0, 2), "ab", (0, 1), "x"), edit((1, 3), "bc", (1, 2), "y")];
        assert!(apply_edits("abc", &edits).is_err());
    }
}
