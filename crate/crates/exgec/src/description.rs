//! Error-description analysis: the 【evidence】/{correction} marker grammar,
//! faithfulness of marked spans against the sentence pair, and the
//! three-part template shape check.
//!
//! Marker parsing is loss-free: the plain text plus the recorded spans
//! reconstruct the original description exactly. Offsets are code-point
//! positions of the opening marker in the original description.

use thiserror::Error;

/// Sentence-segment delimiters for the template heuristic.
const SEGMENT_DELIMITERS: [char; 6] = ['。', '；', '!', '?', '！', '？'];

const EVIDENCE_OPEN: char = '【';
const EVIDENCE_CLOSE: char = '】';

fn is_correction_open(c: char) -> bool {
    c == '{' || c == '｛'
}

fn is_correction_close(c: char) -> bool {
    c == '}' || c == '｝'
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DescriptionError {
    #[error("unbalanced marker {marker:?} at code-point offset {offset}")]
    UnbalancedMarker { marker: char, offset: usize },
}

/// One 【…】 group: the enclosed text and the offset of the opening marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceSpan {
    pub text: String,
    pub offset: usize,
}

/// One {…} group. Both halfwidth and fullwidth braces open and close a
/// correction group; the original marker characters are kept so the
/// description can be reconstructed byte-for-byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionSpan {
    pub text: String,
    pub offset: usize,
    pub open_marker: char,
    pub close_marker: char,
}

/// A description with its markers lifted out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedDescription {
    pub plain_text: String,
    pub evidence_spans: Vec<EvidenceSpan>,
    pub correction_spans: Vec<CorrectionSpan>,
    pub segment_count: usize,
}

/// Pass/fail for one marked span checked against a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanCheck {
    pub text: String,
    pub found: bool,
}

/// Faithfulness of every marked span: evidence against the source,
/// corrections against the target.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaithfulnessReport {
    pub evidence: Vec<SpanCheck>,
    pub corrections: Vec<SpanCheck>,
    pub faithful: bool,
}

/// Result of the template shape heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TemplateReport {
    pub segment_count: usize,
    pub conforms: bool,
}

enum State {
    Outside,
    InEvidence { offset: usize, content: String },
    InCorrection { offset: usize, open: char, content: String },
}

/// Extract all maximal 【…】 and {…} groups from a description.
///
/// Nesting of a kind within itself is rejected; markers of one kind inside
/// an open group of the other kind are literal text. Any opener left
/// unclosed, closer without an opener, or same-kind opener inside an open
/// group errors with the offset of the offending marker.
pub fn parse_markers(description: &str) -> Result<ParsedDescription, DescriptionError> {
    let mut plain = String::new();
    let mut evidence = Vec::new();
    let mut corrections = Vec::new();
    let mut state = State::Outside;

    for (idx, c) in description.chars().enumerate() {
        state = match state {
            State::Outside => {
                if c == EVIDENCE_OPEN {
                    State::InEvidence { offset: idx, content: String::new() }
                } else if is_correction_open(c) {
                    State::InCorrection { offset: idx, open: c, content: String::new() }
                } else if c == EVIDENCE_CLOSE || is_correction_close(c) {
                    return Err(DescriptionError::UnbalancedMarker { marker: c, offset: idx });
                } else {
                    plain.push(c);
                    State::Outside
                }
            }
            State::InEvidence { offset, mut content } => {
                if c == EVIDENCE_CLOSE {
                    plain.push_str(&content);
                    evidence.push(EvidenceSpan { text: content, offset });
                    State::Outside
                } else if c == EVIDENCE_OPEN {
                    return Err(DescriptionError::UnbalancedMarker { marker: c, offset: idx });
                } else {
                    content.push(c);
                    State::InEvidence { offset, content }
                }
            }
            State::InCorrection { offset, open, mut content } => {
                if is_correction_close(c) {
                    plain.push_str(&content);
                    corrections.push(CorrectionSpan {
                        text: content,
                        offset,
                        open_marker: open,
                        close_marker: c,
                    });
                    State::Outside
                } else if is_correction_open(c) {
                    return Err(DescriptionError::UnbalancedMarker { marker: c, offset: idx });
                } else {
                    content.push(c);
                    State::InCorrection { offset, open, content }
                }
            }
        };
    }

    match state {
        State::Outside => {}
        State::InEvidence { offset, .. } => {
            return Err(DescriptionError::UnbalancedMarker { marker: EVIDENCE_OPEN, offset })
        }
        State::InCorrection { offset, open, .. } => {
            return Err(DescriptionError::UnbalancedMarker { marker: open, offset })
        }
    }

    let segment_count = count_segments(&plain);
    Ok(ParsedDescription {
        plain_text: plain,
        evidence_spans: evidence,
        correction_spans: corrections,
        segment_count,
    })
}

impl ParsedDescription {
    /// Rebuild the original description from the plain text and spans.
    pub fn reconstruct(&self) -> String {
        #[derive(Clone)]
        enum Ins {
            Evidence(usize, String),
            Correction(usize, char, char, String),
        }
        let mut inserts: Vec<Ins> = self
            .evidence_spans
            .iter()
            .map(|s| Ins::Evidence(s.offset, s.text.clone()))
            .chain(self.correction_spans.iter().map(|s| {
                Ins::Correction(s.offset, s.open_marker, s.close_marker, s.text.clone())
            }))
            .collect();
        inserts.sort_by_key(|i| match i {
            Ins::Evidence(o, _) | Ins::Correction(o, _, _, _) => *o,
        });

        let mut out = String::new();
        let mut plain = self.plain_text.chars();
        let mut written = 0usize; // code points emitted so far
        for ins in inserts {
            let (offset, open, close, text) = match ins {
                Ins::Evidence(o, t) => (o, EVIDENCE_OPEN, EVIDENCE_CLOSE, t),
                Ins::Correction(o, op, cl, t) => (o, op, cl, t),
            };
            while written < offset {
                out.push(plain.next().expect("plain text shorter than span offsets"));
                written += 1;
            }
            out.push(open);
            out.push_str(&text);
            out.push(close);
            // the group occupies its content plus two marker characters
            written += text.chars().count() + 2;
            for _ in 0..text.chars().count() {
                plain.next();
            }
        }
        out.extend(plain);
        out
    }
}

/// Check each evidence string as a contiguous substring of the source and
/// each correction string as a contiguous substring of the target.
/// Exact code-point matching; no fuzz, so hallucinated spans surface.
pub fn check_faithfulness(
    parsed: &ParsedDescription,
    source: &str,
    target: &str,
) -> FaithfulnessReport {
    let evidence: Vec<SpanCheck> = parsed
        .evidence_spans
        .iter()
        .map(|s| SpanCheck { text: s.text.clone(), found: source.contains(&s.text) })
        .collect();
    let corrections: Vec<SpanCheck> = parsed
        .correction_spans
        .iter()
        .map(|s| SpanCheck { text: s.text.clone(), found: target.contains(&s.text) })
        .collect();
    let faithful = evidence.iter().chain(&corrections).all(|c| c.found);
    FaithfulnessReport { evidence, corrections, faithful }
}

fn count_segments(text: &str) -> usize {
    text.split(SEGMENT_DELIMITERS)
        .filter(|seg| !seg.trim().is_empty())
        .count()
}

/// Structural template heuristic: a well-formed description should split
/// into at least three sentence segments (rule premise, error diagnosis,
/// revision guidance). This checks shape only, not meaning.
pub fn check_template(description: &str) -> TemplateReport {
    let segment_count = count_segments(description);
    TemplateReport { segment_count, conforms: segment_count >= 3 }
}
