//! Two-tier error-type taxonomy for Chinese grammatical errors.
//!
//! Five major types, sixteen minor types, plus the sentinel `"Other"`.
//! Minor labels are canonical Chinese strings with attached English
//! aliases; major labels are canonical English strings. Lookups are
//! exact-match on the canonical form — aliases are informational only.

use thiserror::Error;

/// Sentinel label used for both tiers when an error fits no category.
pub const OTHER: &str = "Other";

/// The five major labels, in catalog order.
pub const MAJORS: [&str; 5] = [
    "Punctuation-level Error",
    "Spelling-level Error",
    "Word-level Error",
    "Sentence-level Error",
    "Other Special Error",
];

/// One minor error type: canonical Chinese label, English alias, and the
/// index of its parent in [`MAJORS`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinorType {
    pub canonical: &'static str,
    pub english: &'static str,
    pub major_index: usize,
}

/// The sixteen minor types, grouped by major, in catalog order.
pub const MINORS: [MinorType; 16] = [
    MinorType { canonical: "标点冗余", english: "Punctuation Redundancy", major_index: 0 },
    MinorType { canonical: "标点丢失", english: "Punctuation Missing", major_index: 0 },
    MinorType { canonical: "标点误用", english: "Punctuation Misuse", major_index: 0 },
    MinorType { canonical: "字音混淆错误", english: "Phonetic Confusion Error", major_index: 1 },
    MinorType { canonical: "字形混淆错误", english: "Glyph Confusion Error", major_index: 1 },
    MinorType { canonical: "词内部字符异位错误", english: "Internal Character Misplacement Error", major_index: 1 },
    MinorType { canonical: "命名实体拼写错误", english: "Named Entity Misspelling", major_index: 1 },
    MinorType { canonical: "词语冗余", english: "Word Redundancy", major_index: 2 },
    MinorType { canonical: "词语丢失", english: "Word Missing", major_index: 2 },
    MinorType { canonical: "词语误用", english: "Word Misuse", major_index: 2 },
    MinorType { canonical: "词序不当", english: "Improper Word Order", major_index: 3 },
    MinorType { canonical: "逻辑不通", english: "Illogicality", major_index: 3 },
    MinorType { canonical: "句式杂糅", english: "Run-on Sentence", major_index: 3 },
    MinorType { canonical: "照应错误", english: "Inconsistency Error", major_index: 4 },
    MinorType { canonical: "歧义错误", english: "Ambiguity Error", major_index: 4 },
    MinorType { canonical: "语气不协调", english: "Inconsistent Tone", major_index: 4 },
];

/// Severity scale labels, indexed by level 1..=5.
pub const SEVERITY_LABELS: [(i64, &str); 5] = [
    (1, "Trivial Error"),
    (2, "Minor Error"),
    (3, "Moderate Error"),
    (4, "Serious Error"),
    (5, "Extremely Serious Error"),
];

/// Valid severity range, inclusive.
pub const SEVERITY_MIN: i64 = 1;
pub const SEVERITY_MAX: i64 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("unknown taxonomy label: {0:?}")]
    UnknownLabel(String),
}

/// Parent major label for a canonical minor label. The sentinel maps to
/// itself.
pub fn minor_to_major(minor: &str) -> Result<&'static str, TaxonomyError> {
    if minor == OTHER {
        return Ok(OTHER);
    }
    MINORS
        .iter()
        .find(|m| m.canonical == minor)
        .map(|m| MAJORS[m.major_index])
        .ok_or_else(|| TaxonomyError::UnknownLabel(minor.to_string()))
}

/// True when `minor` is one of the sixteen canonical minors or the sentinel.
pub fn is_known_minor(minor: &str) -> bool {
    minor == OTHER || MINORS.iter().any(|m| m.canonical == minor)
}

/// True when `(major, minor)` is a parent/child pair from the catalog, or
/// both are the sentinel.
pub fn is_valid_pair(major: &str, minor: &str) -> bool {
    if major == OTHER && minor == OTHER {
        return true;
    }
    matches!(minor_to_major(minor), Ok(m) if m == major)
}

/// English alias for a canonical minor label, when it has one.
pub fn english_alias(minor: &str) -> Option<&'static str> {
    MINORS.iter().find(|m| m.canonical == minor).map(|m| m.english)
}

/// Display label for a severity level, when the level is in range.
pub fn severity_label(level: i64) -> Option<&'static str> {
    SEVERITY_LABELS
        .iter()
        .find(|(l, _)| *l == level)
        .map(|(_, name)| *name)
}
