//! Task serialization: JSONL dataset ingestion, canonical JSON payloads
//! for training and inference, model-output parsing, reference selection,
//! and corpus statistics.
//!
//! Canonical JSON means sorted keys, no insignificant whitespace, UTF-8
//! passed through unescaped. Every payload and dataset line this module
//! writes is byte-stable across runs and platforms.

use crate::extract::{extract_edits, merge_adjacent, DEFAULT_MERGE_GAP};
use crate::model::{validate_sample, Edit, EditWiseExplanation, Sample, ViolationCode};
use crate::text::{char_len, slice_chars};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("corpus file is invalid:\n{}", format_problems(.0))]
    InvalidCorpus(Vec<LineProblem>),
    #[error("no references to select from")]
    EmptyReferences,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("no JSON value found in model output")]
    NoJsonFound,
    #[error("model output violates the {stage} schema at {pointer}: {message}")]
    SchemaViolation { stage: Stage, pointer: String, message: String },
}

/// One problem found on one line of a JSONL corpus file. Lines are
/// numbered from 1. `code` is set for invariant violations; parse errors
/// carry only a message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineProblem {
    pub line: usize,
    pub code: Option<ViolationCode>,
    pub message: String,
}

fn format_problems(problems: &[LineProblem]) -> String {
    let mut out = String::new();
    for p in problems {
        let _ = writeln!(out, "  line {}: {}", p.line, p.message);
    }
    out
}

/// Task stage of a linearized record or a model call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Correction,
    Explanation,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Stage::Correction => f.write_str("correction"),
            Stage::Explanation => f.write_str("explanation"),
        }
    }
}

/// One Seq2Seq training record: a canonical JSON input and the canonical
/// JSON output the model should produce for it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearizedRecord {
    pub stage: Stage,
    pub input_payload: String,
    pub expected_output_payload: String,
}

/// Corpus-level statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DatasetStats {
    pub sentence_count: usize,
    pub edits_per_sentence: f64,
    pub chars_per_sentence: f64,
}

/// Explanation object parsed from model output. Spans are deliberately
/// absent: in correct-then-explain decoding they come from local edit
/// extraction, never from the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplanationPayload {
    pub error_type_major: String,
    pub error_type_minor: String,
    pub severity: i64,
    pub description: String,
}

/// A parsed and schema-checked model output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedOutput {
    Correction { target: String },
    Explanations(Vec<ExplanationPayload>),
}

// ---------------------------------------------------------------------------
// Canonical JSON
// ---------------------------------------------------------------------------

/// Serialize any value to canonical JSON: keys sorted, compact, UTF-8.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("value serializes to JSON");
    let mut out = String::new();
    write_canonical(&v, &mut out);
    out
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}:", serde_json::to_string(k).unwrap());
                write_canonical(&map[*k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => {
            let _ = write!(out, "{}", serde_json::to_string(scalar).unwrap());
        }
    }
}

// ---------------------------------------------------------------------------
// Wire schema
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct EditWire {
    src: [usize; 2],
    src_text: String,
    tgt: [usize; 2],
    tgt_text: String,
}

impl From<&Edit> for EditWire {
    fn from(e: &Edit) -> Self {
        EditWire {
            src: [e.src_start, e.src_end],
            src_text: e.src_text.clone(),
            tgt: [e.tgt_start, e.tgt_end],
            tgt_text: e.tgt_text.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ExplanationWire {
    description: String,
    error_type_major: String,
    error_type_minor: String,
    severity: i64,
    #[serde(skip_serializing_if = "Option::is_none")]
    src: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    src_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tgt: Option<[usize; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tgt_text: Option<String>,
}

impl From<&EditWiseExplanation> for ExplanationWire {
    fn from(e: &EditWiseExplanation) -> Self {
        ExplanationWire {
            description: e.description.clone(),
            error_type_major: e.error_type_major.clone(),
            error_type_minor: e.error_type_minor.clone(),
            severity: e.severity,
            src: Some([e.edit.src_start, e.edit.src_end]),
            src_text: Some(e.edit.src_text.clone()),
            tgt: Some([e.edit.tgt_start, e.edit.tgt_end]),
            tgt_text: Some(e.edit.tgt_text.clone()),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleWire {
    explanations: Vec<ExplanationWire>,
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
    source: String,
    target: String,
}

impl From<&Sample> for SampleWire {
    fn from(s: &Sample) -> Self {
        SampleWire {
            explanations: s.explanations.iter().map(ExplanationWire::from).collect(),
            id: s.id.clone(),
            provenance: s.provenance.clone(),
            source: s.source.clone(),
            target: s.target.clone(),
        }
    }
}

/// Canonical dataset line for one sample.
pub fn sample_to_json(sample: &Sample) -> String {
    canonical_json(&SampleWire::from(sample))
}

/// Parse one dataset line into a sample without validating invariants.
///
/// When every explanation omits its span fields, offsets are re-derived
/// by extracting edits from the sentence pair and zipping them with the
/// explanations in order.
pub fn sample_from_json(line: &str) -> Result<Sample, String> {
    let wire: SampleWire = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let span_present: Vec<bool> = wire
        .explanations
        .iter()
        .map(|e| e.src.is_some() || e.tgt.is_some() || e.src_text.is_some() || e.tgt_text.is_some())
        .collect();

    let explanations = if !wire.explanations.is_empty() && span_present.iter().all(|p| !p) {
        // re-derive offsets from the sentence pair
        let derived = extract_edits(&wire.source, &wire.target).edits;
        if derived.len() != wire.explanations.len() {
            return Err(format!(
                "cannot re-derive spans: extraction yields {} edits for {} explanations",
                derived.len(),
                wire.explanations.len()
            ));
        }
        wire.explanations
            .into_iter()
            .zip(derived)
            .map(|(w, edit)| EditWiseExplanation {
                edit,
                error_type_major: w.error_type_major,
                error_type_minor: w.error_type_minor,
                severity: w.severity,
                description: w.description,
            })
            .collect()
    } else {
        let mut out = Vec::with_capacity(wire.explanations.len());
        for (i, w) in wire.explanations.into_iter().enumerate() {
            let src = w
                .src
                .ok_or_else(|| format!("explanation {i} is missing the src span"))?;
            let tgt = w
                .tgt
                .ok_or_else(|| format!("explanation {i} is missing the tgt span"))?;
            // absent texts are filled from the slices; present ones are
            // kept verbatim and checked later by validation
            let src_text = match w.src_text {
                Some(t) => t,
                None => slice_chars(&wire.source, src[0], src[1])
                    .ok_or_else(|| format!("explanation {i} src span out of range"))?
                    .to_string(),
            };
            let tgt_text = match w.tgt_text {
                Some(t) => t,
                None => slice_chars(&wire.target, tgt[0], tgt[1])
                    .ok_or_else(|| format!("explanation {i} tgt span out of range"))?
                    .to_string(),
            };
            out.push(EditWiseExplanation {
                edit: Edit {
                    src_start: src[0],
                    src_end: src[1],
                    src_text,
                    tgt_start: tgt[0],
                    tgt_end: tgt[1],
                    tgt_text,
                },
                error_type_major: w.error_type_major,
                error_type_minor: w.error_type_minor,
                severity: w.severity,
                description: w.description,
            });
        }
        out
    };

    Ok(Sample {
        id: wire.id,
        source: wire.source,
        target: wire.target,
        explanations,
        provenance: wire.provenance,
    })
}

// ---------------------------------------------------------------------------
// Corpus loading
// ---------------------------------------------------------------------------

/// Parse and fully validate every line of a JSONL corpus file.
///
/// Every violated invariant on any line is collected; the loader fails
/// listing all offending line numbers, or returns the whole corpus.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Sample>, IoError> {
    let (samples, problems) = scan_corpus(path, true)?;
    if problems.is_empty() {
        Ok(samples)
    } else {
        Err(IoError::InvalidCorpus(problems))
    }
}

/// Like [`load_corpus`], but tolerates severity-range and type-pair
/// violations (hypothesis corpora produced by models routinely contain
/// them; the metrics handle both downstream). Structural violations still
/// fail. Tolerated problems are returned as warnings.
pub fn load_corpus_tolerant(
    path: impl AsRef<Path>,
) -> Result<(Vec<Sample>, Vec<LineProblem>), IoError> {
    let (samples, problems) = scan_corpus(path, true)?;
    let (warnings, fatal): (Vec<_>, Vec<_>) = problems.into_iter().partition(|p| {
        matches!(
            p.code,
            Some(ViolationCode::SeverityRange) | Some(ViolationCode::TypePairInvalid)
        )
    });
    if fatal.is_empty() {
        Ok((samples, warnings))
    } else {
        Err(IoError::InvalidCorpus(fatal))
    }
}

/// Parse a JSONL corpus checking JSON schema only: no invariant
/// validation at all. Statistics need nothing more.
pub fn load_corpus_unchecked(path: impl AsRef<Path>) -> Result<Vec<Sample>, IoError> {
    let (samples, problems) = scan_corpus(path, false)?;
    if problems.is_empty() {
        Ok(samples)
    } else {
        Err(IoError::InvalidCorpus(problems))
    }
}

fn scan_corpus(
    path: impl AsRef<Path>,
    validate: bool,
) -> Result<(Vec<Sample>, Vec<LineProblem>), IoError> {
    let content = fs::read_to_string(path)?;
    let mut samples = Vec::new();
    let mut problems = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match sample_from_json(line) {
            Ok(sample) => {
                if validate {
                    let report = validate_sample(&sample);
                    for v in &report.violations {
                        problems.push(LineProblem {
                            line: line_no,
                            code: Some(v.code),
                            message: format!("{} {}", v.code, v.message),
                        });
                    }
                }
                samples.push(sample);
            }
            Err(message) => problems.push(LineProblem { line: line_no, code: None, message }),
        }
    }
    Ok((samples, problems))
}

/// Write a corpus as canonical JSONL.
pub fn write_corpus(path: impl AsRef<Path>, corpus: &[Sample]) -> Result<(), IoError> {
    let mut out = String::new();
    for sample in corpus {
        out.push_str(&sample_to_json(sample));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Reference selection and statistics
// ---------------------------------------------------------------------------

/// Pick the reference with the most extracted edits; ties go to the first.
pub fn select_reference<'a>(source: &str, refs: &'a [String]) -> Result<&'a str, IoError> {
    let mut best: Option<(&str, usize)> = None;
    for r in refs {
        let count = extract_edits(source, r).edits.len();
        match best {
            Some((_, best_count)) if count <= best_count => {}
            _ => best = Some((r, count)),
        }
    }
    best.map(|(r, _)| r).ok_or(IoError::EmptyReferences)
}

/// Sentence count, mean explanations per sentence, and mean source length
/// in code points.
pub fn corpus_stats(corpus: &[Sample]) -> Result<DatasetStats, IoError> {
    if corpus.is_empty() {
        return Err(IoError::EmptyCorpus);
    }
    let n = corpus.len() as f64;
    let edits: usize = corpus.iter().map(|s| s.explanations.len()).sum();
    let chars: usize = corpus.iter().map(|s| char_len(&s.source)).sum();
    Ok(DatasetStats {
        sentence_count: corpus.len(),
        edits_per_sentence: edits as f64 / n,
        chars_per_sentence: chars as f64 / n,
    })
}

// ---------------------------------------------------------------------------
// Linearization
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CorrectionInput<'a> {
    source: &'a str,
}

#[derive(Serialize)]
struct CorrectionOutput<'a> {
    target: &'a str,
}

#[derive(Serialize)]
struct ExplanationInput<'a> {
    edits: Vec<EditWire>,
    source: &'a str,
    target: &'a str,
}

#[derive(Serialize)]
struct ExplanationsValue {
    explanations: Vec<ExplanationWire>,
}

#[derive(Serialize)]
struct PreCorrectionInput<'a> {
    explanations: Vec<ExplanationWire>,
    source: &'a str,
}

/// Canonical correction-stage input payload for a source sentence.
pub fn correction_input(source: &str) -> String {
    canonical_json(&CorrectionInput { source })
}

/// Canonical explanation-stage input payload: the sentence pair plus the
/// locally extracted, merged edits.
pub fn explanation_input(source: &str, target: &str, edits: &[Edit]) -> String {
    canonical_json(&ExplanationInput {
        edits: edits.iter().map(EditWire::from).collect(),
        source,
        target,
    })
}

fn explanations_output(explanations: &[EditWiseExplanation]) -> String {
    canonical_json(&ExplanationsValue {
        explanations: explanations.iter().map(ExplanationWire::from).collect(),
    })
}

/// Linearize a sample for correct-then-explain training: first correct the
/// source, then explain conditioned on the target and the extracted edits.
pub fn linearize_post(sample: &Sample) -> [LinearizedRecord; 2] {
    let merged = merge_adjacent(
        &extract_edits(&sample.source, &sample.target),
        DEFAULT_MERGE_GAP,
    );
    [
        LinearizedRecord {
            stage: Stage::Correction,
            input_payload: correction_input(&sample.source),
            expected_output_payload: canonical_json(&CorrectionOutput { target: &sample.target }),
        },
        LinearizedRecord {
            stage: Stage::Explanation,
            input_payload: explanation_input(&sample.source, &sample.target, &merged.edits),
            expected_output_payload: explanations_output(&sample.explanations),
        },
    ]
}

/// Linearize a sample for explain-then-correct training: the stage order
/// is the converse of [`linearize_post`], with identical explanation
/// objects.
pub fn linearize_pre(sample: &Sample) -> [LinearizedRecord; 2] {
    [
        LinearizedRecord {
            stage: Stage::Explanation,
            input_payload: correction_input(&sample.source),
            expected_output_payload: explanations_output(&sample.explanations),
        },
        LinearizedRecord {
            stage: Stage::Correction,
            input_payload: canonical_json(&PreCorrectionInput {
                explanations: sample.explanations.iter().map(ExplanationWire::from).collect(),
                source: &sample.source,
            }),
            expected_output_payload: canonical_json(&CorrectionOutput { target: &sample.target }),
        },
    ]
}

/// Training-file line for one linearized record.
#[derive(Serialize, Deserialize)]
pub struct TrainingLine {
    pub input: String,
    pub output: String,
    pub stage: Stage,
}

impl From<&LinearizedRecord> for TrainingLine {
    fn from(r: &LinearizedRecord) -> Self {
        TrainingLine {
            input: r.input_payload.clone(),
            output: r.expected_output_payload.clone(),
            stage: r.stage,
        }
    }
}

// ---------------------------------------------------------------------------
// Model output parsing
// ---------------------------------------------------------------------------

/// Parse a raw model completion for the given stage.
///
/// Any prose or code-fence wrapper around the JSON is ignored: the first
/// balanced top-level JSON value that parses wins. Unknown keys are
/// ignored; missing required keys or wrong types are schema violations
/// reported with the JSON pointer of the first offending location.
pub fn parse_model_output(text: &str, stage: Stage) -> Result<ParsedOutput, IoError> {
    let value = first_json_value(text).ok_or(IoError::NoJsonFound)?;
    match stage {
        Stage::Correction => {
            let target = require_str(&value, "/target", stage)?;
            Ok(ParsedOutput::Correction { target })
        }
        Stage::Explanation => {
            let list = value
                .get("explanations")
                .ok_or_else(|| violation(stage, "/explanations", "missing key"))?;
            let items = list
                .as_array()
                .ok_or_else(|| violation(stage, "/explanations", "expected an array"))?;
            let mut out = Vec::with_capacity(items.len());
            for (i, item) in items.iter().enumerate() {
                let at = |field: &str| format!("/explanations/{i}/{field}");
                let get_str = |field: &str| -> Result<String, IoError> {
                    item.get(field)
                        .ok_or_else(|| violation(stage, &at(field), "missing key"))?
                        .as_str()
                        .map(str::to_string)
                        .ok_or_else(|| violation(stage, &at(field), "expected a string"))
                };
                let severity = item
                    .get("severity")
                    .ok_or_else(|| violation(stage, &at("severity"), "missing key"))?
                    .as_i64()
                    .ok_or_else(|| violation(stage, &at("severity"), "expected an integer"))?;
                out.push(ExplanationPayload {
                    error_type_major: get_str("error_type_major")?,
                    error_type_minor: get_str("error_type_minor")?,
                    severity,
                    description: get_str("description")?,
                });
            }
            Ok(ParsedOutput::Explanations(out))
        }
    }
}

fn violation(stage: Stage, pointer: &str, message: &str) -> IoError {
    IoError::SchemaViolation {
        stage,
        pointer: pointer.to_string(),
        message: message.to_string(),
    }
}

fn require_str(value: &Value, pointer: &str, stage: Stage) -> Result<String, IoError> {
    let key = pointer.trim_start_matches('/');
    value
        .get(key)
        .ok_or_else(|| violation(stage, pointer, "missing key"))?
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| violation(stage, pointer, "expected a string"))
}

/// First balanced JSON object or array anywhere in the text, if any
/// candidate parses.
fn first_json_value(text: &str) -> Option<Value> {
    for (i, c) in text.char_indices() {
        if c == '{' || c == '[' {
            let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
            if let Some(Ok(v)) = stream.next() {
                return Some(v);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy;

    fn sample() -> Sample {
        let source = "他是一个很好老师";
        let target = "他是一位很好的老师";
        let edits = extract_edits(source, target).edits;
        Sample {
            id: "t1".to_string(),
            source: source.to_string(),
            target: target.to_string(),
            explanations: edits
                .into_iter()
                .map(|edit| EditWiseExplanation {
                    edit,
                    error_type_major: "Word-level Error".to_string(),
                    error_type_minor: "词语误用".to_string(),
                    severity: 2,
                    description: "【个】应改为{位}。量词使用不当。建议修改。".to_string(),
                })
                .collect(),
            provenance: Some("unit".to_string()),
        }
    }

    #[test]
    fn canonical_json_sorts_keys_and_stays_compact() {
        let v: Value = serde_json::from_str(r#"{"b":1,"a":{"d":2,"c":[3,4]}}"#).unwrap();
        assert_eq!(canonical_json(&v), r#"{"a":{"c":[3,4],"d":2},"b":1}"#);
    }

    #[test]
    fn sample_round_trips_field_for_field() {
        let s = sample();
        let line = sample_to_json(&s);
        let back = sample_from_json(&line).unwrap();
        assert_eq!(back, s);
        // and the serialization is byte-stable
        assert_eq!(sample_to_json(&back), line);
    }

    #[test]
    fn sample_json_key_order_is_pinned() {
        let line = sample_to_json(&sample());
        let exp_keys = ["\"description\"", "\"error_type_major\"", "\"error_type_minor\"",
            "\"severity\"", "\"src\"", "\"src_text\"", "\"tgt\"", "\"tgt_text\""];
        let mut last = 0;
        for k in exp_keys {
            let pos = line.find(k).unwrap_or_else(|| panic!("missing key {k}"));
            assert!(pos > last, "{k} out of order in {line}");
            last = pos;
        }
        assert!(line.starts_with("{\"explanations\":"));
    }

    #[test]
    fn spans_rederived_when_absent() {
        let line = r#"{"id":"x","source":"我去学校","target":"我去了学校","explanations":[{"description":"词语丢失。句子欠通顺。应当补充。","error_type_major":"Word-level Error","error_type_minor":"词语丢失","severity":2}]}"#;
        let s = sample_from_json(line).unwrap();
        assert_eq!(s.explanations.len(), 1);
        let e = &s.explanations[0].edit;
        assert_eq!((e.src_start, e.src_end), (2, 2));
        assert_eq!(e.tgt_text, "了");
        assert!(validate_sample(&s).is_valid());
    }

    #[test]
    fn rederive_count_mismatch_is_an_error() {
        let line = r#"{"id":"x","source":"我去学校","target":"我去了学校","explanations":[{"description":"一","error_type_major":"Other","error_type_minor":"Other","severity":2},{"description":"二","error_type_major":"Other","error_type_minor":"Other","severity":2}]}"#;
        assert!(sample_from_json(line).is_err());
    }

    #[test]
    fn loader_collects_problems_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let mut bad = sample();
        bad.explanations[0].severity = 0;
        let good = sample();
        std::fs::write(
            &path,
            format!("{}\n{}\n", sample_to_json(&bad), sample_to_json(&good)),
        )
        .unwrap();
        match load_corpus(&path) {
            Err(IoError::InvalidCorpus(problems)) => {
                assert_eq!(problems.len(), 1);
                assert_eq!(problems[0].line, 1);
                assert!(problems[0].message.contains("SEVERITY_RANGE"));
            }
            other => panic!("expected InvalidCorpus, got {other:?}"),
        }
        // the tolerant loader downgrades it to a warning
        let (samples, warnings) = load_corpus_tolerant(&path).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn empty_file_is_an_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(load_corpus(&path).unwrap().is_empty());
    }

    #[test]
    fn two_line_file_loads_two_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("two.jsonl");
        write_corpus(&path, &[sample(), sample()]).unwrap();
        assert_eq!(load_corpus(&path).unwrap().len(), 2);
    }

    #[test]
    fn reference_with_most_edits_wins() {
        let source = "abcdef".to_string();
        let refs = vec![
            "Xbcdef".to_string(),        // 1 edit
            "XbYdeZ".to_string(),        // 3 edits
            "XbcdeZ".to_string(),        // 2 edits
        ];
        assert_eq!(select_reference(&source, &refs).unwrap(), "XbYdeZ");
        // single ref
        assert_eq!(select_reference(&source, &refs[..1]).unwrap(), "Xbcdef");
        // tie goes to the first
        let tied = vec!["XbcdeZ".to_string(), "AbcdeB".to_string()];
        assert_eq!(select_reference(&source, &tied).unwrap(), "XbcdeZ");
        assert!(matches!(select_reference(&source, &[]), Err(IoError::EmptyReferences)));
    }

    #[test]
    fn stats_hand_example() {
        let mut a = sample();
        a.source = "0123456789".to_string();
        a.target = a.source.clone();
        a.explanations.truncate(1);
        a.explanations[0].edit = Edit {
            src_start: 0,
            src_end: 1,
            src_text: "0".into(),
            tgt_start: 0,
            tgt_end: 1,
            tgt_text: "0".into(),
        };
        let mut b = a.clone();
        b.source = "01234567890123456789".to_string();
        b.explanations = vec![
            a.explanations[0].clone(),
            a.explanations[0].clone(),
            a.explanations[0].clone(),
        ];
        let stats = corpus_stats(&[a, b]).unwrap();
        assert_eq!(stats.sentence_count, 2);
        assert_eq!(stats.edits_per_sentence, 2.0);
        assert_eq!(stats.chars_per_sentence, 15.0);
        assert!(matches!(corpus_stats(&[]), Err(IoError::EmptyCorpus)));
    }

    #[test]
    fn post_linearization_shapes() {
        let s = sample();
        let [r1, r2] = linearize_post(&s);
        assert_eq!(r1.stage, Stage::Correction);
        assert_eq!(r1.input_payload, r#"{"source":"他是一个很好老师"}"#);
        assert_eq!(r1.expected_output_payload, r#"{"target":"他是一位很好的老师"}"#);
        assert_eq!(r2.stage, Stage::Explanation);
        // the two source-side edits (gap 2) stay separate after merging
        let input: Value = serde_json::from_str(&r2.input_payload).unwrap();
        assert_eq!(input["edits"].as_array().unwrap().len(), 2);
        let output: Value = serde_json::from_str(&r2.expected_output_payload).unwrap();
        assert_eq!(output["explanations"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn post_linearization_merges_close_edits() {
        // gap-1 edits collapse into one edit in the explanation input
        let source = "abcdefg";
        let target = "abcDeFg";
        let merged = merge_adjacent(&extract_edits(source, target), DEFAULT_MERGE_GAP);
        let s = Sample {
            id: "m".to_string(),
            source: source.to_string(),
            target: target.to_string(),
            explanations: merged
                .edits
                .iter()
                .map(|edit| EditWiseExplanation {
                    edit: edit.clone(),
                    error_type_major: taxonomy::OTHER.to_string(),
                    error_type_minor: taxonomy::OTHER.to_string(),
                    severity: 3,
                    description: "合并示例。前后相邻。一并说明。".to_string(),
                })
                .collect(),
            provenance: None,
        };
        let [_, r2] = linearize_post(&s);
        let input: Value = serde_json::from_str(&r2.input_payload).unwrap();
        assert_eq!(input["edits"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn zero_edit_sample_linearizes_to_identity() {
        let s = Sample {
            id: "z".to_string(),
            source: "他喜欢苹果".to_string(),
            target: "他喜欢苹果".to_string(),
            explanations: vec![],
            provenance: None,
        };
        let [r1, r2] = linearize_post(&s);
        assert!(r1.expected_output_payload.contains("他喜欢苹果"));
        assert_eq!(r2.expected_output_payload, r#"{"explanations":[]}"#);
        let [p1, _] = linearize_pre(&s);
        assert_eq!(p1.expected_output_payload, r#"{"explanations":[]}"#);
    }

    #[test]
    fn pre_linearization_mirrors_post() {
        let s = sample();
        let [post1, post2] = linearize_post(&s);
        let [pre1, pre2] = linearize_pre(&s);
        assert_eq!(pre1.stage, Stage::Explanation);
        assert_eq!(pre2.stage, Stage::Correction);
        // same explanation objects, opposite stage order
        assert_eq!(pre1.expected_output_payload, post2.expected_output_payload);
        assert_eq!(pre2.expected_output_payload, post1.expected_output_payload);
        assert_eq!(pre1.input_payload, post1.input_payload);
        // pre correction input embeds the explanations
        let input: Value = serde_json::from_str(&pre2.input_payload).unwrap();
        assert_eq!(input["explanations"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn parse_exact_schema_json() {
        let out = parse_model_output(r#"{"target":"他是好老师"}"#, Stage::Correction).unwrap();
        assert_eq!(out, ParsedOutput::Correction { target: "他是好老师".to_string() });
    }

    #[test]
    fn parse_json_wrapped_in_prose() {
        let text = "Here is the corrected result:\n```json\n{\"target\":\"他是好老师\"}\n```\nDone.";
        let out = parse_model_output(text, Stage::Correction).unwrap();
        assert_eq!(out, ParsedOutput::Correction { target: "他是好老师".to_string() });
    }

    #[test]
    fn parse_no_json_at_all() {
        assert!(matches!(
            parse_model_output("no json at all", Stage::Correction),
            Err(IoError::NoJsonFound)
        ));
    }

    #[test]
    fn parse_explanations_with_unknown_keys() {
        let text = r#"{"explanations":[{"description":"说明。","error_type_major":"Word-level Error","error_type_minor":"词语误用","severity":3,"confidence":0.9}],"extra":true}"#;
        match parse_model_output(text, Stage::Explanation).unwrap() {
            ParsedOutput::Explanations(list) => {
                assert_eq!(list.len(), 1);
                assert_eq!(list[0].severity, 3);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_schema_violation_carries_pointer() {
        let text = r#"{"explanations":[{"description":"ok","error_type_major":"x","error_type_minor":"y","severity":"high"}]}"#;
        match parse_model_output(text, Stage::Explanation) {
            Err(IoError::SchemaViolation { pointer, .. }) => {
                assert_eq!(pointer, "/explanations/0/severity");
            }
            other => panic!("unexpected {other:?}"),
        }
        match parse_model_output(r#"{"answer":1}"#, Stage::Correction) {
            Err(IoError::SchemaViolation { pointer, .. }) => assert_eq!(pointer, "/target"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn first_balanced_value_wins() {
        // an earlier balanced value that parses is taken, even if it then
        // fails the schema — the contract is positional
        let text = "prefix {\"target\":\"A\"} suffix {\"target\":\"B\"}";
        let out = parse_model_output(text, Stage::Correction).unwrap();
        assert_eq!(out, ParsedOutput::Correction { target: "A".to_string() });
        // unbalanced braces before the real value are skipped
        let text = "oops { not json {\"target\":\"C\"}";
        let out = parse_model_output(text, Stage::Correction).unwrap();
        assert_eq!(out, ParsedOutput::Correction { target: "C".to_string() });
    }
}
