//! Correct-then-explain decoding.
//!
//! The runner drives a model endpoint in two stages: request a correction
//! with beam decoding, extract and merge edits locally from the sentence
//! pair, then request explanations with top-p decoding conditioned on
//! those edits. Edit spans always come from local extraction — the model
//! explains edits by index and never invents spans. A source returned
//! unchanged ends the run after one call with no explanations.

use crate::client::{ClientError, CompletionRequest, DecodingParams, Message, ModelClient};
use crate::extract::{extract_edits, merge_adjacent, DEFAULT_MERGE_GAP};
use crate::io::{self, parse_model_output, IoError, ParsedOutput, Stage};
use crate::model::{Edit, EditWiseExplanation};
use serde::Serialize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;
use thiserror::Error;

/// Decoding regimes for the two stages plus the shared call limits.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize)]
#[serde(default)]
pub struct DecodingConfig {
    pub beam_size: u32,
    pub top_p: f64,
    pub temperature: f64,
    pub max_new_tokens: u32,
    pub retry_limit: u32,
}

impl Default for DecodingConfig {
    fn default() -> Self {
        DecodingConfig {
            beam_size: 5,
            top_p: 0.8,
            temperature: 0.7,
            max_new_tokens: 2048,
            retry_limit: 1,
        }
    }
}

impl DecodingConfig {
    pub fn validate(&self) -> Result<(), CoteError> {
        if self.beam_size < 1 {
            return Err(CoteError::InvalidConfig("beam_size must be at least 1".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(CoteError::InvalidConfig("top_p must be in (0, 1]".into()));
        }
        if self.temperature <= 0.0 {
            return Err(CoteError::InvalidConfig("temperature must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CoteError {
    #[error("invalid decoding config: {0}")]
    InvalidConfig(String),
    #[error("transport failure in {stage} stage: {source}")]
    Transport { stage: Stage, source: ClientError },
    #[error("{stage} output failed to parse after {attempts} attempts: {source}")]
    Parse { stage: Stage, attempts: u32, source: IoError },
}

/// One model call as recorded in the trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub stage: Stage,
    pub request: String,
    pub response: String,
    pub latency_ms: u64,
}

/// A failed run, with everything that happened before the failure.
#[derive(Debug)]
pub struct CoteFailure {
    pub error: CoteError,
    pub trace: Vec<TraceRecord>,
}

impl std::fmt::Display for CoteFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for CoteFailure {}

/// Successful correct-then-explain run.
#[derive(Debug, Clone)]
pub struct CoteResult {
    pub source: String,
    pub target: String,
    pub explanations: Vec<EditWiseExplanation>,
    /// Locally extracted edits the model returned no explanation for.
    /// Reported, never fabricated.
    pub unexplained_edits: Vec<Edit>,
    pub trace: Vec<TraceRecord>,
    pub correction_attempts: u32,
    pub explanation_attempts: u32,
}

struct StageRunner<'a> {
    client: &'a dyn ModelClient,
    config: &'a DecodingConfig,
    trace: Vec<TraceRecord>,
}

impl StageRunner<'_> {
    fn call(&mut self, stage: Stage, payload: &str) -> Result<String, CoteError> {
        let request = CompletionRequest {
            stage,
            messages: vec![Message { role: "user".to_string(), content: payload.to_string() }],
            decoding: match stage {
                Stage::Correction => DecodingParams::Beam { beam_size: self.config.beam_size },
                Stage::Explanation => DecodingParams::TopP {
                    top_p: self.config.top_p,
                    temperature: self.config.temperature,
                },
            },
            max_new_tokens: self.config.max_new_tokens,
        };
        let request_json = serde_json::to_string(&request).expect("request serializes");
        let started = Instant::now();
        let outcome = self.client.complete(&request);
        let latency_ms = started.elapsed().as_millis() as u64;
        let response = match &outcome {
            Ok(text) => text.clone(),
            Err(err) => format!("<error: {err}>"),
        };
        self.trace.push(TraceRecord { stage, request: request_json, response, latency_ms });
        outcome.map_err(|source| CoteError::Transport { stage, source })
    }

    /// Call and parse, retrying on parse failures up to the retry limit.
    /// Transport errors surface immediately.
    fn call_parsed(
        &mut self,
        stage: Stage,
        payload: &str,
    ) -> Result<(ParsedOutput, u32), CoteError> {
        let attempts_allowed = self.config.retry_limit + 1;
        let mut last_parse_error = None;
        for attempt in 1..=attempts_allowed {
            let raw = self.call(stage, payload)?;
            match parse_model_output(&raw, stage) {
                Ok(parsed) => return Ok((parsed, attempt)),
                Err(err) => last_parse_error = Some(err),
            }
        }
        Err(CoteError::Parse {
            stage,
            attempts: attempts_allowed,
            source: last_parse_error.expect("at least one attempt was made"),
        })
    }
}

/// Run correct-then-explain decoding for one source sentence.
pub fn run_cote(
    source: &str,
    client: &dyn ModelClient,
    config: &DecodingConfig,
) -> Result<CoteResult, CoteFailure> {
    if let Err(error) = config.validate() {
        return Err(CoteFailure { error, trace: Vec::new() });
    }
    let mut runner = StageRunner { client, config, trace: Vec::new() };

    let (parsed, correction_attempts) =
        match runner.call_parsed(Stage::Correction, &io::correction_input(source)) {
            Ok(ok) => ok,
            Err(error) => return Err(CoteFailure { error, trace: runner.trace }),
        };
    let target = match parsed {
        ParsedOutput::Correction { target } => target,
        ParsedOutput::Explanations(_) => unreachable!("correction stage parses to a correction"),
    };

    // unchanged source: done after a single call, nothing to explain
    if target == source {
        return Ok(CoteResult {
            source: source.to_string(),
            target,
            explanations: Vec::new(),
            unexplained_edits: Vec::new(),
            trace: runner.trace,
            correction_attempts,
            explanation_attempts: 0,
        });
    }

    let merged = merge_adjacent(&extract_edits(source, &target), DEFAULT_MERGE_GAP);
    let payload = io::explanation_input(source, &target, &merged.edits);
    let (parsed, explanation_attempts) = match runner.call_parsed(Stage::Explanation, &payload) {
        Ok(ok) => ok,
        Err(error) => return Err(CoteFailure { error, trace: runner.trace }),
    };
    let payloads = match parsed {
        ParsedOutput::Explanations(list) => list,
        ParsedOutput::Correction { .. } => unreachable!("explanation stage parses to explanations"),
    };

    // pair model explanations with local edits by index; surplus model
    // objects are dropped, unexplained edits are reported
    let mut explanations = Vec::new();
    let mut unexplained = Vec::new();
    let mut payloads = payloads.into_iter();
    for edit in merged.edits {
        match payloads.next() {
            Some(p) => explanations.push(EditWiseExplanation {
                edit,
                error_type_major: p.error_type_major,
                error_type_minor: p.error_type_minor,
                severity: p.severity,
                description: p.description,
            }),
            None => unexplained.push(edit),
        }
    }

    Ok(CoteResult {
        source: source.to_string(),
        target,
        explanations,
        unexplained_edits: unexplained,
        trace: runner.trace,
        correction_attempts,
        explanation_attempts,
    })
}

/// Run a batch of sources with a bounded number of in-flight requests.
///
/// Results come back in input order regardless of completion order, and a
/// failure on one item never disturbs the others.
pub fn run_cote_batch(
    sources: &[String],
    client: &dyn ModelClient,
    config: &DecodingConfig,
    parallelism: usize,
) -> Vec<Result<CoteResult, CoteFailure>> {
    let workers = parallelism.max(1).min(sources.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<CoteResult, CoteFailure>>>> =
        sources.iter().map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= sources.len() {
                    break;
                }
                let outcome = run_cote(&sources[index], client, config);
                *slots[index].lock().unwrap() = Some(outcome);
            });
        }
    });

    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every slot filled"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::client::ScriptedClient;

    const MODEL: &str = "mock";

    fn correction_response(target: &str) -> String {
        format!(r#"{{"target":"{target}"}}"#)
    }

    fn explanation_response(objects: &[(&str, &str, i64, &str)]) -> String {
        let items: Vec<String> = objects
            .iter()
            .map(|(major, minor, sev, desc)| {
                format!(
                    r#"{{"description":"{desc}","error_type_major":"{major}","error_type_minor":"{minor}","severity":{sev}}}"#
                )
            })
            .collect();
        format!(r#"{{"explanations":[{}]}}"#, items.join(","))
    }

    #[test]
    fn echoed_source_returns_after_one_call() {
        let source = "他喜欢苹果";
        let client = ScriptedClient::new();
        client.respond(io::correction_input(source), correction_response(source));
        let result = run_cote(source, &client, &DecodingConfig::default(), MODEL).unwrap();
        assert_eq!(result.target, source);
        assert!(result.explanations.is_empty());
        assert_eq!(client.total_calls(), 1);
        assert_eq!(client.explanation_calls(), 0);
        assert_eq!(result.trace.len(), 1);
    }

    #[test]
    fn explanation_edits_come_from_local_extraction() {
        let source = "我去学校";
        let target = "我去了学校";
        let client = ScriptedClient::new();
        client.respond(io::correction_input(source), correction_response(target));

        let merged = merge_adjacent(&extract_edits(source, target), DEFAULT_MERGE_GAP);
        client.respond(
            io::explanation_input(source, target, &merged.edits),
            explanation_response(&[(
                "Word-level Error",
                "词语丢失",
                2,
                "缺少助词。句子不通顺。应当补充。",
            )]),
        );

        let result = run_cote(source, &client, &DecodingConfig::default(), MODEL).unwrap();
        assert_eq!(result.target, target);
        assert_eq!(result.explanations.len(), 1);
        assert_eq!(result.explanations[0].edit, merged.edits[0]);
        assert!(result.unexplained_edits.is_empty());
        assert_eq!(client.total_calls(), 2);
    }

    #[test]
    fn malformed_explanations_retry_then_error_with_trace() {
        let source = "我去学校";
        let target = "我去了学校";
        let client = ScriptedClient::new();
        client.respond(io::correction_input(source), correction_response(target));
        let merged = merge_adjacent(&extract_edits(source, target), DEFAULT_MERGE_GAP);
        let payload = io::explanation_input(source, target, &merged.edits);
        client.respond(&payload, "not json at all");
        client.respond(&payload, "still not json");

        let config = DecodingConfig { retry_limit: 1, ..DecodingConfig::default() };
        let failure = run_cote(source, &client, &config, MODEL).unwrap_err();
        match &failure.error {
            CoteError::Parse { stage, attempts, .. } => {
                assert_eq!(*stage, Stage::Explanation);
                assert_eq!(*attempts, 2);
            }
            other => panic!("unexpected error {other:?}"),
        }
        // 1 correction + 2 explanation attempts in the trace
        assert_eq!(failure.trace.len(), 3);
        let explanation_records = failure
            .trace
            .iter()
            .filter(|r| r.stage == Stage::Explanation)
            .count();
        assert_eq!(explanation_records, 2);
    }

    #[test]
    fn surplus_model_objects_are_dropped_and_shortfalls_reported() {
        let source = "abcdefgh";
        let target = "AbcdefgH"; // two edits, src gap 6: stays two after merge
        let client = ScriptedClient::new();
        client.respond(io::correction_input(source), correction_response(target));
        let merged = merge_adjacent(&extract_edits(source, target), DEFAULT_MERGE_GAP);
        assert_eq!(merged.edits.len(), 2);

        // model returns one explanation for two edits
        client.respond(
            io::explanation_input(source, target, &merged.edits),
            explanation_response(&[("Other", "Other", 3, "只解释第一处。此处有误。应当修改。")]),
        );
        let result = run_cote(source, &client, &DecodingConfig::default(), MODEL).unwrap();
        assert_eq!(result.explanations.len(), 1);
        assert_eq!(result.unexplained_edits, vec![merged.edits[1].clone()]);

        // model returns three explanations for two edits
        let client = ScriptedClient::new();
        client.respond(io::correction_input(source), correction_response(target));
        client.respond(
            io::explanation_input(source, target, &merged.edits),
            explanation_response(&[
                ("Other", "Other", 3, "一。二。三。"),
                ("Other", "Other", 3, "一。二。三。"),
                ("Other", "Other", 3, "多余的解释。不对应任何编辑。应当丢弃。"),
            ]),
        );
        let result = run_cote(source, &client, &DecodingConfig::default(), MODEL).unwrap();
        assert_eq!(result.explanations.len(), 2);
        assert!(result.unexplained_edits.is_empty());
    }

    #[test]
    fn invalid_config_is_rejected_before_any_call() {
        let client = ScriptedClient::new();
        let config = DecodingConfig { top_p: 0.0, ..DecodingConfig::default() };
        let failure = run_cote("x", &client, &config, MODEL).unwrap_err();
        assert!(matches!(failure.error, CoteError::InvalidConfig(_)));
        assert_eq!(client.total_calls(), 0);
    }

    #[test]
    fn batch_preserves_order_and_isolates_failures() {
        let sources: Vec<String> = ["甲甲甲", "乙乙乙", "丙丙丙"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let client = ScriptedClient::new();
        // first and third succeed as echoes; second fails at correction
        client.respond(io::correction_input(&sources[0]), correction_response(&sources[0]));
        client.respond(io::correction_input(&sources[1]), "garbage");
        client.respond(io::correction_input(&sources[1]), "more garbage");
        client.respond(io::correction_input(&sources[2]), correction_response(&sources[2]));

        let config = DecodingConfig { retry_limit: 1, ..DecodingConfig::default() };
        let results = run_cote_batch(&sources, &client, &config, MODEL, 2);
        assert_eq!(results.len(), 3);
        assert_eq!(results[0].as_ref().unwrap().target, sources[0]);
        assert!(results[1].is_err());
        assert_eq!(results[2].as_ref().unwrap().target, sources[2]);
    }

    #[test]
    fn parallel_batch_equals_sequential_run() {
        let sources: Vec<String> = (0..8).map(|i| format!("句子{i}原文")).collect();
        let script = |client: &ScriptedClient| {
            for s in &sources {
                // echo every source twice (two independent runs)
                client.respond(io::correction_input(s), correction_response(s));
                client.respond(io::correction_input(s), correction_response(s));
            }
        };
        let client = ScriptedClient::new();
        script(&client);
        let sequential = run_cote_batch(&sources, &client, &DecodingConfig::default(), MODEL, 1);
        let parallel = run_cote_batch(&sources, &client, &DecodingConfig::default(), MODEL, 4);
        for (a, b) in sequential.iter().zip(&parallel) {
            let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
            assert_eq!(a.target, b.target);
            assert_eq!(a.explanations, b.explanations);
        }
    }
}
