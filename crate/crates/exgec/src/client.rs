//! Model endpoint contract and implementations.
//!
//! The transport is a chat-completion-style JSON request/response:
//! request `{model, messages, ...decoding params}`, response `{text}`.
//! Implementations must be stateless between calls, honor the per-call
//! decoding parameters, and be safe for concurrent use.

use crate::io::Stage;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

/// Environment variable holding the bearer token for HTTP endpoints.
pub const API_KEY_ENV: &str = "EXGEC_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Endpoint { status: u16, body: String },
}

/// One chat message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

/// Per-call decoding parameters: beam search for corrections, top-p
/// sampling for explanations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum DecodingParams {
    Beam { beam_size: u32 },
    TopP { top_p: f64, temperature: f64 },
}

/// One completion request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub model: String,
    pub stage: Stage,
    pub messages: Vec<Message>,
    #[serde(flatten)]
    pub decoding: DecodingParams,
    pub max_new_tokens: u32,
}

impl CompletionRequest {
    /// Content of the single user message, which carries the canonical
    /// JSON task payload.
    pub fn payload(&self) -> &str {
        self.messages
            .last()
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

/// A completion endpoint. `complete` must be stateless between calls and
/// callable concurrently.
pub trait ModelClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError>;
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

/// HTTP implementation of the endpoint contract. The bearer token, when
/// needed, comes from [`API_KEY_ENV`].
pub struct HttpModelClient {
    endpoint: String,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpModelClient {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpModelClient {
            endpoint: endpoint.into(),
            api_key: std::env::var(API_KEY_ENV).ok(),
            http: reqwest::blocking::Client::new(),
        }
    }
}

impl ModelClient for HttpModelClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        let mut call = self.http.post(&self.endpoint).json(request);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call
            .send()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = response.status();
        let body = response
            .text()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ClientError::Endpoint { status: status.as_u16(), body });
        }
        let parsed: CompletionResponse = serde_json::from_str(&body)
            .map_err(|e| ClientError::Transport(format!("malformed response body: {e}")))?;
        Ok(parsed.text)
    }
}

/// In-process scripted client for offline tests and examples.
///
/// Responses are queued per request payload (the user-message content),
/// so concurrent batch runs stay deterministic: each source sentence
/// produces a distinct payload and collects its own scripted responses.
/// A request whose queue is missing or exhausted fails the call.
#[derive(Default)]
pub struct ScriptedClient {
    responses: Mutex<HashMap<String, Vec<String>>>,
    correction_calls: AtomicUsize,
    explanation_calls: AtomicUsize,
}

impl ScriptedClient {
    pub fn new() -> Self {
        Self::default()
    }

    /// Queue a response for requests whose payload equals `payload`.
    /// Responses for the same payload are consumed in push order.
    pub fn respond(&self, payload: impl Into<String>, response: impl Into<String>) -> &Self {
        let mut map = self.responses.lock().unwrap();
        map.entry(payload.into()).or_default().push(response.into());
        self
    }

    pub fn correction_calls(&self) -> usize {
        self.correction_calls.load(Ordering::SeqCst)
    }

    pub fn explanation_calls(&self) -> usize {
        self.explanation_calls.load(Ordering::SeqCst)
    }

    pub fn total_calls(&self) -> usize {
        self.correction_calls() + self.explanation_calls()
    }
}

impl ModelClient for ScriptedClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ClientError> {
        match request.stage {
            Stage::Correction => self.correction_calls.fetch_add(1, Ordering::SeqCst),
            Stage::Explanation => self.explanation_calls.fetch_add(1, Ordering::SeqCst),
        };
        let mut map = self.responses.lock().unwrap();
        let queue = map
            .get_mut(request.payload())
            .filter(|q| !q.is_empty())
            .ok_or_else(|| {
                ClientError::Transport(format!(
                    "script exhausted for payload {:?}",
                    request.payload()
                ))
            })?;
        Ok(queue.remove(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(stage: Stage, payload: &str) -> CompletionRequest {
        CompletionRequest {
            model: "test-model".to_string(),
            stage,
            messages: vec![Message { role: "user".to_string(), content: payload.to_string() }],
            decoding: match stage {
                Stage::Correction => DecodingParams::Beam { beam_size: 5 },
                Stage::Explanation => DecodingParams::TopP { top_p: 0.8, temperature: 0.7 },
            },
            max_new_tokens: 128,
        }
    }

    #[test]
    fn scripted_responses_pop_in_order() {
        let client = ScriptedClient::new();
        client.respond("p", "first").respond("p", "second");
        let req = request(Stage::Correction, "p");
        assert_eq!(client.complete(&req).unwrap(), "first");
        assert_eq!(client.complete(&req).unwrap(), "second");
        assert!(client.complete(&req).is_err());
        assert_eq!(client.correction_calls(), 3);
    }

    #[test]
    fn stage_counters_are_separate() {
        let client = ScriptedClient::new();
        client.respond("a", "x").respond("b", "y");
        client.complete(&request(Stage::Correction, "a")).unwrap();
        client.complete(&request(Stage::Explanation, "b")).unwrap();
        assert_eq!(client.correction_calls(), 1);
        assert_eq!(client.explanation_calls(), 1);
        assert_eq!(client.total_calls(), 2);
    }

    #[test]
    fn request_serializes_with_flattened_decoding() {
        let req = request(Stage::Explanation, "payload");
        let v: serde_json::Value = serde_json::to_value(&req).unwrap();
        assert_eq!(v["top_p"], 0.8);
        assert_eq!(v["temperature"], 0.7);
        assert_eq!(v["stage"], "explanation");
        assert!(v.get("beam_size").is_none());
    }
}
