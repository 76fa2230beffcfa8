//! HTTP adapter for completion endpoints that report token logprobs.
//!
//! Wire contract (the only place this dialect is known; alternate dialects
//! are new adapters, not engine changes):
//!
//! Request: `POST {endpoint}` with JSON body
//! ```json
//! {"model": "...", "prompt": "...", "max_tokens": 256,
//!  "temperature": 0.0, "logprobs": 5}
//! ```
//! `Authorization: Bearer <key>` is attached when the descriptor carries a
//! key. Field order is fixed, so request bodies are byte-stable for
//! record/replay fixtures.
//!
//! Response: JSON with at least
//! ```json
//! {"choices": [{"text": "...", "finish_reason": "stop",
//!   "logprobs": {"top_logprobs": [{"yes": -0.5, "no": -1.5}]}}]}
//! ```
//! `choices[0].logprobs.top_logprobs` must hold one token→logprob map per
//! generated position. Logprobs are transported exactly as received — no
//! renormalization — and values above zero are protocol errors, not
//! silent clamps.
//!
//! Transport failures (connect, timeout, HTTP 408/429/5xx) are retried up
//! to `max_retries` times with exponential backoff; malformed replies and
//! other HTTP statuses are protocol errors and never retried.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    ensure_prompt, truncate_top, BackendDescriptor, CompletionBackend, CompletionResult,
    FinishReason, GatewayError,
};

#[derive(Debug, Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    max_tokens: u32,
    temperature: f64,
    logprobs: u32,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Debug, Deserialize)]
struct WireChoice {
    text: String,
    #[serde(default)]
    finish_reason: Option<String>,
    logprobs: Option<WireLogprobs>,
}

#[derive(Debug, Deserialize)]
struct WireLogprobs {
    top_logprobs: Vec<BTreeMap<String, f64>>,
}

/// Serialized request body for a prompt, byte-stable per descriptor.
pub fn build_request_body(descriptor: &BackendDescriptor, prompt: &str) -> Vec<u8> {
    serde_json::to_vec(&WireRequest {
        model: &descriptor.model_id,
        prompt,
        max_tokens: descriptor.max_tokens,
        temperature: descriptor.temperature,
        logprobs: descriptor.top_logprobs,
    })
    .expect("wire request serializes")
}

/// Parses a response body into a validated [`CompletionResult`].
pub fn parse_response_body(
    descriptor: &BackendDescriptor,
    body: &str,
) -> Result<CompletionResult, GatewayError> {
    let parsed: WireResponse = serde_json::from_str(body)
        .map_err(|e| GatewayError::Protocol(format!("unparseable response body: {e}")))?;
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| GatewayError::Protocol("response carries no choices".into()))?;
    let logprobs = choice.logprobs.ok_or_else(|| {
        GatewayError::Protocol("response misses choices[0].logprobs.top_logprobs".into())
    })?;
    let finish_reason = match choice.finish_reason.as_deref() {
        Some("stop") | None => FinishReason::Stop,
        Some("length") => FinishReason::Length,
        Some(_) => FinishReason::Error,
    };
    let result = CompletionResult {
        text: choice.text,
        token_logprobs: logprobs
            .top_logprobs
            .iter()
            .map(|m| truncate_top(m, descriptor.top_logprobs as usize))
            .collect(),
        finish_reason,
    };
    result.validate()?;
    Ok(result)
}

/// Blocking HTTP client for one backend.
pub struct HttpClient {
    descriptor: BackendDescriptor,
    client: reqwest::blocking::Client,
}

impl HttpClient {
    pub fn new(descriptor: &BackendDescriptor) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(descriptor.request_timeout_ms))
            .build()
            .map_err(|e| GatewayError::Configuration(format!("http client: {e}")))?;
        Ok(Self { descriptor: descriptor.clone(), client })
    }

    fn send_once(&self, body: &[u8]) -> Result<String, GatewayError> {
        let mut request = self
            .client
            .post(&self.descriptor.endpoint)
            .header("content-type", "application/json")
            .body(body.to_vec());
        if let Some(key) = &self.descriptor.api_key {
            request = request.header("authorization", format!("Bearer {key}"));
        }
        let response = request
            .send()
            .map_err(|e| GatewayError::Transport { message: e.to_string(), attempts: 1 })?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| GatewayError::Transport { message: e.to_string(), attempts: 1 })?;
        if status.is_success() {
            return Ok(text);
        }
        let message = format!("http {status}: {}", text.chars().take(200).collect::<String>());
        if status.as_u16() == 408 || status.as_u16() == 429 || status.is_server_error() {
            Err(GatewayError::Transport { message, attempts: 1 })
        } else {
            Err(GatewayError::Protocol(message))
        }
    }
}

impl CompletionBackend for HttpClient {
    fn name(&self) -> &str {
        &self.descriptor.name
    }

    fn complete(&self, prompt: &str) -> Result<CompletionResult, GatewayError> {
        ensure_prompt(prompt)?;
        let body = build_request_body(&self.descriptor, prompt);
        let mut last_transport = String::new();
        for attempt in 0..=self.descriptor.max_retries {
            match self.send_once(&body) {
                Ok(text) => return parse_response_body(&self.descriptor, &text),
                Err(GatewayError::Transport { message, .. }) => {
                    last_transport = message;
                    if attempt < self.descriptor.max_retries {
                        std::thread::sleep(Duration::from_millis(50 << attempt));
                    }
                }
                Err(other) => return Err(other),
            }
        }
        Err(GatewayError::Transport {
            message: last_transport,
            attempts: self.descriptor.max_retries + 1,
        })
    }
}

pub(super) fn factory(
    descriptor: &BackendDescriptor,
) -> Result<Box<dyn CompletionBackend>, GatewayError> {
    Ok(Box::new(HttpClient::new(descriptor)?))
}
