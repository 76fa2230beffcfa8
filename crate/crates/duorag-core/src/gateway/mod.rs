//! Uniform interface to text-completion backends that expose per-token
//! log-probabilities.
//!
//! Adapters implement [`CompletionBackend`] and are registered by name;
//! [`build_backend`] selects one at runtime from the descriptor (the
//! `scripted` endpoint literal picks the deterministic test adapter,
//! anything else the HTTP adapter, unless `adapter` forces a choice).

mod http;
mod scripted;

pub use http::{build_request_body, parse_response_body, HttpClient};
pub use scripted::{PromptMatcher, ScriptedBehavior, ScriptedClient, ScriptedRule};

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// Retryable transport failure; carries the attempt count actually used.
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    /// Malformed backend reply; never retried.
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("backend configuration error: {0}")]
    Configuration(String),
    #[error("completion carried no generated positions")]
    EmptyCompletion,
}

/// Where and how to reach one completion backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    /// Base URL of the completion endpoint, or the literal `"scripted"`.
    pub endpoint: String,
    pub model_id: String,
    #[serde(default = "defaults::request_timeout_ms")]
    pub request_timeout_ms: u64,
    #[serde(default = "defaults::max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub temperature: f64,
    /// How many alternatives per position to request; confidence scoring
    /// needs at least the chosen token, so this is >= 1.
    #[serde(default = "defaults::top_logprobs")]
    pub top_logprobs: u32,
    /// Transport errors are retried up to this many extra attempts.
    #[serde(default = "defaults::max_retries")]
    pub max_retries: u32,
    /// Rules file for the scripted adapter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    /// Registered adapter to use; inferred from the endpoint when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adapter: Option<String>,
}

mod defaults {
    pub fn request_timeout_ms() -> u64 {
        30_000
    }
    pub fn max_tokens() -> u32 {
        256
    }
    pub fn top_logprobs() -> u32 {
        5
    }
    pub fn max_retries() -> u32 {
        2
    }
}

impl BackendDescriptor {
    /// Minimal scripted descriptor for tests and fixtures.
    pub fn scripted(name: &str) -> Self {
        Self {
            name: name.to_string(),
            endpoint: "scripted".to_string(),
            model_id: name.to_string(),
            request_timeout_ms: defaults::request_timeout_ms(),
            max_tokens: defaults::max_tokens(),
            temperature: 0.0,
            top_logprobs: defaults::top_logprobs(),
            max_retries: defaults::max_retries(),
            script: None,
            api_key: None,
            adapter: None,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.endpoint.is_empty() {
            return Err(GatewayError::Configuration(format!(
                "backend {:?} has an empty endpoint",
                self.name
            )));
        }
        if self.top_logprobs < 1 {
            return Err(GatewayError::Configuration(format!(
                "backend {:?}: top_logprobs must be >= 1",
                self.name
            )));
        }
        if !(self.temperature >= 0.0) {
            return Err(GatewayError::Configuration(format!(
                "backend {:?}: temperature must be >= 0",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

/// Generated text plus per-position top-K token log-probabilities
/// (natural log, each <= 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub token_logprobs: Vec<BTreeMap<String, f64>>,
    pub finish_reason: FinishReason,
}

impl CompletionResult {
    /// Position 0's map, unmodified.
    pub fn first_position_logprobs(&self) -> Result<&BTreeMap<String, f64>, GatewayError> {
        self.token_logprobs.first().ok_or(GatewayError::EmptyCompletion)
    }

    /// Checks the logprob invariants: values <= 0 and per-position
    /// probability mass <= 1 + 1e-6. Violations are protocol errors.
    pub fn validate(&self) -> Result<(), GatewayError> {
        for (pos, map) in self.token_logprobs.iter().enumerate() {
            let mut mass = 0.0_f64;
            for (token, lp) in map {
                if !(*lp <= 0.0) {
                    return Err(GatewayError::Protocol(format!(
                        "position {pos}: logprob {lp} for token {token:?} exceeds 0"
                    )));
                }
                mass += lp.exp();
            }
            if mass > 1.0 + 1e-6 {
                return Err(GatewayError::Protocol(format!(
                    "position {pos}: probability mass {mass} exceeds 1"
                )));
            }
        }
        Ok(())
    }
}

/// Keeps the `limit` highest-probability entries; ties resolve to the
/// lexicographically smaller token.
pub(crate) fn truncate_top(map: &BTreeMap<String, f64>, limit: usize) -> BTreeMap<String, f64> {
    if map.len() <= limit {
        return map.clone();
    }
    let mut entries: Vec<(&String, &f64)> = map.iter().collect();
    entries.sort_by(|a, b| b.1.total_cmp(a.1).then_with(|| a.0.cmp(b.0)));
    entries.into_iter().take(limit).map(|(t, lp)| (t.clone(), *lp)).collect()
}

/// A completion backend usable concurrently from multiple sessions.
pub trait CompletionBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<CompletionResult, GatewayError>;
}

type AdapterFactory =
    fn(&BackendDescriptor) -> Result<Box<dyn CompletionBackend>, GatewayError>;

fn adapters() -> &'static RwLock<BTreeMap<String, AdapterFactory>> {
    static REGISTRY: OnceLock<RwLock<BTreeMap<String, AdapterFactory>>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut map: BTreeMap<String, AdapterFactory> = BTreeMap::new();
        map.insert("scripted".into(), scripted::factory as AdapterFactory);
        map.insert("http".into(), http::factory as AdapterFactory);
        RwLock::new(map)
    })
}

/// Registers an adapter under a name, replacing any previous registration.
pub fn register_adapter(name: &str, factory: AdapterFactory) {
    adapters().write().expect("adapter registry poisoned").insert(name.to_string(), factory);
}

/// Registered adapter names, sorted.
pub fn adapter_names() -> Vec<String> {
    adapters().read().expect("adapter registry poisoned").keys().cloned().collect()
}

/// Builds the backend an engine should use for this descriptor.
pub fn build_backend(
    descriptor: &BackendDescriptor,
) -> Result<Box<dyn CompletionBackend>, GatewayError> {
    descriptor.validate()?;
    let kind = descriptor.adapter.clone().unwrap_or_else(|| {
        if descriptor.endpoint == "scripted" { "scripted".into() } else { "http".into() }
    });
    let factory = *adapters()
        .read()
        .expect("adapter registry poisoned")
        .get(&kind)
        .ok_or_else(|| GatewayError::Configuration(format!("unknown adapter {kind:?}")))?;
    factory(descriptor)
}

pub(crate) fn ensure_prompt(prompt: &str) -> Result<(), GatewayError> {
    if prompt.is_empty() {
        return Err(GatewayError::InvalidArgument("empty prompt".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_position_projects_position_zero() {
        let r = CompletionResult {
            text: "yes maybe".into(),
            token_logprobs: vec![
                [("yes".to_string(), -0.5)].into(),
                [("maybe".to_string(), -0.2)].into(),
                [("end".to_string(), -0.1)].into(),
            ],
            finish_reason: FinishReason::Stop,
        };
        let first = r.first_position_logprobs().unwrap();
        assert_eq!(first.len(), 1);
        assert_eq!(first["yes"], -0.5);
    }

    #[test]
    fn zero_positions_is_empty_completion_error() {
        let r = CompletionResult {
            text: String::new(),
            token_logprobs: vec![],
            finish_reason: FinishReason::Error,
        };
        assert!(matches!(r.first_position_logprobs(), Err(GatewayError::EmptyCompletion)));
    }

    #[test]
    fn validate_rejects_positive_logprob_and_excess_mass() {
        let mut r = CompletionResult {
            text: "x".into(),
            token_logprobs: vec![[("a".to_string(), 0.1)].into()],
            finish_reason: FinishReason::Stop,
        };
        assert!(matches!(r.validate(), Err(GatewayError::Protocol(_))));

        r.token_logprobs =
            vec![[("a".to_string(), -0.001), ("b".to_string(), -0.001)].into()];
        assert!(matches!(r.validate(), Err(GatewayError::Protocol(_))));
    }

    #[test]
    fn truncate_keeps_highest_probability_entries() {
        let map: BTreeMap<String, f64> =
            [("a".to_string(), -3.0), ("b".to_string(), -0.5), ("c".to_string(), -1.0)].into();
        let top = truncate_top(&map, 2);
        assert_eq!(top.len(), 2);
        assert!(top.contains_key("b") && top.contains_key("c"));
    }

    #[test]
    fn build_backend_selects_by_endpoint() {
        let desc = BackendDescriptor {
            script: Some(std::path::PathBuf::from("/nonexistent.json")),
            ..BackendDescriptor::scripted("d")
        };
        // scripted adapter selected, then fails on the missing rules file
        assert!(matches!(build_backend(&desc), Err(GatewayError::Configuration(_))));
        assert!(adapter_names().contains(&"http".to_string()));
    }
}
