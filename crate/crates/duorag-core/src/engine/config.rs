//! Declarative engine configuration: agent roles, thresholds, check token
//! sets, retrieval fan-out, and template pack. Loadable from TOML or JSON;
//! endpoint and credential fields can be overridden through environment
//! variables (`DUORAG_DETECTOR_ENDPOINT`, `DUORAG_RESOLVER_ENDPOINT`,
//! `DUORAG_DETECTOR_API_KEY`, `DUORAG_RESOLVER_API_KEY`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::gateway::BackendDescriptor;
use crate::scoring::{CheckConfig, Thresholds};

use super::EngineError;

/// The two agents. They may share one descriptor; which one is the
/// domain-tuned model is a property of the configured backends, not of
/// the engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRoles {
    pub detector: BackendDescriptor,
    pub resolver: BackendDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub roles: AgentRoles,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "CheckConfig::pre_check_default")]
    pub pre_check: CheckConfig,
    #[serde(default = "CheckConfig::post_check_default")]
    pub post_check: CheckConfig,
    /// Retrieval fan-out per round.
    #[serde(default = "defaults::top_k")]
    pub top_k: usize,
    /// Forces the post-check decision to stop after round one.
    #[serde(default)]
    pub single_round: bool,
    /// Template pack directory; the builtin pack when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_pack: Option<PathBuf>,
    /// Starting value of the per-session system-prompt cycling counter.
    #[serde(default)]
    pub system_prompt_seed: u64,
    /// Replace an existing memory entry instead of appending when the
    /// detector re-dissects a term it already explained.
    #[serde(default)]
    pub dedup_terms: bool,
    /// Upper bound on concurrently running sessions in the harness.
    #[serde(default = "defaults::parallelism")]
    pub parallelism: usize,
    /// Optional few-shot exemplars, prepended verbatim (separated by blank
    /// lines) before the final QA prompt.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exemplars: Vec<String>,
}

mod defaults {
    pub fn top_k() -> usize {
        1
    }
    pub fn parallelism() -> usize {
        1
    }
}

impl EngineConfig {
    /// Scripted-backend config with all defaults; handy for tests.
    pub fn scripted_defaults(detector: BackendDescriptor, resolver: BackendDescriptor) -> Self {
        Self {
            roles: AgentRoles { detector, resolver },
            thresholds: Thresholds::default(),
            pre_check: CheckConfig::pre_check_default(),
            post_check: CheckConfig::post_check_default(),
            top_k: defaults::top_k(),
            single_round: false,
            template_pack: None,
            system_prompt_seed: 0,
            dedup_terms: false,
            parallelism: defaults::parallelism(),
            exemplars: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.top_k < 1 {
            return Err(EngineError::Config("top_k must be >= 1".into()));
        }
        if self.parallelism < 1 {
            return Err(EngineError::Config("parallelism must be >= 1".into()));
        }
        self.roles.detector.validate()?;
        self.roles.resolver.validate()?;
        Ok(())
    }

    /// Loads from TOML (default) or JSON (`.json`), then applies the
    /// environment overrides.
    pub fn load(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: EngineConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)
                .map_err(|e| EngineError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text)
                .map_err(|e| EngineError::Config(format!("{}: {e}", path.display())))?
        };
        cfg.apply_env_overrides();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env_overrides(&mut self) {
        if let Ok(endpoint) = std::env::var("DUORAG_DETECTOR_ENDPOINT") {
            self.roles.detector.endpoint = endpoint;
        }
        if let Ok(endpoint) = std::env::var("DUORAG_RESOLVER_ENDPOINT") {
            self.roles.resolver.endpoint = endpoint;
        }
        if let Ok(key) = std::env::var("DUORAG_DETECTOR_API_KEY") {
            self.roles.detector.api_key = Some(key);
        }
        if let Ok(key) = std::env::var("DUORAG_RESOLVER_API_KEY") {
            self.roles.resolver.api_key = Some(key);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_fills_defaults() {
        let text = r#"
            [roles.detector]
            name = "generalist"
            endpoint = "scripted"
            model_id = "generalist"
            script = "detector.json"

            [roles.resolver]
            name = "expert"
            endpoint = "http://127.0.0.1:8080/v1/completions"
            model_id = "expert-8b"
        "#;
        let cfg: EngineConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.thresholds.delta1, -2.0);
        assert_eq!(cfg.thresholds.delta4, -3.0);
        assert_eq!(cfg.thresholds.max_iterations, 3);
        assert_eq!(cfg.top_k, 1);
        assert!(!cfg.single_round);
        assert!(cfg.pre_check.tokens.tokens.contains("yes"));
        assert!(cfg.post_check.tokens.tokens.contains("no"));
        assert_eq!(cfg.roles.resolver.temperature, 0.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = EngineConfig::scripted_defaults(
            BackendDescriptor::scripted("d"),
            BackendDescriptor::scripted("r"),
        );
        let json = serde_json::to_string(&cfg).unwrap();
        let back: EngineConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }
}
