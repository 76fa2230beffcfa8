//! Deterministic scripted backend: an ordered rule list mapping prompt
//! matchers to canned completions with fixed first-position logprobs.
//! A pure function of (behavior, prompt) — the test oracle for sessions.

use std::collections::BTreeMap;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{
    ensure_prompt, truncate_top, BackendDescriptor, CompletionBackend, CompletionResult,
    FinishReason, GatewayError,
};

/// How a rule recognizes its prompt. Rules are tried in order; a final
/// catch-all keeps every prompt answerable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMatcher {
    Substring(String),
    /// Regular expression; combine with `(?s)` to span lines.
    Pattern(String),
    CatchAll,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedRule {
    pub matcher: PromptMatcher,
    pub response_text: String,
    #[serde(default)]
    pub first_position_logprobs: BTreeMap<String, f64>,
}

impl ScriptedRule {
    pub fn new(matcher: PromptMatcher, text: &str, logprobs: &[(&str, f64)]) -> Self {
        Self {
            matcher,
            response_text: text.to_string(),
            first_position_logprobs: logprobs
                .iter()
                .map(|(t, lp)| (t.to_string(), *lp))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScriptedBehavior {
    pub rules: Vec<ScriptedRule>,
}

impl ScriptedBehavior {
    pub fn new(rules: Vec<ScriptedRule>) -> Self {
        Self { rules }
    }

    pub fn from_json_str(text: &str) -> Result<Self, GatewayError> {
        serde_json::from_str(text)
            .map_err(|e| GatewayError::Configuration(format!("bad scripted behavior: {e}")))
    }

    pub fn from_json_file(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            GatewayError::Configuration(format!("cannot read script {}: {e}", path.display()))
        })?;
        Self::from_json_str(&text)
    }
}

enum CompiledMatcher {
    Substring(String),
    Pattern(Regex),
    CatchAll,
}

impl CompiledMatcher {
    fn matches(&self, prompt: &str) -> bool {
        match self {
            CompiledMatcher::Substring(s) => prompt.contains(s),
            CompiledMatcher::Pattern(re) => re.is_match(prompt),
            CompiledMatcher::CatchAll => true,
        }
    }
}

/// Scripted adapter instance; rules and regexes are compiled once.
pub struct ScriptedClient {
    name: String,
    top_logprobs: usize,
    rules: Vec<(CompiledMatcher, ScriptedRule)>,
}

impl ScriptedClient {
    pub fn new(
        descriptor: &BackendDescriptor,
        behavior: ScriptedBehavior,
    ) -> Result<Self, GatewayError> {
        let mut rules = Vec::with_capacity(behavior.rules.len());
        for rule in behavior.rules {
            let compiled = match &rule.matcher {
                PromptMatcher::Substring(s) => CompiledMatcher::Substring(s.clone()),
                PromptMatcher::Pattern(p) => CompiledMatcher::Pattern(Regex::new(p).map_err(
                    |e| GatewayError::Configuration(format!("bad rule pattern {p:?}: {e}")),
                )?),
                PromptMatcher::CatchAll => CompiledMatcher::CatchAll,
            };
            rules.push((compiled, rule));
        }
        Ok(Self {
            name: descriptor.name.clone(),
            top_logprobs: descriptor.top_logprobs as usize,
            rules,
        })
    }
}

impl CompletionBackend for ScriptedClient {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, prompt: &str) -> Result<CompletionResult, GatewayError> {
        ensure_prompt(prompt)?;
        let rule = self
            .rules
            .iter()
            .find(|(matcher, _)| matcher.matches(prompt))
            .map(|(_, rule)| rule)
            .ok_or_else(|| {
                GatewayError::Configuration(format!(
                    "no scripted rule matched; prompts must end in a catch-all (prompt head: {:?})",
                    prompt.chars().take(60).collect::<String>()
                ))
            })?;
        let result = CompletionResult {
            text: rule.response_text.clone(),
            token_logprobs: vec![truncate_top(&rule.first_position_logprobs, self.top_logprobs)],
            finish_reason: FinishReason::Stop,
        };
        result.validate()?;
        Ok(result)
    }
}

pub(super) fn factory(
    descriptor: &BackendDescriptor,
) -> Result<Box<dyn CompletionBackend>, GatewayError> {
    let path = descriptor.script.as_ref().ok_or_else(|| {
        GatewayError::Configuration(format!(
            "scripted backend {:?} needs a `script` rules file",
            descriptor.name
        ))
    })?;
    let behavior = ScriptedBehavior::from_json_file(path)?;
    Ok(Box::new(ScriptedClient::new(descriptor, behavior)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn client(rules: Vec<ScriptedRule>) -> ScriptedClient {
        ScriptedClient::new(&BackendDescriptor::scripted("test"), ScriptedBehavior::new(rules))
            .unwrap()
    }

    #[test]
    fn rule_echoes_text_and_logprobs() {
        let c = client(vec![ScriptedRule::new(
            PromptMatcher::Substring("Are there any medical terms".into()),
            "yes",
            &[("yes", -0.5), ("no", -1.5)],
        )]);
        let r = c
            .complete("Q\nQuestion: Are there any medical terms in this question?\nAnswer:")
            .unwrap();
        assert_eq!(r.text, "yes");
        assert_eq!(r.token_logprobs.len(), 1);
        assert_eq!(r.token_logprobs[0].len(), 2);
        assert_eq!(r.token_logprobs[0]["yes"], -0.5);
    }

    #[test]
    fn empty_prompt_is_invalid_argument() {
        let c = client(vec![ScriptedRule::new(PromptMatcher::CatchAll, "x", &[])]);
        assert!(matches!(c.complete(""), Err(GatewayError::InvalidArgument(_))));
    }

    #[test]
    fn unmatched_prompt_is_configuration_error() {
        let c = client(vec![ScriptedRule::new(
            PromptMatcher::Substring("never".into()),
            "x",
            &[],
        )]);
        assert!(matches!(c.complete("hello"), Err(GatewayError::Configuration(_))));
    }

    #[test]
    fn rules_apply_in_order_and_patterns_span_lines() {
        let c = client(vec![
            ScriptedRule::new(
                PromptMatcher::Pattern("(?s)alpha.*beta".into()),
                "specific",
                &[],
            ),
            ScriptedRule::new(PromptMatcher::Substring("alpha".into()), "general", &[]),
            ScriptedRule::new(PromptMatcher::CatchAll, "fallback", &[]),
        ]);
        assert_eq!(c.complete("alpha\nthen beta").unwrap().text, "specific");
        assert_eq!(c.complete("alpha only").unwrap().text, "general");
        assert_eq!(c.complete("nothing").unwrap().text, "fallback");
    }

    #[test]
    fn pure_function_of_behavior_and_prompt() {
        let c = client(vec![ScriptedRule::new(PromptMatcher::CatchAll, "x", &[("x", -0.1)])]);
        assert_eq!(c.complete("p").unwrap(), c.complete("p").unwrap());
    }

    #[test]
    fn behavior_round_trips_through_json() {
        let b = ScriptedBehavior::new(vec![
            ScriptedRule::new(PromptMatcher::Substring("s".into()), "a", &[("a", -0.2)]),
            ScriptedRule::new(PromptMatcher::Pattern("(?s)x.*y".into()), "b", &[]),
            ScriptedRule::new(PromptMatcher::CatchAll, "c", &[]),
        ]);
        let json = serde_json::to_string_pretty(&b).unwrap();
        assert_eq!(ScriptedBehavior::from_json_str(&json).unwrap(), b);
    }

    #[test]
    fn descriptor_truncation_applies_to_rule_logprobs() {
        let mut desc = BackendDescriptor::scripted("t");
        desc.top_logprobs = 1;
        let c = ScriptedClient::new(
            &desc,
            ScriptedBehavior::new(vec![ScriptedRule::new(
                PromptMatcher::CatchAll,
                "yes",
                &[("yes", -0.5), ("no", -1.5)],
            )]),
        )
        .unwrap();
        let r = c.complete("p").unwrap();
        assert_eq!(r.token_logprobs[0].len(), 1);
        assert!(r.token_logprobs[0].contains_key("yes"));
    }
}
