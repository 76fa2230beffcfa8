//! Prompt template pack: loading, variable substitution, and the cycling
//! system-prompt bank.
//!
//! Templates live as UTF-8 text files with `{name}` substitution markers,
//! listed by a `manifest.json` that declares each template's required
//! variable set. Packs are swappable per domain; [`PromptRegistry::builtin`]
//! embeds the default pack shipped under `templates/default/`.
//!
//! Rendering rules:
//! - the provided variables must match the declared set exactly; a missing
//!   or extra variable is an error, never an empty substitution;
//! - substitution is literal and single-pass: marker-like text inside a
//!   value is emitted verbatim, never expanded;
//! - a variable whose value is empty and whose marker occupies a whole line
//!   drops that line, and a `### Context2:` header directly above a dropped
//!   line is removed with it (the empty-memory convention for QA prompts);
//! - loaders strip exactly one trailing newline from each template file, so
//!   rendered prompts end exactly where the template text does.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("missing required variable {0:?}")]
    MissingVariable(String),
    #[error("unexpected variable {0:?}")]
    UnexpectedVariable(String),
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("template pack error: {0}")]
    Pack(String),
    #[error("template pack io error: {0}")]
    Io(#[from] std::io::Error),
}

/// The ten canonical templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateId {
    PreCheckMcq,
    PreCheckYesno,
    DissectMcq,
    DissectYesno,
    IntegrateSummary,
    PostCheck,
    QaWithRagMcq,
    QaWithRagYesno,
    QaWithoutRagMcq,
    QaWithoutRagYesno,
}

impl TemplateId {
    pub const ALL: [TemplateId; 10] = [
        TemplateId::PreCheckMcq,
        TemplateId::PreCheckYesno,
        TemplateId::DissectMcq,
        TemplateId::DissectYesno,
        TemplateId::IntegrateSummary,
        TemplateId::PostCheck,
        TemplateId::QaWithRagMcq,
        TemplateId::QaWithRagYesno,
        TemplateId::QaWithoutRagMcq,
        TemplateId::QaWithoutRagYesno,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateId::PreCheckMcq => "pre_check_mcq",
            TemplateId::PreCheckYesno => "pre_check_yesno",
            TemplateId::DissectMcq => "dissect_mcq",
            TemplateId::DissectYesno => "dissect_yesno",
            TemplateId::IntegrateSummary => "integrate_summary",
            TemplateId::PostCheck => "post_check",
            TemplateId::QaWithRagMcq => "qa_with_rag_mcq",
            TemplateId::QaWithRagYesno => "qa_with_rag_yesno",
            TemplateId::QaWithoutRagMcq => "qa_without_rag_mcq",
            TemplateId::QaWithoutRagYesno => "qa_without_rag_yesno",
        }
    }

    /// Required variable set, fixed per template.
    pub fn required_vars(self) -> &'static [&'static str] {
        match self {
            TemplateId::PreCheckMcq => &["question", "options"],
            TemplateId::PreCheckYesno => &["question", "context"],
            TemplateId::DissectMcq => &["question", "options", "memory"],
            TemplateId::DissectYesno => &["question", "context", "memory"],
            TemplateId::IntegrateSummary => &["rag_context"],
            TemplateId::PostCheck => &["summary_context", "question"],
            TemplateId::QaWithRagMcq => &["question", "options", "memory"],
            TemplateId::QaWithRagYesno => &["question", "context", "memory"],
            TemplateId::QaWithoutRagMcq => &["question", "options"],
            TemplateId::QaWithoutRagYesno => &["question", "context"],
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
struct Template {
    text: String,
    vars: BTreeSet<String>,
}

#[derive(Debug, Deserialize)]
struct ManifestEntry {
    file: String,
    vars: Vec<String>,
    #[serde(default)]
    extension: bool,
}

#[derive(Debug, Deserialize)]
struct Manifest {
    system_prompts: String,
    templates: BTreeMap<String, ManifestEntry>,
}

/// The ten fixed sentences the QA system prompt cycles through.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemPromptBank {
    sentences: Vec<String>,
}

impl SystemPromptBank {
    pub fn from_text(text: &str) -> Result<Self, TemplateError> {
        let sentences: Vec<String> = text.lines().map(str::to_string).collect();
        if sentences.len() != 10 {
            return Err(TemplateError::Pack(format!(
                "system prompt bank must hold exactly 10 sentences, found {}",
                sentences.len()
            )));
        }
        if !sentences[0].starts_with("You're a doctor, kindly address") {
            return Err(TemplateError::Pack(
                "system prompt sentence 1 must begin \"You're a doctor, kindly address\"".into(),
            ));
        }
        Ok(Self { sentences })
    }

    /// Sentence for the given call index; period is exactly 10.
    pub fn sentence(&self, call_index: u64) -> &str {
        &self.sentences[(call_index % 10) as usize]
    }
}

/// Immutable template registry; safe to share across sessions.
#[derive(Debug, Clone)]
pub struct PromptRegistry {
    templates: BTreeMap<String, Template>,
    bank: SystemPromptBank,
}

const BUILTIN_MANIFEST: &str = include_str!("../templates/default/manifest.json");
const BUILTIN_FILES: &[(&str, &str)] = &[
    ("pre_check_mcq.txt", include_str!("../templates/default/pre_check_mcq.txt")),
    ("pre_check_yesno.txt", include_str!("../templates/default/pre_check_yesno.txt")),
    ("dissect_mcq.txt", include_str!("../templates/default/dissect_mcq.txt")),
    ("dissect_yesno.txt", include_str!("../templates/default/dissect_yesno.txt")),
    ("integrate_summary.txt", include_str!("../templates/default/integrate_summary.txt")),
    ("post_check.txt", include_str!("../templates/default/post_check.txt")),
    ("qa_with_rag_mcq.txt", include_str!("../templates/default/qa_with_rag_mcq.txt")),
    ("qa_with_rag_yesno.txt", include_str!("../templates/default/qa_with_rag_yesno.txt")),
    ("qa_without_rag_mcq.txt", include_str!("../templates/default/qa_without_rag_mcq.txt")),
    ("qa_without_rag_yesno.txt", include_str!("../templates/default/qa_without_rag_yesno.txt")),
    ("explain_term.txt", include_str!("../templates/default/explain_term.txt")),
    ("system_prompts.txt", include_str!("../templates/default/system_prompts.txt")),
];

fn strip_one_newline(text: &str) -> &str {
    text.strip_suffix('\n').map(|t| t.strip_suffix('\r').unwrap_or(t)).unwrap_or(text)
}

fn markers_in(text: &str) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            if let Some(end) = text[i + 1..].find('}') {
                let name = &text[i + 1..i + 1 + end];
                if !name.is_empty()
                    && name.chars().all(|c| c.is_ascii_lowercase() || c == '_')
                {
                    found.insert(name.to_string());
                    i += end + 2;
                    continue;
                }
            }
        }
        i += 1;
    }
    found
}

impl PromptRegistry {
    /// Loads the pack embedded at build time (the files under
    /// `templates/default/`).
    pub fn builtin() -> Self {
        Self::from_source(BUILTIN_MANIFEST, |file| {
            BUILTIN_FILES
                .iter()
                .find(|(name, _)| *name == file)
                .map(|(_, content)| content.to_string())
                .ok_or_else(|| TemplateError::Pack(format!("builtin pack misses {file:?}")))
        })
        .expect("builtin template pack is valid")
    }

    /// Loads a pack from a directory holding `manifest.json` and the
    /// template files it names.
    pub fn load(dir: &Path) -> Result<Self, TemplateError> {
        let manifest = std::fs::read_to_string(dir.join("manifest.json"))?;
        Self::from_source(&manifest, |file| Ok(std::fs::read_to_string(dir.join(file))?))
    }

    fn from_source<F>(manifest_text: &str, mut read: F) -> Result<Self, TemplateError>
    where
        F: FnMut(&str) -> Result<String, TemplateError>,
    {
        let manifest: Manifest = serde_json::from_str(manifest_text)
            .map_err(|e| TemplateError::Pack(format!("bad manifest: {e}")))?;
        let mut templates = BTreeMap::new();
        for (name, entry) in &manifest.templates {
            let raw = read(&entry.file)?;
            let text = strip_one_newline(&raw).to_string();
            let declared: BTreeSet<String> = entry.vars.iter().cloned().collect();
            let markers = markers_in(&text);
            if markers != declared {
                return Err(TemplateError::Pack(format!(
                    "template {name:?} declares vars {declared:?} but its text uses {markers:?}"
                )));
            }
            if !entry.extension {
                // the canonical ten must exist with their fixed variable sets
                let id = TemplateId::ALL
                    .iter()
                    .find(|id| id.name() == name)
                    .ok_or_else(|| {
                        TemplateError::Pack(format!("non-extension template {name:?} unknown"))
                    })?;
                let expected: BTreeSet<String> =
                    id.required_vars().iter().map(|v| v.to_string()).collect();
                if declared != expected {
                    return Err(TemplateError::Pack(format!(
                        "template {name:?} must declare vars {expected:?}"
                    )));
                }
            }
            templates.insert(name.clone(), Template { text, vars: declared });
        }
        for id in TemplateId::ALL {
            if !templates.contains_key(id.name()) {
                return Err(TemplateError::Pack(format!("pack misses template {id}")));
            }
        }
        let bank = SystemPromptBank::from_text(&read(&manifest.system_prompts)?)?;
        Ok(Self { templates, bank })
    }

    pub fn bank(&self) -> &SystemPromptBank {
        &self.bank
    }

    /// Renders a canonical template.
    pub fn render(
        &self,
        id: TemplateId,
        vars: &BTreeMap<String, String>,
    ) -> Result<String, TemplateError> {
        self.render_named(id.name(), vars)
    }

    /// Renders any template in the pack by name, including extensions.
    pub fn render_named(
        &self,
        name: &str,
        vars: &BTreeMap<String, String>,
    ) -> Result<String, TemplateError> {
        let template = self
            .templates
            .get(name)
            .ok_or_else(|| TemplateError::UnknownTemplate(name.to_string()))?;
        for required in &template.vars {
            if !vars.contains_key(required) {
                return Err(TemplateError::MissingVariable(required.clone()));
            }
        }
        for provided in vars.keys() {
            if !template.vars.contains(provided) {
                return Err(TemplateError::UnexpectedVariable(provided.clone()));
            }
        }
        Ok(substitute(&template.text, vars))
    }
}

/// Single-pass literal substitution with whole-line removal of empty slots.
fn substitute(template: &str, vars: &BTreeMap<String, String>) -> String {
    let mut lines: Vec<String> = Vec::new();
    for line in template.split('\n') {
        let trimmed = line.trim();
        let whole_line_marker = trimmed.len() > 2
            && trimmed.starts_with('{')
            && trimmed.ends_with('}')
            && vars.contains_key(&trimmed[1..trimmed.len() - 1]);
        if whole_line_marker {
            let name = &trimmed[1..trimmed.len() - 1];
            if vars[name].is_empty() {
                if lines.last().map(String::as_str) == Some("### Context2:") {
                    lines.pop();
                }
                continue;
            }
        }
        lines.push(substitute_line(line, vars));
    }
    lines.join("\n")
}

fn substitute_line(line: &str, vars: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(line.len());
    let mut rest = line;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open..];
        if let Some(close) = after.find('}') {
            let name = &after[1..close];
            if let Some(value) = vars.get(name) {
                out.push_str(value);
                rest = &after[close + 1..];
                continue;
            }
        }
        // not a known marker; keep the brace literally
        out.push('{');
        rest = &after[1..];
    }
    out.push_str(rest);
    out
}

/// Swaps the first line of a rendered QA prompt for the cycled system
/// sentence.
pub fn cycle_system_sentence(rendered: &str, sentence: &str) -> String {
    match rendered.split_once('\n') {
        Some((_, rest)) => format!("{sentence}\n{rest}"),
        None => sentence.to_string(),
    }
}

/// Convenience constructor for variable maps.
pub fn template_vars(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}
