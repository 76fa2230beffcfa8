use serde::{Deserialize, Serialize};

use super::ModelError;

/// The two supported question families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    MultipleChoice,
    YesNo,
}

/// One labeled choice of a multiple-choice question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskOption {
    pub label: String,
    pub text: String,
}

/// One QA instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub kind: TaskKind,
    pub question: String,
    #[serde(default)]
    pub options: Vec<TaskOption>,
    /// Supporting passage for yes/no questions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
}

const MCQ_LABELS: [&str; 5] = ["A", "B", "C", "D", "E"];
const YESNO_LABELS: [&str; 3] = ["yes", "no", "maybe"];

impl Task {
    /// Checks the per-kind invariants.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |reason: &str| {
            Err(ModelError::InvalidTask {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.id.is_empty() {
            return fail("empty task id");
        }
        if self.question.is_empty() {
            return fail("empty question");
        }
        match self.kind {
            TaskKind::MultipleChoice => {
                if self.options.is_empty() {
                    return fail("multiple_choice task has no options");
                }
                let mut seen = Vec::new();
                for opt in &self.options {
                    if !MCQ_LABELS.contains(&opt.label.as_str()) {
                        return fail(&format!("option label {:?} outside A-E", opt.label));
                    }
                    if seen.contains(&opt.label.as_str()) {
                        return fail(&format!("duplicate option label {:?}", opt.label));
                    }
                    seen.push(opt.label.as_str());
                }
                if let Some(gold) = &self.gold {
                    if !self.options.iter().any(|o| &o.label == gold) {
                        return fail(&format!("gold label {gold:?} not among options"));
                    }
                }
            }
            TaskKind::YesNo => {
                if !self.options.is_empty() {
                    return fail("yes_no task must not carry options");
                }
                if let Some(gold) = &self.gold {
                    if !YESNO_LABELS.contains(&gold.as_str()) {
                        return fail(&format!("gold label {gold:?} outside yes/no/maybe"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Renders the option list as one `<label>. <text>` line per option.
    pub fn options_block(&self) -> String {
        self.options
            .iter()
            .map(|o| format!("{}. {}", o.label, o.text))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// A parsed answer label, or the sentinel for completions no label could be
/// extracted from. Serialized as a plain string; `"unparsed"` is reserved
/// (it lies outside both label spaces).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParsedLabel {
    Label(String),
    Unparsed,
}

impl ParsedLabel {
    pub fn as_str(&self) -> &str {
        match self {
            ParsedLabel::Label(s) => s,
            ParsedLabel::Unparsed => "unparsed",
        }
    }

    pub fn is_unparsed(&self) -> bool {
        matches!(self, ParsedLabel::Unparsed)
    }
}

impl std::fmt::Display for ParsedLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ParsedLabel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ParsedLabel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(if s == "unparsed" {
            ParsedLabel::Unparsed
        } else {
            ParsedLabel::Label(s)
        })
    }
}
