//! Domain types shared across the engine: tasks, memory, answers, and
//! session traces.

mod memory;
mod task;
mod trace;

pub use memory::{Memory, MemoryEntry};
pub use task::{ParsedLabel, Task, TaskKind, TaskOption};
pub use trace::{payload_digest, Decision, Phase, SessionTrace, TraceEvent};

use thiserror::Error;

/// Invariant violation on a domain value.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid task {id}: {reason}")]
    InvalidTask { id: String, reason: String },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
}

/// Answer emitted at the end of a session.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Answer {
    /// Parsed label, or the unparsed sentinel when no label was found.
    pub label: ParsedLabel,
    /// Verbatim completion text the label was parsed from.
    pub raw_text: String,
    pub retrieved_at_least_once: bool,
    pub iterations_used: u32,
}

impl Answer {
    /// Builds an answer, enforcing `iterations_used == 0 <=> no retrieval`.
    pub fn new(
        label: ParsedLabel,
        raw_text: String,
        iterations_used: u32,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            label,
            raw_text,
            retrieved_at_least_once: iterations_used > 0,
            iterations_used,
        })
    }
}
