use serde::{Deserialize, Serialize};

use super::ModelError;

/// One (term, summary) pair accumulated during a session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEntry {
    /// The dissected sub-question.
    pub term: String,
    /// The integrated explanation produced for it.
    pub summary: String,
    /// 1-based position in the session.
    pub iteration: u32,
}

/// Ordered ledger of (term, summary) pairs. Values are immutable; growth is
/// by returning a new `Memory`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Memory {
    pub entries: Vec<MemoryEntry>,
}

impl Memory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains_term(&self, term: &str) -> bool {
        self.entries.iter().any(|e| e.term == term)
    }

    /// Returns a new memory with the pair appended at iteration `len + 1`.
    pub fn append(&self, term: &str, summary: &str) -> Result<Memory, ModelError> {
        if term.is_empty() {
            return Err(ModelError::InvalidArgument("empty memory term".into()));
        }
        if summary.is_empty() {
            return Err(ModelError::InvalidArgument("empty memory summary".into()));
        }
        let mut entries = self.entries.clone();
        entries.push(MemoryEntry {
            term: term.to_string(),
            summary: summary.to_string(),
            iteration: entries.len() as u32 + 1,
        });
        Ok(Memory { entries })
    }

    /// Like [`Memory::append`] but replaces the summary of an existing entry
    /// with the same term instead of appending a duplicate. Used when term
    /// deduplication is enabled in the engine configuration.
    pub fn append_dedup(&self, term: &str, summary: &str) -> Result<Memory, ModelError> {
        if let Some(pos) = self.entries.iter().position(|e| e.term == term) {
            if summary.is_empty() {
                return Err(ModelError::InvalidArgument("empty memory summary".into()));
            }
            let mut entries = self.entries.clone();
            entries[pos].summary = summary.to_string();
            return Ok(Memory { entries });
        }
        self.append(term, summary)
    }

    /// One `<term>: <summary>` line per entry, in iteration order. Empty
    /// memory renders as the empty string.
    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}: {}", e.term, e.summary))
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Checks iteration contiguity (1..=n in order).
    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, entry) in self.entries.iter().enumerate() {
            if entry.iteration != i as u32 + 1 {
                return Err(ModelError::InvalidArgument(format!(
                    "memory iterations not contiguous: expected {} at position {i}, got {}",
                    i + 1,
                    entry.iteration
                )));
            }
            if entry.term.is_empty() || entry.summary.is_empty() {
                return Err(ModelError::InvalidArgument(
                    "memory entry with empty term or summary".into(),
                ));
            }
        }
        Ok(())
    }
}
