//! Knowledge base: corpus ingestion, disjoint fixed-size token chunking,
//! embedding, and exact top-k cosine retrieval with on-disk persistence.

mod chunker;
mod embed;
mod index;
mod tokenize;

pub use chunker::chunk_document;
pub use embed::{create_embedder, embed_texts, embedder_names, register_embedder, Embedder, HashEmbedder};
pub use index::{Index, IndexEntry, IndexMeta, RetrievalHit};
pub use tokenize::{create_tokenizer, register_tokenizer, tokenizer_names, Tokenizer, WhitespaceTokenizer};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("ingestion error: {0}")]
    Ingestion(String),
    #[error("embedder error: {0}")]
    Embedder(String),
    #[error("index build error: {0}")]
    Build(String),
    #[error("query error: {0}")]
    Query(String),
    #[error("persistence error: {0}")]
    Persist(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One corpus article before chunking.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub body: String,
    #[serde(default)]
    pub source_tag: String,
}

/// A token-bounded slice of one document. All chunks of a document except
/// possibly the last hold exactly the configured token count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    /// `<doc_id>::<zero-padded ordinal>`.
    pub chunk_id: String,
    pub text: String,
    pub token_count: u32,
    pub ordinal: u32,
}

/// Reads a corpus from JSON Lines, one [`SourceDocument`] per line.
pub fn load_corpus(path: &Path) -> Result<Vec<SourceDocument>, KbError> {
    let text = std::fs::read_to_string(path)?;
    let mut docs: Vec<SourceDocument> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: SourceDocument = serde_json::from_str(line)
            .map_err(|e| KbError::Ingestion(format!("line {}: {e}", lineno + 1)))?;
        if docs.iter().any(|d| d.doc_id == doc.doc_id) {
            return Err(KbError::Ingestion(format!(
                "line {}: duplicate doc_id {:?}",
                lineno + 1,
                doc.doc_id
            )));
        }
        docs.push(doc);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_loader_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(&path, "{\"doc_id\":\"d1\",\"body\":\"text\"}\nnot json\n").unwrap();
        let err = load_corpus(&path).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn corpus_loader_rejects_duplicate_ids() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(
            &path,
            "{\"doc_id\":\"d1\",\"body\":\"a\"}\n{\"doc_id\":\"d1\",\"body\":\"b\"}\n",
        )
        .unwrap();
        let err = load_corpus(&path).unwrap_err();
        assert!(err.to_string().contains("duplicate doc_id"), "{err}");
    }
}
