//! Splits documents into disjoint, covering token windows.

use super::tokenize::Tokenizer;
use super::{Chunk, KbError, SourceDocument};

/// Splits a document into disjoint chunks of at most `size` tokens; every
/// chunk except possibly the last holds exactly `size`. The concatenated
/// chunk token streams reproduce the tokenized body exactly. An empty body
/// yields zero chunks.
pub fn chunk_document(
    doc: &SourceDocument,
    tokenizer: &dyn Tokenizer,
    size: usize,
) -> Result<Vec<Chunk>, KbError> {
    if size == 0 {
        return Err(KbError::InvalidArgument("chunk size must be >= 1".into()));
    }
    let tokens = tokenizer.tokenize(&doc.body);
    if tokens.is_empty() {
        return Ok(Vec::new());
    }
    // an irreversible tokenizer would silently corrupt chunk boundaries
    let round_trip = tokenizer.tokenize(&tokenizer.detokenize(&tokens));
    if round_trip != tokens {
        return Err(KbError::Ingestion(format!(
            "tokenizer {:?} failed the round-trip check on doc {:?}",
            tokenizer.id(),
            doc.doc_id
        )));
    }
    Ok(tokens
        .chunks(size)
        .enumerate()
        .map(|(ordinal, window)| Chunk {
            chunk_id: format!("{}::{:06}", doc.doc_id, ordinal),
            text: tokenizer.detokenize(window),
            token_count: window.len() as u32,
            ordinal: ordinal as u32,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::tokenize::WhitespaceTokenizer;
    use proptest::prelude::*;

    fn doc_with_tokens(n: usize) -> SourceDocument {
        let body = (0..n).map(|i| format!("tok{i}")).collect::<Vec<_>>().join(" ");
        SourceDocument { doc_id: "d".into(), title: None, body, source_tag: "test".into() }
    }

    #[test]
    fn thirteen_hundred_tokens_split_512_512_276() {
        let chunks = chunk_document(&doc_with_tokens(1300), &WhitespaceTokenizer, 512).unwrap();
        let counts: Vec<u32> = chunks.iter().map(|c| c.token_count).collect();
        assert_eq!(counts, vec![512, 512, 276]);
        // independently recount tokens inside each chunk text
        for chunk in &chunks {
            let recount = WhitespaceTokenizer.tokenize(&chunk.text).len() as u32;
            assert_eq!(recount, chunk.token_count);
        }
    }

    #[test]
    fn exact_boundary_makes_one_full_chunk() {
        let chunks = chunk_document(&doc_with_tokens(512), &WhitespaceTokenizer, 512).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].token_count, 512);
    }

    #[test]
    fn empty_body_yields_no_chunks() {
        let doc = SourceDocument {
            doc_id: "d".into(),
            title: None,
            body: String::new(),
            source_tag: String::new(),
        };
        assert!(chunk_document(&doc, &WhitespaceTokenizer, 512).unwrap().is_empty());
    }

    #[test]
    fn chunk_ids_carry_doc_id_and_ordinal() {
        let chunks = chunk_document(&doc_with_tokens(10), &WhitespaceTokenizer, 4).unwrap();
        assert_eq!(chunks[0].chunk_id, "d::000000");
        assert_eq!(chunks[2].chunk_id, "d::000002");
        assert_eq!(chunks[2].token_count, 2);
    }

    proptest! {
        /// Disjoint and covering: chunk token streams concatenate to the
        /// tokenized body.
        #[test]
        fn chunks_cover_the_token_stream(n in 0usize..600, size in 1usize..80) {
            let doc = doc_with_tokens(n);
            let tokenizer = WhitespaceTokenizer;
            let chunks = chunk_document(&doc, &tokenizer, size).unwrap();
            let mut rebuilt = Vec::new();
            for (i, chunk) in chunks.iter().enumerate() {
                prop_assert_eq!(chunk.ordinal as usize, i);
                let toks = tokenizer.tokenize(&chunk.text);
                prop_assert_eq!(toks.len() as u32, chunk.token_count);
                if i + 1 < chunks.len() {
                    prop_assert_eq!(toks.len(), size);
                }
                rebuilt.extend(toks);
            }
            prop_assert_eq!(rebuilt, tokenizer.tokenize(&doc.body));
        }
    }
}
