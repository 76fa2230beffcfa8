//! Pluggable token segmentation for chunking. The chunker only needs a
//! deterministic tokenizer whose token stream survives a detokenize →
//! tokenize round trip.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock, RwLock};

use super::KbError;

pub trait Tokenizer: Send + Sync {
    fn id(&self) -> &str;
    fn tokenize(&self, text: &str) -> Vec<String>;
    /// Inverse presentation of a token slice; need not reproduce original
    /// whitespace, only the token stream.
    fn detokenize(&self, tokens: &[String]) -> String;
}

/// Default segmenter: maximal alphanumeric runs are tokens, every other
/// non-whitespace character is its own single-character token.
#[derive(Debug, Default, Clone)]
pub struct WhitespaceTokenizer;

impl Tokenizer for WhitespaceTokenizer {
    fn id(&self) -> &str {
        "whitespace"
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        let mut word = String::new();
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                word.push(ch);
            } else {
                if !word.is_empty() {
                    tokens.push(std::mem::take(&mut word));
                }
                if !ch.is_whitespace() {
                    tokens.push(ch.to_string());
                }
            }
        }
        if !word.is_empty() {
            tokens.push(word);
        }
        tokens
    }

    fn detokenize(&self, tokens: &[String]) -> String {
        tokens.join(" ")
    }
}

type TokenizerFactory = fn() -> Arc<dyn Tokenizer>;

fn registry() -> &'static RwLock<BTreeMap<String, TokenizerFactory>> {
    static REGISTRY: OnceLock<RwLock<BTreeMap<String, TokenizerFactory>>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut map: BTreeMap<String, TokenizerFactory> = BTreeMap::new();
        map.insert("whitespace".into(), || Arc::new(WhitespaceTokenizer));
        RwLock::new(map)
    })
}

pub fn register_tokenizer(id: &str, factory: TokenizerFactory) {
    registry().write().expect("tokenizer registry poisoned").insert(id.to_string(), factory);
}

pub fn tokenizer_names() -> Vec<String> {
    registry().read().expect("tokenizer registry poisoned").keys().cloned().collect()
}

pub fn create_tokenizer(id: &str) -> Result<Arc<dyn Tokenizer>, KbError> {
    registry()
        .read()
        .expect("tokenizer registry poisoned")
        .get(id)
        .map(|factory| factory())
        .ok_or_else(|| KbError::InvalidArgument(format!("unknown tokenizer {id:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_words_and_punctuation() {
        let t = WhitespaceTokenizer;
        assert_eq!(
            t.tokenize("Hello, world! x2"),
            vec!["Hello", ",", "world", "!", "x2"]
        );
    }

    #[test]
    fn empty_text_has_no_tokens() {
        assert!(WhitespaceTokenizer.tokenize("  \n\t ").is_empty());
        assert!(WhitespaceTokenizer.tokenize("").is_empty());
    }

    #[test]
    fn token_stream_survives_round_trip() {
        let t = WhitespaceTokenizer;
        let tokens = t.tokenize("A fracture; callus-formation (stage 2) heals.");
        assert_eq!(t.tokenize(&t.detokenize(&tokens)), tokens);
    }

    #[test]
    fn registry_resolves_default() {
        let t = create_tokenizer("whitespace").unwrap();
        assert_eq!(t.id(), "whitespace");
        assert!(create_tokenizer("bpe-unknown").is_err());
    }
}
