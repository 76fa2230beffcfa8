//! Pluggable text embedders plus the batch embed + L2-normalize step.
//! The default is a deterministic term-frequency hash embedder; real
//! encoders slot in behind the same trait.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock, RwLock};

use super::tokenize::{Tokenizer, WhitespaceTokenizer};
use super::KbError;

pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    /// Raw (un-normalized) embedding; must be `dim()` long.
    fn embed(&self, text: &str) -> Vec<f32>;
}

fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325_u64;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Term-frequency embedding over hashed token buckets. Stable across
/// platforms and processes (FNV-1a, not the std hasher).
pub struct HashEmbedder {
    dim: usize,
    id: String,
    tokenizer: WhitespaceTokenizer,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Result<Self, KbError> {
        if dim == 0 {
            return Err(KbError::InvalidArgument("embedder dimension must be >= 1".into()));
        }
        Ok(Self { dim, id: format!("hash-{dim}"), tokenizer: WhitespaceTokenizer })
    }
}

impl Embedder for HashEmbedder {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Vec<f32> {
        let mut v = vec![0.0_f32; self.dim];
        let tokens = self.tokenizer.tokenize(text);
        if tokens.is_empty() {
            // tokenless text still needs a unit-normalizable vector
            v[0] = 1.0;
            return v;
        }
        for token in tokens {
            let bucket = (fnv1a_64(token.as_bytes()) % self.dim as u64) as usize;
            v[bucket] += 1.0;
        }
        v
    }
}

/// L2-normalizes in place, accumulating in f64. Errors on a zero vector.
pub fn normalize(v: &mut [f32]) -> Result<(), KbError> {
    let norm = v.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(KbError::Embedder("cannot normalize a zero vector".into()));
    }
    for x in v.iter_mut() {
        *x = (f64::from(*x) / norm) as f32;
    }
    Ok(())
}

/// Embeds a batch and L2-normalizes, preserving order. A dimension
/// mismatch anywhere in the batch is an embedder error.
pub fn embed_texts<S: AsRef<str>>(
    texts: &[S],
    embedder: &dyn Embedder,
) -> Result<Vec<Vec<f32>>, KbError> {
    let mut out = Vec::with_capacity(texts.len());
    for text in texts {
        let mut v = embedder.embed(text.as_ref());
        if v.len() != embedder.dim() {
            return Err(KbError::Embedder(format!(
                "embedder {:?} returned dimension {} instead of {}",
                embedder.id(),
                v.len(),
                embedder.dim()
            )));
        }
        normalize(&mut v)?;
        out.push(v);
    }
    Ok(out)
}

type EmbedderFactory = fn(&str) -> Option<Arc<dyn Embedder>>;

fn registry() -> &'static RwLock<BTreeMap<String, EmbedderFactory>> {
    static REGISTRY: OnceLock<RwLock<BTreeMap<String, EmbedderFactory>>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut map: BTreeMap<String, EmbedderFactory> = BTreeMap::new();
        map.insert("hash".into(), hash_factory as EmbedderFactory);
        RwLock::new(map)
    })
}

fn hash_factory(id: &str) -> Option<Arc<dyn Embedder>> {
    let dim: usize = id.strip_prefix("hash-")?.parse().ok()?;
    HashEmbedder::new(dim).ok().map(|e| Arc::new(e) as Arc<dyn Embedder>)
}

/// Registers an embedder family under a prefix; the factory receives the
/// full id (e.g. `hash-64`) and may reject it.
pub fn register_embedder(family: &str, factory: EmbedderFactory) {
    registry().write().expect("embedder registry poisoned").insert(family.to_string(), factory);
}

pub fn embedder_names() -> Vec<String> {
    registry().read().expect("embedder registry poisoned").keys().cloned().collect()
}

/// Resolves an embedder id like `hash-64` through the registry.
pub fn create_embedder(id: &str) -> Result<Arc<dyn Embedder>, KbError> {
    let family = id.split('-').next().unwrap_or(id);
    let factory = *registry()
        .read()
        .expect("embedder registry poisoned")
        .get(family)
        .ok_or_else(|| KbError::InvalidArgument(format!("unknown embedder family {family:?}")))?;
    factory(id).ok_or_else(|| KbError::InvalidArgument(format!("bad embedder id {id:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_texts_embed_identically() {
        let e = HashEmbedder::new(64).unwrap();
        assert_eq!(e.embed("callus formation"), e.embed("callus formation"));
    }

    #[test]
    fn normalize_three_four_zero() {
        let mut v = vec![3.0, 4.0, 0.0];
        normalize(&mut v).unwrap();
        assert_eq!(v, vec![0.6, 0.8, 0.0]);
    }

    #[test]
    fn empty_batch_embeds_to_empty() {
        let e = HashEmbedder::new(8).unwrap();
        let out = embed_texts::<&str>(&[], &e).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn batch_output_is_unit_norm_and_ordered() {
        let e = HashEmbedder::new(16).unwrap();
        let out = embed_texts(&["alpha beta", "gamma"], &e).unwrap();
        assert_eq!(out.len(), 2);
        for v in &out {
            let norm: f64 = v.iter().map(|x| f64::from(*x) * f64::from(*x)).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
        assert_ne!(out[0], out[1]);
    }

    #[test]
    fn tokenless_text_still_normalizes() {
        let e = HashEmbedder::new(8).unwrap();
        let out = embed_texts(&[""], &e).unwrap();
        assert_eq!(out[0][0], 1.0);
    }

    #[test]
    fn registry_parses_dimension_from_id() {
        let e = create_embedder("hash-32").unwrap();
        assert_eq!(e.dim(), 32);
        assert_eq!(e.id(), "hash-32");
        assert!(create_embedder("hash-x").is_err());
        assert!(create_embedder("medcpt").is_err());
    }
}
