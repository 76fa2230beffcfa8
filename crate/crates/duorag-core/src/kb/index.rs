//! Exact exhaustive vector index over contiguous f32 storage, with a
//! three-file persistent form: JSON manifest, little-endian f32 blob, and
//! a chunk-text JSONL sidecar. Build-then-read: immutable once built.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chunker::chunk_document;
use super::embed::{embed_texts, Embedder};
use super::tokenize::Tokenizer;
use super::{Chunk, KbError, SourceDocument};

/// One embedded chunk as stored in the index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub chunk_id: String,
    /// Unit L2 norm, fixed dimension per index.
    pub vector: Vec<f32>,
}

/// One search result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub chunk_id: String,
    pub similarity: f64,
    pub text: String,
}

/// Provenance recorded alongside the vectors so queries can be embedded
/// the same way the corpus was.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub dimension: usize,
    pub tokenizer_id: String,
    pub embedder_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    format_version: u32,
    dimension: usize,
    count: usize,
    tokenizer_id: String,
    embedder_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChunkRecord {
    chunk_id: String,
    text: String,
}

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct Index {
    meta: IndexMeta,
    ids: Vec<String>,
    texts: Vec<String>,
    /// Row-major, `len * dimension` values.
    vectors: Vec<f32>,
}

impl Index {
    /// Builds an index from unit vectors and their chunk texts.
    pub fn build(
        entries: Vec<IndexEntry>,
        texts: Vec<String>,
        meta: IndexMeta,
    ) -> Result<Self, KbError> {
        if entries.len() != texts.len() {
            return Err(KbError::Build(format!(
                "{} entries but {} chunk texts",
                entries.len(),
                texts.len()
            )));
        }
        if meta.dimension == 0 {
            return Err(KbError::Build("index dimension must be >= 1".into()));
        }
        let mut ids: Vec<String> = Vec::with_capacity(entries.len());
        let mut vectors: Vec<f32> = Vec::with_capacity(entries.len() * meta.dimension);
        for entry in &entries {
            if entry.vector.len() != meta.dimension {
                return Err(KbError::Build(format!(
                    "chunk {:?} has dimension {} instead of {}",
                    entry.chunk_id,
                    entry.vector.len(),
                    meta.dimension
                )));
            }
            let norm = entry
                .vector
                .iter()
                .map(|x| f64::from(*x) * f64::from(*x))
                .sum::<f64>()
                .sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(KbError::Build(format!(
                    "chunk {:?} vector norm {norm} is not unit",
                    entry.chunk_id
                )));
            }
            if ids.contains(&entry.chunk_id) {
                return Err(KbError::Build(format!("duplicate chunk_id {:?}", entry.chunk_id)));
            }
            ids.push(entry.chunk_id.clone());
            vectors.extend_from_slice(&entry.vector);
        }
        Ok(Self { meta, ids, texts, vectors })
    }

    /// Ingestion pipeline: chunk every document, embed chunk texts, build.
    /// `embed_titles` prepends the document title to the embedding input
    /// (stored chunk text stays body-only either way).
    pub fn from_corpus(
        docs: &[SourceDocument],
        tokenizer: &dyn Tokenizer,
        embedder: &dyn Embedder,
        chunk_size: usize,
        embed_titles: bool,
    ) -> Result<Self, KbError> {
        let mut chunks: Vec<Chunk> = Vec::new();
        let mut embed_inputs: Vec<String> = Vec::new();
        for doc in docs {
            for chunk in chunk_document(doc, tokenizer, chunk_size)? {
                embed_inputs.push(match (&doc.title, embed_titles) {
                    (Some(title), true) => format!("{title}\n{}", chunk.text),
                    _ => chunk.text.clone(),
                });
                chunks.push(chunk);
            }
        }
        let vectors = embed_texts(&embed_inputs, embedder)?;
        let entries = chunks
            .iter()
            .zip(vectors)
            .map(|(chunk, vector)| IndexEntry { chunk_id: chunk.chunk_id.clone(), vector })
            .collect();
        let texts = chunks.into_iter().map(|c| c.text).collect();
        Index::build(
            entries,
            texts,
            IndexMeta {
                dimension: embedder.dim(),
                tokenizer_id: tokenizer.id().to_string(),
                embedder_id: embedder.id().to_string(),
            },
        )
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn meta(&self) -> &IndexMeta {
        &self.meta
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.meta.dimension..(i + 1) * self.meta.dimension]
    }

    /// Top-k by cosine similarity (dot product of unit vectors, accumulated
    /// in f64), descending, ties broken by ascending chunk_id. Returns
    /// exactly `min(k, len)` hits.
    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<RetrievalHit>, KbError> {
        if k == 0 {
            return Err(KbError::InvalidArgument("k must be >= 1".into()));
        }
        if query.len() != self.meta.dimension {
            return Err(KbError::Query(format!(
                "query dimension {} does not match index dimension {}",
                query.len(),
                self.meta.dimension
            )));
        }
        let mut scored: Vec<(f64, usize)> = (0..self.len())
            .map(|i| {
                let dot = self
                    .row(i)
                    .iter()
                    .zip(query)
                    .map(|(a, b)| f64::from(*a) * f64::from(*b))
                    .sum::<f64>();
                (dot, i)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| self.ids[a.1].cmp(&self.ids[b.1])));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(similarity, i)| RetrievalHit {
                chunk_id: self.ids[i].clone(),
                similarity,
                text: self.texts[i].clone(),
            })
            .collect())
    }

    /// Writes `manifest.json`, `vectors.bin`, and `chunks.jsonl` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), KbError> {
        std::fs::create_dir_all(dir)?;
        let manifest = ManifestFile {
            format_version: FORMAT_VERSION,
            dimension: self.meta.dimension,
            count: self.len(),
            tokenizer_id: self.meta.tokenizer_id.clone(),
            embedder_id: self.meta.embedder_id.clone(),
        };
        std::fs::write(
            dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest)
                .map_err(|e| KbError::Persist(e.to_string()))?,
        )?;

        let mut blob = std::io::BufWriter::new(std::fs::File::create(dir.join("vectors.bin"))?);
        for value in &self.vectors {
            blob.write_all(&value.to_le_bytes())?;
        }
        blob.flush()?;

        let mut sidecar = String::new();
        for (id, text) in self.ids.iter().zip(&self.texts) {
            let record = ChunkRecord { chunk_id: id.clone(), text: text.clone() };
            sidecar.push_str(
                &serde_json::to_string(&record).map_err(|e| KbError::Persist(e.to_string()))?,
            );
            sidecar.push('\n');
        }
        std::fs::write(dir.join("chunks.jsonl"), sidecar)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, KbError> {
        let manifest: ManifestFile =
            serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json"))?)
                .map_err(|e| KbError::Persist(format!("bad manifest: {e}")))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(KbError::Persist(format!(
                "unsupported index format version {}",
                manifest.format_version
            )));
        }

        let mut raw = Vec::new();
        std::fs::File::open(dir.join("vectors.bin"))?.read_to_end(&mut raw)?;
        let expected = manifest.count * manifest.dimension * 4;
        if raw.len() != expected {
            return Err(KbError::Persist(format!(
                "vectors.bin holds {} bytes, expected {expected}",
                raw.len()
            )));
        }
        let vectors: Vec<f32> = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();

        let mut ids = Vec::with_capacity(manifest.count);
        let mut texts = Vec::with_capacity(manifest.count);
        for (lineno, line) in std::fs::read_to_string(dir.join("chunks.jsonl"))?
            .lines()
            .enumerate()
        {
            if line.trim().is_empty() {
                continue;
            }
            let record: ChunkRecord = serde_json::from_str(line)
                .map_err(|e| KbError::Persist(format!("chunks.jsonl line {}: {e}", lineno + 1)))?;
            ids.push(record.chunk_id);
            texts.push(record.text);
        }
        if ids.len() != manifest.count {
            return Err(KbError::Persist(format!(
                "chunks.jsonl holds {} records, manifest says {}",
                ids.len(),
                manifest.count
            )));
        }
        Ok(Self {
            meta: IndexMeta {
                dimension: manifest.dimension,
                tokenizer_id: manifest.tokenizer_id,
                embedder_id: manifest.embedder_id,
            },
            ids,
            texts,
            vectors,
        })
    }
}
