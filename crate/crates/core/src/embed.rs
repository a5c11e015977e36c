//! Document embeddings: a chunk-level provider contract and mean pooling.

use serde::{Deserialize, Serialize};

use crate::corpus::MaskedDocument;

pub const DEFAULT_DIM: usize = 768;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("document {0} has no chunks")]
    NoChunks(String),
    #[error("provider failed on chunk {chunk_index}: {message}")]
    Provider { chunk_index: usize, message: String },
    #[error("chunk {chunk_index}: expected dimension {expected}, got {got}")]
    DimMismatch {
        chunk_index: usize,
        expected: usize,
        got: usize,
    },
    #[error("chunk {0}: non-finite embedding value")]
    NonFinite(usize),
}

/// Maps one chunk of masked text to a fixed-length vector.
///
/// Implementations must be deterministic in (provider identity, chunk text)
/// and safe to share across threads.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_chunk(&self, text: &str) -> Result<Vec<f64>, String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub doc_id: String,
    pub dim: usize,
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Unweighted mean of the chunk vectors, accumulated in f64 in chunk-index
/// order and stored as f32.
pub fn embed_document(doc: &MaskedDocument, provider: &dyn EmbeddingProvider) -> Result<EmbeddingVector, EmbedError> {
    let values =
        embed_chunks(doc.chunks.iter().map(|c| (c.chunk_index, c.text.as_str())), provider).map_err(|e| match e {
            EmbedError::NoChunks(_) => EmbedError::NoChunks(doc.doc_id.clone()),
            other => other,
        })?;
    Ok(EmbeddingVector {
        doc_id: doc.doc_id.clone(),
        dim: provider.dim(),
        values,
    })
}

/// Pools arbitrary (chunk_index, text) pairs; used for documents and for
/// ad-hoc drafts that never become a [`MaskedDocument`].
pub fn embed_chunks<'a>(
    chunks: impl IntoIterator<Item = (usize, &'a str)>,
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<f32>, EmbedError> {
    let mut chunks: Vec<(usize, &str)> = chunks.into_iter().collect();
    if chunks.is_empty() {
        return Err(EmbedError::NoChunks(String::new()));
    }
    chunks.sort_by_key(|(i, _)| *i);
    let dim = provider.dim();
    let mut acc = vec![0.0f64; dim];
    for (idx, text) in &chunks {
        let v = provider.embed_chunk(text).map_err(|message| EmbedError::Provider {
            chunk_index: *idx,
            message,
        })?;
        if v.len() != dim {
            return Err(EmbedError::DimMismatch {
                chunk_index: *idx,
                expected: dim,
                got: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFinite(*idx));
        }
        for (a, x) in acc.iter_mut().zip(&v) {
            *a += x;
        }
    }
    let n = chunks.len() as f64;
    Ok(acc.iter().map(|a| (a / n) as f32).collect())
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit key of (seed, token): FNV-1a over the token bytes, seeded.
pub fn token_key(seed: u64, token: &str) -> u64 {
    let mut h = FNV_OFFSET ^ splitmix64(seed);
    for b in token.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// hash64(seed, token, entry) mapped to [-1, 1).
pub fn token_entry(key: u64, entry: usize) -> f64 {
    let u = splitmix64(key ^ (entry as u64).wrapping_mul(GOLDEN));
    let unit = (u >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * unit - 1.0
}

/// Offline stand-in for a pretrained encoder: each whitespace token maps to
/// a seeded pseudo-random vector and a chunk is the mean of its token vectors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashingEmbedder {
    name: String,
    seed: u64,
    dim: usize,
}

pub fn hashing_embedder(seed: u64, dim: usize) -> HashingEmbedder {
    assert!(dim >= 1, "embedding dimension must be positive");
    HashingEmbedder {
        name: format!("hashing-{seed}-{dim}"),
        seed,
        dim,
    }
}

impl HashingEmbedder {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn token_vector(&self, token: &str) -> Vec<f64> {
        let key = token_key(self.seed, token);
        (0..self.dim).map(|j| token_entry(key, j)).collect()
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_chunk(&self, text: &str) -> Result<Vec<f64>, String> {
        let mut acc = vec![0.0f64; self.dim];
        let mut n = 0usize;
        for tok in text.split_whitespace() {
            let key = token_key(self.seed, tok);
            for (j, a) in acc.iter_mut().enumerate() {
                *a += token_entry(key, j);
            }
            n += 1;
        }
        if n == 0 {
            return Err("chunk has no tokens".to_string());
        }
        let n = n as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(acc)
    }
}
