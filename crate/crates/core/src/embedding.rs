//! Classifier input text, embedding providers and the persistent embedding
//! cache shared with out-of-process embedders.
//!
//! Cache file layout (JSONL):
//!
//! ```text
//! {"provider": "hash", "dim": 64, "version": "1"}
//! {"key": "<sha256 hex of input text>", "vec": [0.1, ...]}
//! ```
//!
//! Vectors are stored as 32-bit floats. [`Embedder`] rounds every vector to
//! that precision before returning it, so a cache hit and a fresh
//! computation yield identical values.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::RwLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Section;
use crate::error::{Error, Result};

/// Default whitespace-token budget for classifier input.
pub const DEFAULT_MAX_TOKENS: usize = 25;

/// A finite, non-empty real vector.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::DimMismatch {
                expected: 1,
                actual: 0,
            });
        }
        if let Some(i) = components.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self(components))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Rounds every component to `f32` precision.
    pub fn to_stored_precision(&self) -> Self {
        Self(self.0.iter().map(|&x| x as f32 as f64).collect())
    }

    fn to_f32(&self) -> Vec<f32> {
        self.0.iter().map(|&x| x as f32).collect()
    }
}

impl<'de> Deserialize<'de> for EmbeddingVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        EmbeddingVector::new(v).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

/// Identity of the model that produced a set of vectors.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProviderDescriptor {
    #[serde(rename = "provider")]
    pub name: String,
    pub dim: usize,
    pub version: String,
}

impl ProviderDescriptor {
    pub fn ensure_matches(&self, other: &ProviderDescriptor) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::ProviderMismatch {
                expected: self.to_string(),
                found: other.to_string(),
            })
        }
    }
}

impl std::fmt::Display for ProviderDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{} (dim {})", self.name, self.version, self.dim)
    }
}

/// Maps text to a vector. Implementations must be deterministic and safe to
/// call from several threads at once.
pub trait EmbeddingProvider: Send + Sync {
    fn descriptor(&self) -> &ProviderDescriptor;
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector>;
}

/// Cache key for an input text: lowercase hex SHA-256 of its UTF-8 bytes.
pub fn content_key(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Heading tokens first, then body tokens, at most `max_tokens` whitespace
/// tokens in total, joined by single spaces.
pub fn build_input_text(section: &Section, max_tokens: usize) -> Result<String> {
    if max_tokens == 0 {
        return Err(Error::InvalidParameter("max_tokens must be at least 1".into()));
    }
    let tokens: Vec<&str> = section
        .heading
        .split_whitespace()
        .chain(section.body.split_whitespace())
        .take(max_tokens)
        .collect();
    if tokens.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(tokens.join(" "))
}

/// Test-double provider: a seeded pseudorandom unit vector per text.
///
/// The generator is ChaCha8 keyed by SHA-256 of `seed` (little-endian) and
/// the text; components are standard normal draws, then L2-normalized.
#[derive(Clone, Debug)]
pub struct HashProvider {
    descriptor: ProviderDescriptor,
    seed: u64,
}

pub const HASH_PROVIDER_NAME: &str = "hash";
const HASH_PROVIDER_VERSION: &str = "chacha8-normal-v1";

pub fn hash_provider(dim: usize, seed: u64) -> Result<HashProvider> {
    if dim < 2 {
        return Err(Error::InvalidParameter("hash provider dim must be at least 2".into()));
    }
    Ok(HashProvider {
        descriptor: ProviderDescriptor {
            name: HASH_PROVIDER_NAME.into(),
            dim,
            version: format!("{HASH_PROVIDER_VERSION};seed={seed}"),
        },
        seed,
    })
}

impl EmbeddingProvider for HashProvider {
    fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(text.as_bytes());
        let mut key = [0u8; 32];
        key.copy_from_slice(&hasher.finalize());
        let mut rng = ChaCha8Rng::from_seed(key);
        let mut v: Vec<f64> = (0..self.descriptor.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        } else {
            v[0] = 1.0;
        }
        EmbeddingVector::new(v)
    }
}

/// Feature-hashed bag of words: each lowercased alphanumeric token adds ±1
/// to one coordinate (bucket and sign from SHA-256 of the token), and the
/// sum is L2-normalized. Texts sharing vocabulary land near each other, which
/// makes it a usable stand-in for a learned encoder on synthetic corpora.
#[derive(Clone, Debug)]
pub struct LexicalProvider {
    descriptor: ProviderDescriptor,
}

pub const LEXICAL_PROVIDER_NAME: &str = "lexical";

pub fn lexical_provider(dim: usize) -> Result<LexicalProvider> {
    if dim < 2 {
        return Err(Error::InvalidParameter("lexical provider dim must be at least 2".into()));
    }
    Ok(LexicalProvider {
        descriptor: ProviderDescriptor {
            name: LEXICAL_PROVIDER_NAME.into(),
            dim,
            version: "sha256-signed-bow-v1".into(),
        },
    })
}

impl EmbeddingProvider for LexicalProvider {
    fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        let dim = self.descriptor.dim;
        let mut v = vec![0.0f64; dim];
        let lowered = text.to_lowercase();
        for token in lowered
            .split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
        {
            let h = Sha256::digest(token.as_bytes());
            let bucket = u64::from_le_bytes(h[..8].try_into().unwrap()) % dim as u64;
            let sign = if h[8] & 1 == 0 { 1.0 } else { -1.0 };
            v[bucket as usize] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        } else {
            v[0] = 1.0;
        }
        EmbeddingVector::new(v)
    }
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    vec: Vec<f32>,
}

/// Content-keyed vectors for one provider.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingCache {
    descriptor: ProviderDescriptor,
    entries: BTreeMap<String, Vec<f32>>,
}

impl EmbeddingCache {
    pub fn new(descriptor: ProviderDescriptor) -> Self {
        Self {
            descriptor,
            entries: BTreeMap::new(),
        }
    }

    pub fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<EmbeddingVector> {
        self.entries
            .get(key)
            .map(|v| EmbeddingVector(v.iter().map(|&x| x as f64).collect()))
    }

    pub fn insert(&mut self, key: String, vector: &EmbeddingVector) -> Result<()> {
        if vector.dim() != self.descriptor.dim {
            return Err(Error::DimMismatch {
                expected: self.descriptor.dim,
                actual: vector.dim(),
            });
        }
        self.entries.insert(key, vector.to_f32());
        Ok(())
    }

    /// Absorbs entries from a cache of the same provider.
    pub fn merge(&mut self, other: EmbeddingCache) -> Result<()> {
        self.descriptor.ensure_matches(&other.descriptor)?;
        self.entries.extend(other.entries);
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let corrupt = |line: usize, reason: String| Error::CorruptCache {
            path: path.to_path_buf(),
            reason: format!("line {line}: {reason}"),
        };
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| corrupt(1, "missing header".into()))?
            .map_err(|e| Error::io(path, e))?;
        let descriptor: ProviderDescriptor =
            serde_json::from_str(&header).map_err(|e| corrupt(1, e.to_string()))?;
        if descriptor.dim == 0 {
            return Err(corrupt(1, "dim must be positive".into()));
        }
        let mut cache = Self::new(descriptor);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: CacheEntry =
                serde_json::from_str(&line).map_err(|e| corrupt(i + 2, e.to_string()))?;
            if entry.vec.len() != cache.descriptor.dim {
                return Err(corrupt(
                    i + 2,
                    format!(
                        "vector has dim {}, header says {}",
                        entry.vec.len(),
                        cache.descriptor.dim
                    ),
                ));
            }
            if entry.vec.iter().any(|x| !x.is_finite()) {
                return Err(corrupt(i + 2, "non-finite component".into()));
            }
            cache.entries.insert(entry.key, entry.vec);
        }
        Ok(cache)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.descriptor).expect("descriptor serializes");
        out.push(b'\n');
        for (key, vec) in &self.entries {
            let entry = serde_json::json!({ "key": key, "vec": vec });
            out.extend(serde_json::to_vec(&entry).expect("entry serializes"));
            out.push(b'\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes())
    }
}

/// Cache-first embedding front end.
///
/// Concurrent lookups share a read lock; misses call the provider and take
/// the write lock only to insert. Without a provider, every miss is an error
/// naming the text key (the cache must have been filled out of process).
pub struct Embedder {
    provider: Option<Box<dyn EmbeddingProvider>>,
    descriptor: ProviderDescriptor,
    cache: RwLock<EmbeddingCache>,
}

impl Embedder {
    pub fn new(provider: Box<dyn EmbeddingProvider>) -> Self {
        let descriptor = provider.descriptor().clone();
        Self {
            cache: RwLock::new(EmbeddingCache::new(descriptor.clone())),
            descriptor,
            provider: Some(provider),
        }
    }

    /// Provider plus a pre-populated cache; descriptors must agree.
    pub fn with_cache(provider: Box<dyn EmbeddingProvider>, cache: EmbeddingCache) -> Result<Self> {
        provider.descriptor().ensure_matches(cache.descriptor())?;
        let descriptor = cache.descriptor().clone();
        Ok(Self {
            provider: Some(provider),
            descriptor,
            cache: RwLock::new(cache),
        })
    }

    pub fn cache_only(cache: EmbeddingCache) -> Self {
        Self {
            provider: None,
            descriptor: cache.descriptor().clone(),
            cache: RwLock::new(cache),
        }
    }

    pub fn descriptor(&self) -> &ProviderDescriptor {
        &self.descriptor
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.is_empty() {
            return Err(Error::EmptyInput);
        }
        let key = content_key(text);
        if let Some(v) = self.cache.read().expect("cache lock poisoned").get(&key) {
            return Ok(v);
        }
        let provider = self.provider.as_ref().ok_or_else(|| Error::Provider {
            key: key.clone(),
            reason: "text not present in embedding cache".into(),
        })?;
        let fresh = provider.embed_text(text).map_err(|e| match e {
            e @ Error::Provider { .. } => e,
            other => Error::Provider {
                key: key.clone(),
                reason: other.to_string(),
            },
        })?;
        if fresh.dim() != self.descriptor.dim {
            return Err(Error::DimMismatch {
                expected: self.descriptor.dim,
                actual: fresh.dim(),
            });
        }
        let stored = fresh.to_stored_precision();
        self.cache
            .write()
            .expect("cache lock poisoned")
            .insert(key, &stored)?;
        Ok(stored)
    }

    pub fn snapshot(&self) -> EmbeddingCache {
        self.cache.read().expect("cache lock poisoned").clone()
    }
}

/// One line of the input-text manifest handed to external embedders.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub key: String,
    pub text: String,
}

impl ManifestEntry {
    pub fn new(text: String) -> Self {
        Self {
            key: content_key(&text),
            text,
        }
    }
}

/// Deduplicated by key and sorted by key.
pub fn manifest_bytes<I: IntoIterator<Item = String>>(texts: I) -> Vec<u8> {
    let unique: BTreeMap<String, String> = texts
        .into_iter()
        .map(|t| (content_key(&t), t))
        .collect();
    let mut out = Vec::new();
    for (key, text) in unique {
        out.extend(serde_json::to_vec(&ManifestEntry { key, text }).expect("entry serializes"));
        out.push(b'\n');
    }
    out
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = crate::io::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
