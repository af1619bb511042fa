//! Tool retrieval: rank registry tool descriptions against a query and keep
//! the top-k names.
//!
//! Backends are interchangeable behind [`Retriever`]: Okapi BM25 over the
//! description text, dense cosine ranking through an [`EmbeddingProvider`],
//! or `none`, which always returns an empty ranking.

mod bm25;
mod dense;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::Registry;

pub use bm25::{bm25_score, build_bm25_index, Bm25Index};
pub use dense::{
    cosine_similarity, hash_embedding_provider, DenseIndex, EmbeddingProvider,
    HashEmbeddingProvider, HttpEmbeddingProvider, ProviderError,
};

pub const DEFAULT_K: usize = 10;

/// Lowercase, split on non-alphanumeric characters, drop empty tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Backend {
    Bm25,
    /// Dense ranking with the named embedding provider.
    Dense(String),
    None,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Bm25 => f.write_str("bm25"),
            Backend::Dense(p) => write!(f, "dense-{p}"),
            Backend::None => f.write_str("none"),
        }
    }
}

impl FromStr for Backend {
    type Err = RetrievalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "bm25" => Ok(Backend::Bm25),
            "none" => Ok(Backend::None),
            other => match other.strip_prefix("dense-") {
                Some(p) if !p.is_empty() => Ok(Backend::Dense(p.to_string())),
                _ => Err(RetrievalError::UnknownBackend(other.to_string())),
            },
        }
    }
}

impl TryFrom<String> for Backend {
    type Error = RetrievalError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Backend> for String {
    fn from(value: Backend) -> Self {
        value.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetrievalConfig {
    pub backend: Backend,
    pub k: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Bm25,
            k: DEFAULT_K,
            bm25_k1: 1.2,
            bm25_b: 0.75,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<(), RetrievalError> {
        if self.k == 0 {
            return Err(RetrievalError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.bm25_k1 >= 0.0 && self.bm25_k1.is_finite()) {
            return Err(RetrievalError::InvalidConfig("bm25_k1 must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.bm25_b) {
            return Err(RetrievalError::InvalidConfig("bm25_b must be in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,
    #[error("tool `{0}` is not in the index")]
    UnknownTool(String),
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine similarity is undefined for an all-zero vector")]
    ZeroVector,
    #[error("retrieval backend unavailable: {0}")]
    BackendUnavailable(#[from] ProviderError),
    #[error("unknown retrieval backend `{0}`")]
    UnknownBackend(String),
    #[error("invalid retrieval config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub name: String,
    pub score: f64,
}

/// Top-k retrieval result: score descending, ties by ascending name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedTools {
    pub query: String,
    pub entries: Vec<RankedEntry>,
    pub backend: String,
    pub k: usize,
}

impl RankedTools {
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    /// 1-based rank of `name`, if present.
    pub fn rank_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name).map(|i| i + 1)
    }
}

/// Scores are kept on a 1e-12 grid. Mathematically equal scores can come out
/// of floating point an ulp apart; snapping them makes them compare equal so
/// the name tie-break applies.
pub fn quantize_score(score: f64) -> f64 {
    (score * 1e12).round() / 1e12
}

pub(crate) fn rank_order(a: &RankedEntry, b: &RankedEntry) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.name.cmp(&b.name))
}

/// A retrieval backend built over one registry revision.
#[derive(Clone)]
pub enum Retriever {
    Bm25(Bm25Index),
    Dense(DenseIndex),
    None,
}

impl fmt::Debug for Retriever {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.backend_id())
    }
}

impl Retriever {
    pub fn bm25(registry: &Registry, config: &RetrievalConfig) -> Result<Self, RetrievalError> {
        Ok(Retriever::Bm25(build_bm25_index(registry, config)?))
    }

    pub fn dense(
        registry: &Registry,
        provider_id: &str,
        provider: Arc<dyn EmbeddingProvider>,
    ) -> Result<Self, RetrievalError> {
        Ok(Retriever::Dense(DenseIndex::build(registry, provider_id, provider)?))
    }

    /// Builds the backend named in `config`. Dense backends take their
    /// provider from `provider`.
    pub fn build(
        registry: &Registry,
        config: &RetrievalConfig,
        provider: Option<Arc<dyn EmbeddingProvider>>,
    ) -> Result<Self, RetrievalError> {
        config.validate()?;
        match &config.backend {
            Backend::Bm25 => Retriever::bm25(registry, config),
            Backend::None => Ok(Retriever::None),
            Backend::Dense(id) => {
                let provider = match provider {
                    Some(p) => p,
                    None => builtin_provider(id)
                        .ok_or_else(|| RetrievalError::UnknownBackend(config.backend.to_string()))?,
                };
                Retriever::dense(registry, id, provider)
            }
        }
    }

    pub fn backend_id(&self) -> String {
        match self {
            Retriever::Bm25(_) => Backend::Bm25.to_string(),
            Retriever::Dense(d) => Backend::Dense(d.provider_id().to_string()).to_string(),
            Retriever::None => Backend::None.to_string(),
        }
    }

    /// Every indexed tool, ranked.
    pub fn rank_all(&self, query: &str) -> Result<Vec<RankedEntry>, RetrievalError> {
        let mut entries = match self {
            Retriever::Bm25(index) => index.score_all(query),
            Retriever::Dense(index) => index.score_all(query)?,
            Retriever::None => Vec::new(),
        };
        for e in &mut entries {
            e.score = quantize_score(e.score);
        }
        entries.sort_by(rank_order);
        Ok(entries)
    }

    pub fn retrieve_top_k(&self, query: &str, k: usize) -> Result<RankedTools, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidConfig("k must be at least 1".into()));
        }
        let mut entries = self.rank_all(query)?;
        entries.truncate(k);
        Ok(RankedTools {
            query: query.to_string(),
            entries,
            backend: self.backend_id(),
            k,
        })
    }
}

/// Providers that ship with the engine: `hash` (token plus character
/// trigram features) and `hash-token` (whole tokens only), both 256-dim.
pub fn builtin_provider(id: &str) -> Option<Arc<dyn EmbeddingProvider>> {
    match id {
        "hash" => Some(Arc::new(HashEmbeddingProvider::with_subwords(256, 3))),
        "hash-token" => Some(Arc::new(hash_embedding_provider(256))),
        _ => None,
    }
}
