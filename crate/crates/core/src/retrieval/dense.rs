//! Dense retrieval: cosine ranking of description embeddings.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{tokenize, RankedEntry, RetrievalError};
use crate::fingerprint::sha256_hex;
use crate::http::{HttpRequest, Transport};
use crate::registry::Registry;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("embedding provider `{provider}` failed: {message}")]
pub struct ProviderError {
    pub provider: String,
    pub message: String,
}

/// Text embedding model. Identical text must embed to an identical vector
/// within one provider instance.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64, RetrievalError> {
    if u.len() != v.len() {
        return Err(RetrievalError::DimensionMismatch(u.len(), v.len()));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(RetrievalError::ZeroVector);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// Deterministic stand-in for a dense model: features are hashed into
/// `dimension` buckets and the vector is L2-normalized.
///
/// Features are whole tokens and, when `subword` is set, the character
/// n-grams of each `<token>` (boundary-marked), which gives inflected forms
/// such as "interaction" / "interactions" overlapping vectors.
#[derive(Debug, Clone)]
pub struct HashEmbeddingProvider {
    dimension: usize,
    subword: Option<usize>,
}

/// Token-only hashing provider. `dimension` is raised to at least 8.
pub fn hash_embedding_provider(dimension: usize) -> HashEmbeddingProvider {
    HashEmbeddingProvider {
        dimension: dimension.max(8),
        subword: None,
    }
}

impl HashEmbeddingProvider {
    pub fn with_subwords(dimension: usize, n: usize) -> Self {
        Self {
            dimension: dimension.max(8),
            subword: Some(n.max(2)),
        }
    }

    fn bucket(&self, feature: &str) -> usize {
        let digest = sha256_hex(feature.as_bytes());
        let prefix = u64::from_str_radix(&digest[..16], 16).expect("hex digest");
        (prefix % self.dimension as u64) as usize
    }

    fn features(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        for token in tokenize(text) {
            if let Some(n) = self.subword {
                let marked: Vec<char> = format!("<{token}>").chars().collect();
                if marked.len() <= n {
                    out.push(format!("g:{}", marked.iter().collect::<String>()));
                } else {
                    for w in marked.windows(n) {
                        out.push(format!("g:{}", w.iter().collect::<String>()));
                    }
                }
            }
            out.push(format!("t:{token}"));
        }
        out
    }
}

impl EmbeddingProvider for HashEmbeddingProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let mut v = vec![0.0; self.dimension];
        for f in self.features(text) {
            v[self.bucket(&f)] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Remote provider: `POST {texts: [..]}` returning `{vectors: [[..]]}`.
pub struct HttpEmbeddingProvider {
    name: String,
    url: String,
    dimension: usize,
    transport: Arc<dyn Transport>,
}

impl HttpEmbeddingProvider {
    pub fn new(
        name: impl Into<String>,
        url: impl Into<String>,
        dimension: usize,
        transport: Arc<dyn Transport>,
    ) -> Self {
        Self {
            name: name.into(),
            url: url.into(),
            dimension,
            transport,
        }
    }

    fn error(&self, message: impl Into<String>) -> ProviderError {
        ProviderError {
            provider: self.name.clone(),
            message: message.into(),
        }
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        let mut v = self.embed_batch(&[text])?;
        Ok(v.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let body = serde_json::to_value(EmbedRequest { texts }).expect("request serializes");
        let response = self
            .transport
            .send(&HttpRequest::post_json(&self.url, &body))
            .map_err(|e| self.error(e.to_string()))?;
        if !response.is_success() {
            return Err(self.error(format!("status {}", response.status)));
        }
        let parsed: EmbedResponse = serde_json::from_str(&response.body)
            .map_err(|e| self.error(format!("malformed response: {e}")))?;
        if parsed.vectors.len() != texts.len() {
            return Err(self.error(format!(
                "expected {} vectors, got {}",
                texts.len(),
                parsed.vectors.len()
            )));
        }
        if let Some(bad) = parsed.vectors.iter().find(|v| v.len() != self.dimension) {
            return Err(self.error(format!(
                "expected dimension {}, got {}",
                self.dimension,
                bad.len()
            )));
        }
        Ok(parsed.vectors)
    }
}

/// Description embeddings precomputed at build time.
#[derive(Clone)]
pub struct DenseIndex {
    revision: u64,
    provider_id: String,
    provider: Arc<dyn EmbeddingProvider>,
    names: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl DenseIndex {
    pub fn build(
        registry: &Registry,
        provider_id: &str,
        provider: Arc<dyn EmbeddingProvider>,
    ) -> Result<Self, RetrievalError> {
        if registry.is_empty() {
            return Err(RetrievalError::EmptyCorpus);
        }
        let (names, texts): (Vec<String>, Vec<&str>) =
            registry.corpus().map(|(n, d)| (n.to_string(), d)).unzip();
        let vectors = provider.embed_batch(&texts)?;
        Ok(Self {
            revision: registry.version(),
            provider_id: provider_id.to_string(),
            provider,
            names,
            vectors,
        })
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn provider_id(&self) -> &str {
        &self.provider_id
    }

    /// Pairs without a defined cosine (an all-zero side) score 0.
    pub(super) fn score_all(&self, query: &str) -> Result<Vec<RankedEntry>, RetrievalError> {
        let q = self.provider.embed(query)?;
        self.names
            .iter()
            .zip(&self.vectors)
            .map(|(name, v)| {
                let score = match cosine_similarity(&q, v) {
                    Ok(s) => s,
                    Err(RetrievalError::ZeroVector) => 0.0,
                    Err(e) => return Err(e),
                };
                Ok(RankedEntry {
                    name: name.clone(),
                    score,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::{HttpResponse, TransportError};

    #[test]
    fn cosine_basics() {
        let u = [1.0, 2.0, -3.0];
        assert!((cosine_similarity(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 2.0]),
            Err(RetrievalError::DimensionMismatch(1, 2))
        ));
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]),
            Err(RetrievalError::ZeroVector)
        ));
    }

    #[test]
    fn hash_embedding_is_deterministic_and_unit() {
        let p = hash_embedding_provider(64);
        let a = p.embed("drug warnings").unwrap();
        assert_eq!(a, p.embed("drug warnings").unwrap());
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        let empty = p.embed("").unwrap();
        assert!(matches!(cosine_similarity(&empty, &a), Err(RetrievalError::ZeroVector)));
        assert_eq!(hash_embedding_provider(2).dimension(), 8);
    }

    #[test]
    fn subwords_connect_inflections() {
        let tok = hash_embedding_provider(1024);
        let sub = HashEmbeddingProvider::with_subwords(1024, 3);
        let q = "interactions";
        let d = "interaction";
        let tok_sim = cosine_similarity(&tok.embed(q).unwrap(), &tok.embed(d).unwrap()).unwrap();
        let sub_sim = cosine_similarity(&sub.embed(q).unwrap(), &sub.embed(d).unwrap()).unwrap();
        assert!(sub_sim > 0.5, "{sub_sim}");
        assert!(sub_sim > tok_sim);
    }

    struct Canned(String);
    impl Transport for Canned {
        fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
            assert_eq!(request.method, "POST");
            assert!(request.body.as_deref().unwrap().contains("\"texts\""));
            Ok(HttpResponse {
                status: 200,
                body: self.0.clone(),
            })
        }
    }

    #[test]
    fn http_provider_checks_shape() {
        let ok = HttpEmbeddingProvider::new(
            "remote",
            "http://embed.test",
            2,
            Arc::new(Canned(r#"{"vectors": [[0.6, 0.8]]}"#.into())),
        );
        assert_eq!(ok.embed("x").unwrap(), vec![0.6, 0.8]);
        let wrong_dim = HttpEmbeddingProvider::new(
            "remote",
            "http://embed.test",
            3,
            Arc::new(Canned(r#"{"vectors": [[0.6, 0.8]]}"#.into())),
        );
        assert!(wrong_dim.embed("x").is_err());
        let garbage =
            HttpEmbeddingProvider::new("remote", "http://embed.test", 2, Arc::new(Canned("{".into())));
        assert!(garbage.embed("x").is_err());
    }
}
