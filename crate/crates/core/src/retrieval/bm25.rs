//! Okapi BM25 over tool descriptions.
//!
//! score(D, Q) = Σ_{q ∈ Q} idf(q) · tf(q, D) · (k1 + 1) / (tf(q, D) + k1 · (1 − b + b · |D| / avgdl))
//! idf(q)      = ln(1 + (N − df(q) + 0.5) / (df(q) + 0.5))
//!
//! Query tokens are summed per occurrence, so a repeated query term counts
//! twice.

use std::collections::HashMap;

use super::{tokenize, RankedEntry, RetrievalConfig, RetrievalError};
use crate::registry::Registry;

#[derive(Debug, Clone)]
pub struct Bm25Index {
    revision: u64,
    names: Vec<String>,
    term_freqs: Vec<HashMap<String, u32>>,
    doc_lens: Vec<usize>,
    doc_freqs: HashMap<String, usize>,
    avg_doc_len: f64,
    k1: f64,
    b: f64,
}

pub fn build_bm25_index(
    registry: &Registry,
    config: &RetrievalConfig,
) -> Result<Bm25Index, RetrievalError> {
    if registry.is_empty() {
        return Err(RetrievalError::EmptyCorpus);
    }
    config.validate()?;
    let mut names = Vec::with_capacity(registry.len());
    let mut term_freqs = Vec::with_capacity(registry.len());
    let mut doc_lens = Vec::with_capacity(registry.len());
    let mut doc_freqs: HashMap<String, usize> = HashMap::new();
    for (name, description) in registry.corpus() {
        let tokens = tokenize(description);
        let mut tf: HashMap<String, u32> = HashMap::new();
        for t in &tokens {
            *tf.entry(t.clone()).or_default() += 1;
        }
        for term in tf.keys() {
            *doc_freqs.entry(term.clone()).or_default() += 1;
        }
        names.push(name.to_string());
        doc_lens.push(tokens.len());
        term_freqs.push(tf);
    }
    let avg_doc_len = doc_lens.iter().sum::<usize>() as f64 / doc_lens.len() as f64;
    Ok(Bm25Index {
        revision: registry.version(),
        names,
        term_freqs,
        doc_lens,
        doc_freqs,
        avg_doc_len,
        k1: config.bm25_k1,
        b: config.bm25_b,
    })
}

impl Bm25Index {
    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn doc_count(&self) -> usize {
        self.names.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn doc_len(&self, name: &str) -> Option<usize> {
        self.position(name).map(|i| self.doc_lens[i])
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.doc_freqs.get(term).copied().unwrap_or(0)
    }

    fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn idf(&self, term: &str) -> f64 {
        let n = self.names.len() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn score_doc(&self, doc: usize, query_tokens: &[String]) -> f64 {
        let dl = self.doc_lens[doc] as f64;
        let mut score = 0.0;
        for term in query_tokens {
            let tf = match self.term_freqs[doc].get(term) {
                Some(&tf) => tf as f64,
                None => continue,
            };
            // tf > 0 implies avg_doc_len > 0
            let norm = self.k1 * (1.0 - self.b + self.b * dl / self.avg_doc_len);
            score += self.idf(term) * (tf * (self.k1 + 1.0)) / (tf + norm);
        }
        score
    }

    pub(super) fn score_all(&self, query: &str) -> Vec<RankedEntry> {
        let tokens = tokenize(query);
        (0..self.names.len())
            .map(|i| RankedEntry {
                name: self.names[i].clone(),
                score: self.score_doc(i, &tokens),
            })
            .collect()
    }
}

pub fn bm25_score(index: &Bm25Index, query: &str, tool: &str) -> Result<f64, RetrievalError> {
    let doc = index
        .position(tool)
        .ok_or_else(|| RetrievalError::UnknownTool(tool.to_string()))?;
    Ok(index.score_doc(doc, &tokenize(query)))
}
