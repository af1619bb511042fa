//! Brute-force reference rankings, written without the engine's index types.

use std::cmp::Ordering;

pub const K1: f64 = 1.2;
pub const B: f64 = 0.75;

/// Lowercased runs of alphanumeric characters.
pub fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            cur.push(c);
        } else if !cur.is_empty() {
            out.push(cur.to_lowercase());
            cur.clear();
        }
    }
    if !cur.is_empty() {
        out.push(cur.to_lowercase());
    }
    out
}

/// Okapi BM25 of every document, recomputing every statistic from scratch.
pub fn bm25_scores(docs: &[(String, String)], query: &str) -> Vec<(String, f64)> {
    let tokenized: Vec<Vec<String>> = docs.iter().map(|(_, d)| words(d)).collect();
    let n = docs.len() as f64;
    let total: usize = tokenized.iter().map(Vec::len).sum();
    let avgdl = total as f64 / n;
    let q = words(query);
    docs.iter()
        .zip(&tokenized)
        .map(|((name, _), doc)| {
            let dl = doc.len() as f64;
            let mut s = 0.0;
            for term in &q {
                let tf = doc.iter().filter(|t| *t == term).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let df = tokenized.iter().filter(|d| d.contains(term)).count() as f64;
                let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
                s += idf * tf * (K1 + 1.0) / (tf + K1 * (1.0 - B + B * dl / avgdl));
            }
            (name.clone(), s)
        })
        .collect()
}

/// Descending score on a 1e-12 grid, then ascending name.
pub fn rank(scored: Vec<(String, f64)>) -> Vec<(String, f64)> {
    let mut keyed: Vec<(i64, String, f64)> = scored.into_iter().map(|(n, s)| ((s * 1e12).round() as i64, n, s)).collect();
    keyed.sort_by(|a, b| match b.0.cmp(&a.0) {
        Ordering::Equal => a.1.cmp(&b.1),
        other => other,
    });
    keyed.into_iter().map(|(_, n, s)| (n, s)).collect()
}

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        0.0
    } else {
        dot / (nu * nv)
    }
}
