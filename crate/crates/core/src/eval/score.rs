use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{EvalError, PermutationSpec, Question, Style};
use crate::agent::AgentTrace;
use crate::retrieval::RankedTools;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Prediction {
    Choice(char),
    Text(String),
    Unparseable,
}

impl Prediction {
    /// The same choice expressed against the options before `spec` was applied.
    pub fn unpermute(&self, spec: &PermutationSpec) -> Prediction {
        match self {
            Prediction::Choice(c) => spec
                .inverse()
                .map_label(*c)
                .map_or(Prediction::Unparseable, Prediction::Choice),
            other => other.clone(),
        }
    }

    /// A choice made on the original options, carried over to permuted ones.
    pub fn permute(&self, spec: &PermutationSpec) -> Prediction {
        match self {
            Prediction::Choice(c) => spec.map_label(*c).map_or(Prediction::Unparseable, Prediction::Choice),
            other => other.clone(),
        }
    }

    pub fn text(&self) -> String {
        match self {
            Prediction::Choice(c) => c.to_string(),
            Prediction::Text(t) => t.clone(),
            Prediction::Unparseable => String::new(),
        }
    }
}

/// Lowercase, punctuation stripped, whitespace collapsed.
pub fn normalize_answer(text: &str) -> String {
    text.to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredQuestion {
    pub id: String,
    pub style: Style,
    pub predicted: Prediction,
    pub gold: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub n: usize,
    pub correct: usize,
    pub unparseable: usize,
    pub accuracy: f64,
    pub rows: Vec<ScoredQuestion>,
}

pub fn is_correct(q: &Question, p: &Prediction) -> Result<bool, EvalError> {
    let gold = q.gold.as_deref().ok_or_else(|| EvalError::MissingGold(q.id.clone()))?;
    Ok(match (q.style, p) {
        (_, Prediction::Unparseable) => false,
        (Style::Oe, Prediction::Text(t)) => normalize_answer(t) == normalize_answer(gold),
        (Style::Mc | Style::Oemc, Prediction::Choice(c)) => q.gold_label() == Some(*c),
        _ => false,
    })
}

/// Accuracy over `predictions`; each must name a question in `questions`.
pub fn score(predictions: &[(String, Prediction)], questions: &[Question]) -> Result<ScoreTable, EvalError> {
    let by_id: HashMap<&str, &Question> = questions.iter().map(|q| (q.id.as_str(), q)).collect();
    let mut rows = Vec::with_capacity(predictions.len());
    for (id, p) in predictions {
        let q = by_id.get(id.as_str()).ok_or_else(|| EvalError::UnknownQuestionId(id.clone()))?;
        let correct = is_correct(q, p)?;
        rows.push(ScoredQuestion {
            id: id.clone(),
            style: q.style,
            predicted: p.clone(),
            gold: q.gold.clone().unwrap_or_default(),
            correct,
        });
    }
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    let n = rows.len();
    let correct = rows.iter().filter(|r| r.correct).count();
    let unparseable = rows.iter().filter(|r| r.predicted == Prediction::Unparseable).count();
    Ok(ScoreTable {
        n,
        correct,
        unparseable,
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalMetrics {
    pub k: usize,
    pub n: usize,
    pub recall: f64,
    pub mrr: f64,
}

/// Recall@k and mean reciprocal rank over `(ranking, gold tools)` pairs. A
/// query counts as a hit when any gold tool is within the top k.
pub fn ranking_metrics<'a>(
    rankings: impl IntoIterator<Item = (&'a RankedTools, &'a [String])>,
    k: usize,
) -> RetrievalMetrics {
    let (mut n, mut hits, mut rr) = (0usize, 0usize, 0.0f64);
    for (ranking, gold) in rankings {
        n += 1;
        let first = ranking
            .entries
            .iter()
            .take(k)
            .position(|e| gold.contains(&e.name));
        if let Some(pos) = first {
            hits += 1;
            rr += 1.0 / (pos + 1) as f64;
        }
    }
    let denom = n.max(1) as f64;
    RetrievalMetrics {
        k,
        n,
        recall: hits as f64 / denom,
        mrr: rr / denom,
    }
}

/// Metrics from the first retrieval step of each annotated session.
pub fn retrieval_recall_at_k(
    traces: &[AgentTrace],
    gold: &BTreeMap<String, Vec<String>>,
    k: usize,
) -> Result<RetrievalMetrics, EvalError> {
    let mut pairs = Vec::new();
    for t in traces {
        let Some(tools) = gold.get(&t.question_id) else {
            continue;
        };
        let first = t
            .retrievals()
            .next()
            .ok_or_else(|| EvalError::NoRetrievalSteps(t.question_id.clone()))?;
        pairs.push((first, tools.as_slice()));
    }
    Ok(ranking_metrics(pairs, k))
}
