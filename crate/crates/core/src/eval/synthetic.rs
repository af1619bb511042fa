//! Seeded generators for datasets with fixed style counts, annotated tool
//! corpora for retriever comparison, and answer scripts for scripted runs.

use std::collections::{BTreeMap, HashSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{PermutationSpec, Question, Setting, Style};
use crate::llm::OPTION_LABELS;
use crate::llm::{render_calls, FunctionCall, ScriptBook};
use crate::registry::{Binding, ParamKind, ParamSpec, Registry, RegistryError, ToolSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetShape {
    pub name: &'static str,
    pub mc: usize,
    pub oemc: usize,
    pub oe: usize,
    pub labeled: bool,
}

impl DatasetShape {
    pub const fn total(&self) -> usize {
        self.mc + self.oemc + self.oe
    }
}

pub const VALIDATION_SHAPE: DatasetShape = DatasetShape {
    name: "validation",
    mc: 183,
    oemc: 230,
    oe: 46,
    labeled: true,
};

pub const TEST1_SHAPE: DatasetShape = DatasetShape {
    name: "test1",
    mc: 663,
    oemc: 1274,
    oe: 142,
    labeled: false,
};

pub const TEST2_SHAPE: DatasetShape = DatasetShape {
    name: "test2",
    mc: 779,
    oemc: 1474,
    oe: 238,
    labeled: false,
};

pub fn shape_by_name(name: &str) -> Option<DatasetShape> {
    [VALIDATION_SHAPE, TEST1_SHAPE, TEST2_SHAPE]
        .into_iter()
        .find(|s| s.name == name)
}

pub const DRUGS: [&str; 16] = [
    "warfarin",
    "apixaban",
    "metformin",
    "lisinopril",
    "atorvastatin",
    "amiodarone",
    "levothyroxine",
    "sertraline",
    "valproate",
    "isotretinoin",
    "methotrexate",
    "lithium",
    "clopidogrel",
    "digoxin",
    "tamoxifen",
    "carbamazepine",
];

const CONCERNS: [(&str, &str); 6] = [
    ("a boxed warning", "for a patient with a history of bleeding"),
    ("a contraindication", "in a pregnant patient"),
    ("a clinically significant interaction", "for a patient already taking fluconazole"),
    ("a dose adjustment", "in a patient with renal impairment"),
    ("serious adverse reactions", "in an elderly patient"),
    ("monitoring requirements", "in a pediatric patient"),
];

fn make_question(rng: &mut ChaCha8Rng, id: String, style: Style, labeled: bool) -> Question {
    let (concern, context) = *CONCERNS.choose(rng).expect("non-empty");
    let picks: Vec<&str> = DRUGS.choose_multiple(rng, 4).copied().collect();
    let gold_pos = rng.random_range(0..4);
    let question = format!("Which of the following drugs carries {concern} {context}?");
    match style {
        Style::Oe => Question {
            id,
            style,
            question: format!("Name a drug that carries {concern} {context}."),
            options: None,
            gold: labeled.then(|| picks[gold_pos].to_string()),
        },
        _ => Question {
            id,
            style,
            question,
            options: Some(picks.iter().map(|s| s.to_string()).collect()),
            gold: labeled.then(|| OPTION_LABELS[gold_pos].to_string()),
        },
    }
}

/// Questions with exactly the shape's per-style counts, styles interleaved
/// in seeded order.
pub fn generate_dataset(shape: &DatasetShape, seed: u64) -> Vec<Question> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut styles: Vec<Style> = [(Style::Mc, shape.mc), (Style::Oemc, shape.oemc), (Style::Oe, shape.oe)]
        .iter()
        .flat_map(|&(s, n)| std::iter::repeat_n(s, n))
        .collect();
    styles.shuffle(&mut rng);
    let width = shape.total().to_string().len().max(3);
    styles
        .into_iter()
        .enumerate()
        .map(|(i, style)| make_question(&mut rng, format!("{}-{:0width$}", shape.name, i + 1), style, shape.labeled))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedQuery {
    pub id: String,
    pub query: String,
    pub gold: Vec<String>,
}

/// Tool descriptions plus queries with their gold tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedCorpus {
    pub tools: Vec<ToolSpec>,
    pub queries: Vec<AnnotatedQuery>,
}

impl AnnotatedCorpus {
    pub fn registry(&self) -> Result<Registry, RegistryError> {
        Registry::from_specs(self.tools.iter().cloned())
    }

    pub fn gold_map(&self) -> BTreeMap<String, Vec<String>> {
        self.queries.iter().map(|q| (q.id.clone(), q.gold.clone())).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusKind {
    /// Queries repeat three of the gold description's distinctive tokens.
    Lexical,
    /// Queries use other inflections of the gold description's word roots
    /// and share no whole token with it.
    Paraphrase,
}

const CONSONANTS: [&str; 14] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"];
const VOWELS: [&str; 5] = ["a", "e", "i", "o", "u"];
const SUFFIX_PAIRS: [(&str, &str); 6] = [
    ("ation", "ative"),
    ("ity", "ic"),
    ("ness", "ful"),
    ("ism", "ist"),
    ("ology", "ological"),
    ("emia", "emic"),
];

fn fresh_root(rng: &mut ChaCha8Rng, used: &mut HashSet<String>) -> String {
    loop {
        let syllables = rng.random_range(3..=4);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(CONSONANTS.choose(rng).expect("non-empty"));
            w.push_str(VOWELS.choose(rng).expect("non-empty"));
        }
        w.push_str(CONSONANTS.choose(rng).expect("non-empty"));
        if used.insert(w.clone()) {
            return w;
        }
    }
}

fn corpus_tool(name: String, description: String) -> ToolSpec {
    ToolSpec {
        name,
        description,
        params: vec![ParamSpec::new("query", ParamKind::String, true).described("Free-text query.")],
        binding: Binding::Fixture {
            file: "tools/synthetic.txt".into(),
        },
    }
}

pub fn generate_corpus(kind: CorpusKind, n_tools: usize, seed: u64) -> AnnotatedCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = HashSet::new();
    let mut tools = Vec::with_capacity(n_tools);
    let mut queries = Vec::with_capacity(n_tools);
    for i in 0..n_tools {
        let name = format!("tool_{i:03}");
        let roots: Vec<String> = (0..4).map(|_| fresh_root(&mut rng, &mut used)).collect();
        let (description, query) = match kind {
            CorpusKind::Lexical => (
                format!("Returns {} {} {} records for {} review.", roots[0], roots[1], roots[2], roots[3]),
                format!("{} {} {}", roots[2], roots[0], roots[1]),
            ),
            CorpusKind::Paraphrase => {
                let pairs: Vec<(&str, &str)> = (0..3).map(|_| *SUFFIX_PAIRS.choose(&mut rng).expect("non-empty")).collect();
                (
                    format!(
                        "Reports {}{} and {}{} findings with {}{} notes.",
                        roots[0], pairs[0].0, roots[1], pairs[1].0, roots[2], pairs[2].0
                    ),
                    format!(
                        "{}{} {}{} {}{}",
                        roots[1], pairs[1].1, roots[0], pairs[0].1, roots[2], pairs[2].1
                    ),
                )
            }
        };
        tools.push(corpus_tool(name.clone(), description));
        queries.push(AnnotatedQuery {
            id: format!("cq-{i:03}"),
            query,
            gold: vec![name],
        });
    }
    AnnotatedCorpus { tools, queries }
}

pub const DAILYMED_TOOL: &str = "dailymed_get_spl";

/// The drug named by the gold answer, or the first option.
fn subject_drug(q: &Question) -> String {
    if let (Some(opts), Some(label)) = (&q.options, q.gold_label()) {
        if let Some(i) = OPTION_LABELS.iter().position(|&l| l == label) {
            return opts[i].clone();
        }
    }
    if q.style == Style::Oe {
        if let Some(g) = &q.gold {
            return g.clone();
        }
    }
    q.options
        .as_ref()
        .and_then(|o| o.first().cloned())
        .unwrap_or_else(|| DRUGS[0].to_string())
}

/// Scripts that answer every labeled question correctly: agentic sessions
/// look up the label once, then answer; retrieval-free sessions answer
/// directly. Permuted settings get the relocated letter.
pub fn oracle_script_book(questions: &[Question], settings: &[Setting], permutation: &PermutationSpec) -> ScriptBook {
    let mut sessions = BTreeMap::new();
    for q in questions {
        let drug = subject_drug(q);
        for setting in settings {
            let letter = q.gold_label().map(|g| {
                if setting.permuted {
                    permutation.map_label(g).unwrap_or(g)
                } else {
                    g
                }
            });
            let answer = match (q.style, letter) {
                (Style::Mc, Some(l)) => l.to_string(),
                _ => drug.clone(),
            };
            let mut script = Vec::new();
            if setting.mode == super::ModeKind::Agentic {
                script.push(format!("{drug} label warnings and contraindications"));
                script.push(render_calls(&[FunctionCall::new(DAILYMED_TOOL, json!({"drug_name": drug}))]));
                script.push(format!("FINAL ANSWER: {answer}"));
            } else if q.style == Style::Mc {
                script.push(format!("ANSWER: {answer}"));
            } else {
                script.push(answer);
            }
            if q.style == Style::Oemc {
                script.push(letter.map_or_else(|| "ANSWER: A".to_string(), |l| format!("ANSWER: {l}")));
            }
            sessions.insert(setting.session_key(&q.id), script);
        }
    }
    ScriptBook::new(sessions, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::tokenize;

    #[test]
    fn shapes_are_exact() {
        for shape in [VALIDATION_SHAPE, TEST1_SHAPE, TEST2_SHAPE] {
            let qs = generate_dataset(&shape, 7);
            let count = |s| qs.iter().filter(|q| q.style == s).count();
            assert_eq!((qs.len(), count(Style::Mc), count(Style::Oemc), count(Style::Oe)), (shape.total(), shape.mc, shape.oemc, shape.oe));
            assert!(qs.iter().all(|q| q.check().is_ok()));
            assert_eq!(qs.iter().all(|q| q.gold.is_some()), shape.labeled);
        }
        assert_eq!(generate_dataset(&VALIDATION_SHAPE, 1), generate_dataset(&VALIDATION_SHAPE, 1));
        assert_ne!(generate_dataset(&VALIDATION_SHAPE, 1), generate_dataset(&VALIDATION_SHAPE, 2));
    }

    #[test]
    fn corpus_overlap_constraints() {
        let lexical = generate_corpus(CorpusKind::Lexical, 40, 3);
        let para = generate_corpus(CorpusKind::Paraphrase, 40, 3);
        for (corpus, min, max) in [(&lexical, 3, usize::MAX), (&para, 0, 1)] {
            for (tool, q) in corpus.tools.iter().zip(&corpus.queries) {
                let d: HashSet<String> = tokenize(&tool.description).into_iter().collect();
                let shared = tokenize(&q.query).into_iter().collect::<HashSet<_>>().intersection(&d).count();
                assert!(shared >= min && shared <= max, "{} vs {}", q.query, tool.description);
            }
        }
        assert!(lexical.registry().is_ok());
    }
}
