#![allow(dead_code)]

pub mod oracle;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use toolrag::agent::{OutcomeStatus, ToolOutcome};
use toolrag::clock::ManualClock;
use toolrag::executor::{ExecMode, ExecutionEnv, Executor, ToolExecutor};
use toolrag::http::{OfflineTransport, StaticTransport};
use toolrag::llm::{AdapterError, CompletionRequest, LlmAdapter};
use toolrag::registry::{Registry, ToolSpec, ValidatedCall};

/// Time recorded fixtures claim to have been fetched at.
pub const RECORDED_AT: u64 = 1_719_878_400_000;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

pub fn fixture_registry() -> Registry {
    Registry::load(fixtures().join("registry.json")).expect("fixture registry loads")
}

pub fn updating(var: &str) -> bool {
    std::env::var_os(var).is_some_and(|v| v == "1")
}

/// Executor replaying the committed store, with an offline transport so any
/// attempt to go upstream is visible.
pub fn replay_executor() -> (Executor, Arc<OfflineTransport>) {
    let transport = Arc::new(OfflineTransport::new());
    let env = ExecutionEnv::fixtures_only(fixtures().join("http"), fixtures());
    let exec = Executor::new(env, transport.clone()).with_clock(Arc::new(ManualClock::new(RECORDED_AT, 0)));
    (exec, transport)
}

/// Executor recording the hand-written upstream bodies into `store`.
pub fn recording_executor(store: &Path) -> Executor {
    let upstream = StaticTransport::from_dir(fixtures().join("upstream")).expect("upstream index loads");
    let env = ExecutionEnv {
        mode: ExecMode::Record,
        cache_dir: Some(store.to_path_buf()),
        fixture_root: fixtures(),
        ..ExecutionEnv::default()
    };
    Executor::new(env, Arc::new(upstream)).with_clock(Arc::new(ManualClock::new(RECORDED_AT, 0)))
}

/// Returns `tool:args` as an ok payload and counts invocations.
#[derive(Default)]
pub struct CountingExecutor {
    calls: AtomicUsize,
}

impl CountingExecutor {
    pub fn count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ToolExecutor for CountingExecutor {
    fn execute(&self, spec: &ToolSpec, call: &ValidatedCall) -> ToolOutcome {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let args = serde_json::Value::Object(call.as_call().arguments);
        ToolOutcome::new(
            OutcomeStatus::Ok {
                payload: format!("{} {args}", spec.name),
            },
            0,
            call.as_call().fingerprint(),
        )
    }
}

/// Replies from a fixed list and keeps every prompt it was sent.
pub struct CapturingAdapter {
    replies: Mutex<Vec<String>>,
    pub prompts: Mutex<Vec<CompletionRequest>>,
}

impl CapturingAdapter {
    pub fn new(replies: &[&str]) -> Self {
        Self {
            replies: Mutex::new(replies.iter().rev().map(|s| s.to_string()).collect()),
            prompts: Mutex::new(Vec::new()),
        }
    }
}

impl LlmAdapter for CapturingAdapter {
    fn model_id(&self) -> String {
        "capturing".into()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, AdapterError> {
        self.prompts.lock().unwrap().push(request.clone());
        self.replies
            .lock()
            .unwrap()
            .pop()
            .ok_or_else(|| AdapterError::new("script exhausted", false))
    }
}

pub const WARFARIN_QUESTION: &str = "Which adverse effect is the subject of the boxed warning on warfarin sodium labels?";

pub fn warfarin_options() -> Vec<String> {
    ["Hepatotoxicity", "Major or fatal bleeding", "Lactic acidosis", "QT prolongation"]
        .map(String::from)
        .to_vec()
}

/// A scripted agent session whose trace is pinned under `tests/golden`.
pub struct Scenario {
    pub name: &'static str,
    pub max_iterations: usize,
    pub script: Vec<&'static str>,
}

pub fn golden_scenarios() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "immediate_final",
            max_iterations: 10,
            script: vec!["warfarin boxed warning adverse effect", "FINAL ANSWER: B"],
        },
        Scenario {
            name: "malformed_param_feedback",
            max_iterations: 10,
            script: vec![
                "warfarin boxed warning adverse effect",
                r#"[{"name": "dailymed_get_spl", "arguments": {"drug_name": "warfarin"}}, {"name": "FDA_get_boxed_warning_by_drug_name", "arguments": {"drugname": "warfarin"}}]"#,
                "The label's boxed warning concerns bleeding risk.\nFINAL ANSWER: B",
            ],
        },
        Scenario {
            name: "budget_exhausted",
            max_iterations: 3,
            script: vec![
                "warfarin boxed warning adverse effect",
                r#"[{"name": "FDA_get_boxed_warning_by_drug_name", "arguments": {"drug_name": "warfarin"}}]"#,
                r#"[{"name": "FDA_get_warnings_by_drug_name", "arguments": {"drug_name": "warfarin"}}]"#,
                r#"[{"name": "FDA_get_adverse_reactions_by_drug_name", "arguments": {"drug_name": "warfarin"}}]"#,
                "FINAL ANSWER: B",
            ],
        },
    ]
}

pub fn run_scenario(s: &Scenario) -> toolrag::agent::SessionOutcome {
    use toolrag::agent::{run_session, SessionConfig, SessionDeps};
    use toolrag::llm::ScriptedAdapter;
    use toolrag::retrieval::{RetrievalConfig, Retriever};

    let registry = fixture_registry();
    let config = SessionConfig {
        max_iterations: s.max_iterations,
        retrieval: RetrievalConfig { k: 5, ..RetrievalConfig::default() },
        ..SessionConfig::default()
    };
    let retriever = Retriever::bm25(&registry, &config.retrieval).unwrap();
    let adapter = ScriptedAdapter::new(s.script.iter().copied());
    let (executor, transport) = replay_executor();
    let clock = ManualClock::new(RECORDED_AT, 5);
    let deps = SessionDeps {
        registry: &registry,
        retriever: &retriever,
        adapter: &adapter,
        executor: &executor,
        clock: &clock,
        contexts: None,
    };
    let options = warfarin_options();
    let outcome = run_session("warfarin-boxed-MC", WARFARIN_QUESTION, Some(&options), &deps, &config).unwrap();
    assert_eq!(transport.attempts(), 0);
    outcome
}

const WORDS: [&str; 24] = [
    "drug", "label", "warning", "dose", "renal", "hepatic", "bleeding", "pregnancy", "target", "gene",
    "disease", "ontology", "search", "adverse", "reaction", "interaction", "returns", "lists", "the", "of",
    "for", "a", "phenotype", "name",
];

/// Up to 50 tools with one- or two-sentence descriptions over a small
/// vocabulary, so terms repeat across documents and ties are common.
pub fn random_corpus<R: rand::Rng>(rng: &mut R) -> Vec<(String, String)> {
    let n = rng.random_range(1..=50);
    let mut names: Vec<String> = (0..n).map(|i| format!("tool_{:02}_{}", i, rng.random_range(0..1000))).collect();
    names.sort();
    names.dedup();
    // registration order unrelated to name order, so tie-breaks are exercised
    rand::seq::SliceRandom::shuffle(names.as_mut_slice(), rng);
    names
        .into_iter()
        .map(|name| {
            let sentences = rng.random_range(1..=2);
            let desc = (0..sentences)
                .map(|_| {
                    let len = rng.random_range(1..=12);
                    let ws: Vec<&str> = (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect();
                    let mut s = ws.join(" ");
                    s.push('.');
                    s[..1].to_uppercase() + &s[1..]
                })
                .collect::<Vec<_>>()
                .join(" ");
            (name, desc)
        })
        .collect()
}

pub fn random_query(rng: &mut impl rand::Rng) -> String {
    let len = rng.random_range(1..=6);
    (0..len).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

pub fn registry_of(docs: &[(String, String)]) -> Registry {
    Registry::from_specs(docs.iter().map(|(name, desc)| ToolSpec {
        name: name.clone(),
        description: desc.clone(),
        params: vec![],
        binding: toolrag::registry::Binding::Fixture { file: "tools/synthetic.txt".into() },
    }))
    .unwrap()
}
