//! The iterative retrieve, call, execute, feed-back loop.

mod trace;

pub use trace::{
    freeze_context, AgentTrace, CallRecord, OutcomeStatus, Termination, TimedStep, ToolOutcome, TraceError,
    TraceRecord, TraceStep,
};

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::executor::ToolExecutor;
use crate::llm::{
    build_agent_prompt, build_forced_final_prompt, build_rewrite_prompt, build_tq_prompt, parse_turn, AdapterError,
    FunctionCall, LlmAdapter, ParseMode, PromptError, TurnKind, FINAL_SENTINEL,
};
use crate::registry::Registry;
use crate::retrieval::{RankedTools, RetrievalConfig, RetrievalError, Retriever};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionMode {
    Agentic,
    FixedRetrieval { context_id: String },
    NoRetrieval,
}

impl SessionMode {
    pub fn label(&self) -> &'static str {
        match self {
            SessionMode::Agentic => "agentic",
            SessionMode::FixedRetrieval { .. } => "fixed_retrieval",
            SessionMode::NoRetrieval => "no_retrieval",
        }
    }
}

/// What to do when a call repeats one that already succeeded in the session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepeatedCallPolicy {
    /// Serve the earlier payload as a `cached` outcome.
    #[default]
    Cached,
    /// Refuse the call with a validation error pointing at the earlier result.
    Reject,
    /// Execute it again (no mitigation).
    Allow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub retrieval: RetrievalConfig,
    pub max_iterations: usize,
    pub max_calls_per_round: usize,
    pub mode: SessionMode,
    pub repeated_call_policy: RepeatedCallPolicy,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            retrieval: RetrievalConfig::default(),
            max_iterations: 10,
            max_calls_per_round: 5,
            mode: SessionMode::Agentic,
            repeated_call_policy: RepeatedCallPolicy::Cached,
        }
    }
}

impl SessionConfig {
    pub fn with_mode(mut self, mode: SessionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_iterations == 0 {
            return Err(ConfigError::Invalid("max_iterations must be at least 1".into()));
        }
        if self.max_calls_per_round == 0 {
            return Err(ConfigError::Invalid("max_calls_per_round must be at least 1".into()));
        }
        self.retrieval
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("invalid session config: {0}")]
    Invalid(String),
    #[error("no stored context `{0}`")]
    MissingContext(String),
    #[error("agentic mode needs a non-empty registry")]
    EmptyRegistry,
}

/// Frozen contexts keyed by id, stored as a JSON object.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContextStore {
    contexts: BTreeMap<String, String>,
}

impl ContextStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, text: impl Into<String>) {
        self.contexts.insert(id.into(), text.into());
    }

    pub fn get(&self, id: &str) -> Option<&str> {
        self.contexts.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self).expect("contexts serialize"))
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{error}")]
    Adapter {
        error: AdapterError,
        /// Steps recorded before the failure.
        trace: Box<AgentTrace>,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// Everything a session reads but does not own.
pub struct SessionDeps<'a> {
    pub registry: &'a Registry,
    pub retriever: &'a Retriever,
    pub adapter: &'a dyn LlmAdapter,
    pub executor: &'a dyn ToolExecutor,
    pub clock: &'a dyn Clock,
    pub contexts: Option<&'a ContextStore>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutcome {
    pub trace: AgentTrace,
    /// Final answer, or the forced answer after budget exhaustion.
    pub answer: Option<String>,
}

impl SessionOutcome {
    pub fn budget_exhausted(&self) -> bool {
        matches!(self.trace.termination(), Some(Termination::BudgetExhausted { .. }))
    }
}

/// Per-session memory of successful calls, keyed by fingerprint.
#[derive(Debug, Default)]
pub struct SessionState {
    succeeded: HashMap<String, String>,
    executed: usize,
}

impl SessionState {
    /// Calls that reached the executor.
    pub fn executed(&self) -> usize {
        self.executed
    }
}

pub fn session_id(question_id: &str, mode: &SessionMode) -> String {
    format!("{question_id}:{}", mode.label())
}

struct Recorder<'a> {
    trace: AgentTrace,
    clock: &'a dyn Clock,
}

impl Recorder<'_> {
    fn push(&mut self, step: TraceStep) {
        let now = self.clock.now_millis();
        self.trace.push(now, step);
    }

    fn complete(
        &mut self,
        adapter: &dyn LlmAdapter,
        request: &crate::llm::CompletionRequest,
    ) -> Result<String, SessionError> {
        adapter.complete(request).map_err(|error| SessionError::Adapter {
            error,
            trace: Box::new(self.trace.clone()),
        })
    }
}

/// Runs one question to termination.
pub fn run_session(
    question_id: &str,
    question: &str,
    options: Option<&[String]>,
    deps: &SessionDeps<'_>,
    config: &SessionConfig,
) -> Result<SessionOutcome, SessionError> {
    config.validate()?;
    let mut rec = Recorder {
        trace: AgentTrace::new(session_id(question_id, &config.mode), question_id),
        clock: deps.clock,
    };
    match &config.mode {
        SessionMode::Agentic => {
            if deps.registry.is_empty() {
                return Err(ConfigError::EmptyRegistry.into());
            }
            run_agentic(question, options, deps, config, rec)
        }
        SessionMode::FixedRetrieval { context_id } => {
            let context = deps
                .contexts
                .and_then(|c| c.get(context_id))
                .ok_or_else(|| ConfigError::MissingContext(context_id.clone()))?;
            rec.push(TraceStep::Context {
                context_id: context_id.clone(),
                text: context.to_string(),
            });
            single_completion(build_tq_prompt(context, question, options)?, deps, rec)
        }
        SessionMode::NoRetrieval => single_completion(build_tq_prompt("", question, options)?, deps, rec),
    }
}

fn single_completion(
    request: crate::llm::CompletionRequest,
    deps: &SessionDeps<'_>,
    mut rec: Recorder<'_>,
) -> Result<SessionOutcome, SessionError> {
    let raw = rec.complete(deps.adapter, &request)?;
    let answer = match parse_turn(&raw, ParseMode::Agent) {
        Ok(turn) => match turn.kind {
            TurnKind::Final(a) => a,
            _ => raw.trim().to_string(),
        },
        Err(_) => raw.trim().to_string(),
    };
    rec.push(TraceStep::Termination(Termination::Final { answer: answer.clone() }));
    Ok(SessionOutcome {
        trace: rec.trace,
        answer: Some(answer),
    })
}

fn retrieval_query(rewrite: &str, trace: &AgentTrace) -> String {
    match trace.feedback().last() {
        Some(fb) => format!("{rewrite}\n{fb}"),
        None => rewrite.to_string(),
    }
}

fn run_agentic(
    question: &str,
    options: Option<&[String]>,
    deps: &SessionDeps<'_>,
    config: &SessionConfig,
    mut rec: Recorder<'_>,
) -> Result<SessionOutcome, SessionError> {
    let rewrite = rec.complete(deps.adapter, &build_rewrite_prompt(question)?)?;
    let rewrite = match rewrite.trim() {
        "" => question.trim().to_string(),
        r => r.to_string(),
    };
    rec.push(TraceStep::Rewrite { text: rewrite.clone() });

    let mut state = SessionState::default();
    let mut candidates = RankedTools::default();
    for _ in 0..config.max_iterations {
        let query = retrieval_query(&rewrite, &rec.trace);
        candidates = deps.retriever.retrieve_top_k(&query, config.retrieval.k)?;
        rec.push(TraceStep::Retrieval(candidates.clone()));

        let prompt = build_agent_prompt(question, options, &rec.trace, &candidates, deps.registry)?;
        let raw = rec.complete(deps.adapter, &prompt)?;
        match parse_turn(&raw, ParseMode::Agent) {
            Ok(turn) => match turn.kind {
                TurnKind::Final(answer) => {
                    rec.push(TraceStep::Termination(Termination::Final { answer: answer.clone() }));
                    return Ok(SessionOutcome {
                        trace: rec.trace,
                        answer: Some(answer),
                    });
                }
                TurnKind::Calls(calls) if calls.is_empty() => {
                    rec.push(TraceStep::Feedback {
                        text: parse_feedback("the call list is empty"),
                    });
                }
                TurnKind::Calls(calls) => {
                    let (records, feedback) =
                        handle_call_round(&calls, deps.registry, deps.executor, &mut state, config);
                    if !records.is_empty() {
                        rec.push(TraceStep::CallRound { calls: records });
                    }
                    rec.push(TraceStep::Feedback { text: feedback });
                }
                TurnKind::Rewrite(_) | TurnKind::Choice(_) => {
                    rec.push(TraceStep::Feedback {
                        text: parse_feedback("no function calls found"),
                    });
                }
            },
            Err(failure) => rec.push(TraceStep::Feedback {
                text: parse_feedback(&failure.to_string()),
            }),
        }
    }

    let forced = build_forced_final_prompt(question, options, &rec.trace, &candidates, deps.registry)?;
    let forced_answer = deps.adapter.complete(&forced).ok().and_then(|raw| {
        match parse_turn(&raw, ParseMode::Agent).map(|t| t.kind) {
            Ok(TurnKind::Final(a)) => Some(a),
            Ok(TurnKind::Calls(_)) => None,
            _ => Some(raw.trim().to_string()).filter(|s| !s.is_empty()),
        }
    });
    rec.push(TraceStep::Termination(Termination::BudgetExhausted {
        forced_answer: forced_answer.clone(),
    }));
    Ok(SessionOutcome {
        trace: rec.trace,
        answer: forced_answer,
    })
}

fn parse_feedback(reason: &str) -> String {
    format!(
        "[turn] could not use the reply: {reason}. Reply with a JSON array of calls \
         or a line starting with \"{FINAL_SENTINEL}\"."
    )
}

/// Validates and executes `calls` in order. Failures become outcomes; the
/// feedback text names every outcome by index and fingerprint.
pub fn handle_call_round(
    calls: &[FunctionCall],
    registry: &Registry,
    executor: &dyn ToolExecutor,
    state: &mut SessionState,
    config: &SessionConfig,
) -> (Vec<CallRecord>, String) {
    let mut records = Vec::new();
    let mut feedback = String::new();
    if calls.is_empty() {
        return (records, parse_feedback("the call list is empty"));
    }
    for (i, call) in calls.iter().enumerate() {
        let n = i + 1;
        let args = serde_json::Value::Object(call.arguments.clone());
        if i >= config.max_calls_per_round {
            let _ = writeln!(
                feedback,
                "[call {n}] {} {args}: skipped, at most {} calls per round\n",
                call.name, config.max_calls_per_round
            );
            continue;
        }
        let outcome = match registry.validate_call(call) {
            Err(err) => ToolOutcome::new(
                OutcomeStatus::ValidationError { detail: err.to_string() },
                0,
                call.fingerprint(),
            ),
            Ok(valid) => {
                let fp = valid.as_call().fingerprint();
                match (state.succeeded.get(&fp), config.repeated_call_policy) {
                    (Some(payload), RepeatedCallPolicy::Cached) => {
                        ToolOutcome::new(OutcomeStatus::Cached { payload: payload.clone() }, 0, fp)
                    }
                    (Some(_), RepeatedCallPolicy::Reject) => ToolOutcome::new(
                        OutcomeStatus::ValidationError {
                            detail: format!(
                                "repeated call: `{}` with these arguments already succeeded; use the earlier result",
                                call.name
                            ),
                        },
                        0,
                        fp,
                    ),
                    _ => {
                        let spec = registry.get(&valid.tool).expect("validated tool exists");
                        let outcome = executor.execute(spec, &valid);
                        state.executed += 1;
                        if let OutcomeStatus::Ok { payload } = &outcome.status {
                            state.succeeded.insert(fp, payload.clone());
                        }
                        outcome
                    }
                }
            }
        };
        let _ = write!(
            feedback,
            "[call {n}] {} {args} (fingerprint {}): {}\n{}\n\n",
            call.name,
            outcome.fingerprint,
            outcome.status.label(),
            outcome.status.text().trim_end()
        );
        records.push(CallRecord {
            call: call.clone(),
            outcome,
        });
    }
    (records, feedback.trim_end().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use crate::llm::ScriptedAdapter;
    use crate::registry::{Binding, ParamKind, ParamSpec, ToolSpec, ValidatedCall};
    use serde_json::json;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Echo(AtomicUsize);
    impl ToolExecutor for Echo {
        fn execute(&self, _spec: &ToolSpec, call: &ValidatedCall) -> ToolOutcome {
            self.0.fetch_add(1, Ordering::SeqCst);
            ToolOutcome::new(
                OutcomeStatus::Ok { payload: format!("label for {}", call.arg_text("drug_name").unwrap()) },
                1,
                call.as_call().fingerprint(),
            )
        }
    }

    fn registry() -> Registry {
        Registry::from_specs([ToolSpec {
            name: "get_warnings".into(),
            description: "Returns label warnings for a drug.".into(),
            params: vec![ParamSpec::new("drug_name", ParamKind::String, true)],
            binding: Binding::Fixture { file: "x".into() },
        }])
        .unwrap()
    }

    fn run(script: &[&str], config: &SessionConfig) -> (SessionOutcome, usize) {
        let reg = registry();
        let retriever = Retriever::bm25(&reg, &config.retrieval).unwrap();
        let adapter = ScriptedAdapter::new(script.iter().copied());
        let exec = Echo(AtomicUsize::new(0));
        let clock = ManualClock::new(0, 1);
        let deps = SessionDeps {
            registry: &reg,
            retriever: &retriever,
            adapter: &adapter,
            executor: &exec,
            clock: &clock,
            contexts: None,
        };
        let out = run_session("q1", "Warfarin warnings?", None, &deps, config).unwrap();
        (out, exec.0.load(Ordering::SeqCst))
    }

    const CALL: &str = r#"[{"name": "get_warnings", "arguments": {"drug_name": "warfarin"}}]"#;

    #[test]
    fn immediate_final() {
        let (out, n) = run(&["warfarin warnings", "FINAL ANSWER: bleeding"], &SessionConfig::default());
        assert_eq!(out.trace.kinds(), ["rewrite", "retrieval", "termination"]);
        assert_eq!(out.answer.as_deref(), Some("bleeding"));
        assert_eq!(n, 0);
    }

    #[test]
    fn one_call_then_final() {
        let (out, _) = run(&["r", CALL, "FINAL ANSWER: x"], &SessionConfig::default());
        assert_eq!(
            out.trace.kinds(),
            ["rewrite", "retrieval", "call_round", "feedback", "retrieval", "termination"]
        );
        let second = out.trace.retrievals().nth(1).unwrap();
        assert!(second.query.contains("label for warfarin"));
    }

    #[test]
    fn repeated_call_policies() {
        let script = ["r", CALL, CALL, "FINAL ANSWER: x"];
        let (out, n) = run(&script, &SessionConfig::default());
        assert_eq!(n, 1);
        let statuses: Vec<_> = out.trace.call_records().map(|r| r.outcome.status.label()).collect();
        assert_eq!(statuses, ["ok", "cached"]);

        let allow = SessionConfig {
            repeated_call_policy: RepeatedCallPolicy::Allow,
            ..Default::default()
        };
        assert_eq!(run(&script, &allow).1, 2);

        let reject = SessionConfig {
            repeated_call_policy: RepeatedCallPolicy::Reject,
            ..Default::default()
        };
        let (out, n) = run(&script, &reject);
        assert_eq!(n, 1);
        assert_eq!(out.trace.call_records().nth(1).unwrap().outcome.status.label(), "validation_error");
    }

    #[test]
    fn budget_exhaustion_with_forced_answer() {
        let config = SessionConfig {
            max_iterations: 3,
            repeated_call_policy: RepeatedCallPolicy::Allow,
            ..Default::default()
        };
        let (out, n) = run(&["r", CALL, CALL, CALL, "FINAL ANSWER: best guess"], &config);
        assert_eq!(out.trace.kinds().iter().filter(|k| **k == "call_round").count(), 3);
        assert_eq!(n, 3);
        assert_eq!(
            out.trace.termination(),
            Some(&Termination::BudgetExhausted { forced_answer: Some("best guess".into()) })
        );
        // no script left for the forced answer
        let (out, _) = run(&["r", CALL, CALL, CALL], &config);
        assert_eq!(out.answer, None);
        assert!(out.budget_exhausted());
    }

    #[test]
    fn parse_failure_and_empty_round_become_feedback() {
        let (out, n) = run(&["r", "[]", "I think so", "FINAL ANSWER: x"], &SessionConfig::default());
        assert_eq!(n, 0);
        let fb: Vec<_> = out.trace.feedback().collect();
        assert_eq!(fb.len(), 2);
        assert!(fb[0].contains("empty"));
        assert!(!out.trace.kinds().contains(&"call_round"));
    }

    #[test]
    fn too_many_calls_are_skipped() {
        let calls: Vec<_> = (0..7)
            .map(|i| json!({"name": "get_warnings", "arguments": {"drug_name": format!("d{i}")}}))
            .collect();
        let script = ["r".to_string(), json!(calls).to_string(), "FINAL ANSWER: x".into()];
        let script: Vec<&str> = script.iter().map(String::as_str).collect();
        let (out, n) = run(&script, &SessionConfig::default());
        assert_eq!(n, 5);
        assert_eq!(out.trace.call_records().count(), 5);
        assert!(out.trace.feedback().next().unwrap().contains("skipped"));
    }

    #[test]
    fn adapter_error_keeps_partial_trace() {
        let reg = registry();
        let retriever = Retriever::bm25(&reg, &RetrievalConfig::default()).unwrap();
        let adapter = ScriptedAdapter::new(["r"]);
        let exec = Echo(AtomicUsize::new(0));
        let clock = ManualClock::new(0, 1);
        let deps = SessionDeps {
            registry: &reg,
            retriever: &retriever,
            adapter: &adapter,
            executor: &exec,
            clock: &clock,
            contexts: None,
        };
        match run_session("q", "x?", None, &deps, &SessionConfig::default()) {
            Err(SessionError::Adapter { trace, .. }) => assert_eq!(trace.kinds(), ["rewrite", "retrieval"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fixed_and_no_retrieval_modes() {
        let reg = registry();
        let retriever = Retriever::None;
        let mut contexts = ContextStore::new();
        contexts.insert("c1", "[get_warnings]\nbleeding");
        let exec = Echo(AtomicUsize::new(0));
        let clock = ManualClock::new(0, 1);
        let adapter = ScriptedAdapter::new(["ANSWER: B", "ANSWER: C"]);
        let deps = SessionDeps {
            registry: &reg,
            retriever: &retriever,
            adapter: &adapter,
            executor: &exec,
            clock: &clock,
            contexts: Some(&contexts),
        };
        let fixed = SessionConfig::default().with_mode(SessionMode::FixedRetrieval { context_id: "c1".into() });
        let out = run_session("q", "x?", None, &deps, &fixed).unwrap();
        assert_eq!(out.trace.kinds(), ["context", "termination"]);
        assert_eq!(freeze_context(&out.trace), "[get_warnings]\nbleeding");
        let none = SessionConfig::default().with_mode(SessionMode::NoRetrieval);
        let out = run_session("q", "x?", None, &deps, &none).unwrap();
        assert_eq!(out.trace.kinds(), ["termination"]);
        assert_eq!(out.answer.as_deref(), Some("ANSWER: C"));

        let missing = SessionConfig::default().with_mode(SessionMode::FixedRetrieval { context_id: "zz".into() });
        assert!(matches!(
            run_session("q", "x?", None, &deps, &missing),
            Err(SessionError::Config(ConfigError::MissingContext(_)))
        ));
        let zero = SessionConfig {
            max_iterations: 0,
            ..Default::default()
        };
        assert!(run_session("q", "x?", None, &deps, &zero).is_err());
    }
}
