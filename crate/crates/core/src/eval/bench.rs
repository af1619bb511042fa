//! Benchmark sweeps over settings (retrieval mode × option order) and the
//! retriever comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{
    permute_options, score, synthetic::AnnotatedCorpus, EvalError, EvalReport, PermutationSpec, Prediction, Question,
    ReportRow, RetrieverRow, Style,
};
use crate::agent::{
    freeze_context, run_session, ContextStore, SessionConfig, SessionDeps, SessionError, SessionMode, Termination,
};
use crate::clock::{Clock, ManualClock, SystemClock};
use crate::executor::ToolExecutor;
use crate::llm::{build_tq_prompt, extract_choice, LlmAdapter, ScriptBook};
use crate::registry::Registry;
use crate::retrieval::{Backend, RankedTools, RetrievalConfig, Retriever};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Agentic,
    Fixed,
    None,
}

impl ModeKind {
    pub fn label(self) -> &'static str {
        match self {
            ModeKind::Agentic => "agentic",
            ModeKind::Fixed => "fixed",
            ModeKind::None => "none",
        }
    }
}

impl fmt::Display for ModeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "agentic" => Ok(ModeKind::Agentic),
            "fixed" | "fixed_retrieval" | "fixed-retrieval" => Ok(ModeKind::Fixed),
            "none" | "no_retrieval" | "no-retrieval" => Ok(ModeKind::None),
            other => Err(format!("unknown mode `{other}` (expected agentic, fixed or none)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Setting {
    pub mode: ModeKind,
    pub permuted: bool,
}

impl Setting {
    pub fn label(&self) -> String {
        if self.permuted {
            format!("{}-permuted", self.mode)
        } else {
            self.mode.to_string()
        }
    }

    /// Script-book key for one question under this setting.
    pub fn session_key(&self, question_id: &str) -> String {
        format!("{}:{question_id}", self.label())
    }
}

/// Every mode crossed with every ordering, in the order given.
pub fn settings_matrix(modes: &[ModeKind], orderings: &[bool]) -> Vec<Setting> {
    modes
        .iter()
        .flat_map(|&mode| orderings.iter().map(move |&permuted| Setting { mode, permuted }))
        .collect()
}

/// Hands out one adapter per session.
pub trait AdapterSource: Send + Sync {
    fn model_id(&self) -> String;
    fn session(&self, keys: &[String]) -> Arc<dyn LlmAdapter>;
}

impl AdapterSource for ScriptBook {
    fn model_id(&self) -> String {
        "scripted".to_string()
    }

    fn session(&self, keys: &[String]) -> Arc<dyn LlmAdapter> {
        Arc::new(ScriptBook::session(self, keys))
    }
}

/// One stateless adapter shared by every session.
pub struct SharedAdapter(pub Arc<dyn LlmAdapter>);

impl AdapterSource for SharedAdapter {
    fn model_id(&self) -> String {
        self.0.model_id()
    }

    fn session(&self, _keys: &[String]) -> Arc<dyn LlmAdapter> {
        self.0.clone()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub settings: Vec<Setting>,
    pub session: SessionConfig,
    pub permutation: PermutationSpec,
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Per-session manual clocks, for byte-reproducible traces.
    pub fixed_clock: bool,
}

impl BenchConfig {
    pub fn new(settings: Vec<Setting>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            settings,
            session: SessionConfig::default(),
            permutation: PermutationSpec::default(),
            workers: 1,
            out_dir: out_dir.into(),
            fixed_clock: true,
        }
    }
}

pub struct BenchDeps<'a> {
    pub registry: &'a Registry,
    pub retriever: &'a Retriever,
    pub executor: &'a dyn ToolExecutor,
    pub adapters: &'a dyn AdapterSource,
    /// Frozen contexts by question id for fixed-retrieval settings. When
    /// absent they are frozen from the agentic setting of the same run.
    pub contexts: Option<&'a ContextStore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub id: String,
    pub style: Style,
    pub setting: String,
    pub prediction: Prediction,
    pub answer: Option<String>,
    /// How the session ended: `final`, `budget_exhausted` or `error`.
    pub termination: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Context frozen from an agentic session.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_path: Option<String>,
}

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub report: EvalReport,
    pub results: BTreeMap<String, Vec<QuestionResult>>,
    /// Questions actually run, excluding those served from the result cache.
    pub executed: usize,
}

fn file_safe(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn relative(path: &Path, base: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).display().to_string()
}

struct Job<'a> {
    setting: Setting,
    question: &'a Question,
    context: Option<String>,
}

fn choice(raw: &str, options: &[String]) -> Prediction {
    extract_choice(raw, options).map_or(Prediction::Unparseable, Prediction::Choice)
}

fn run_question(job: &Job<'_>, deps: &BenchDeps<'_>, config: &BenchConfig) -> QuestionResult {
    let q = job.question;
    let label = job.setting.label();
    let adapter = deps.adapters.session(&[job.setting.session_key(&q.id), q.id.clone()]);
    let clock: Box<dyn Clock> = if config.fixed_clock {
        Box::new(ManualClock::new(0, 1))
    } else {
        Box::new(SystemClock)
    };
    let mut contexts = ContextStore::new();
    let mode = match job.setting.mode {
        ModeKind::Agentic => SessionMode::Agentic,
        ModeKind::None => SessionMode::NoRetrieval,
        ModeKind::Fixed => {
            contexts.insert(q.id.clone(), job.context.clone().unwrap_or_default());
            SessionMode::FixedRetrieval { context_id: q.id.clone() }
        }
    };
    let session_config = SessionConfig {
        mode,
        ..config.session.clone()
    };
    let session_deps = SessionDeps {
        registry: deps.registry,
        retriever: deps.retriever,
        adapter: adapter.as_ref(),
        executor: deps.executor,
        clock: clock.as_ref(),
        contexts: Some(&contexts),
    };
    let options = q.options.as_deref();
    let session_options = if q.style == Style::Mc { options } else { None };
    let mut result = QuestionResult {
        id: q.id.clone(),
        style: q.style,
        setting: label.clone(),
        prediction: Prediction::Unparseable,
        answer: None,
        termination: "error".into(),
        error: None,
        context: None,
        trace_path: None,
    };
    if job.setting.mode == ModeKind::Fixed && job.context.is_none() {
        result.error = Some("no frozen context for this question".into());
        return result;
    }
    let outcome = match run_session(&q.id, &q.question, session_options, &session_deps, &session_config) {
        Ok(o) => o,
        Err(e) => {
            if let SessionError::Adapter { trace, .. } = &e {
                result.trace_path = write_trace(config, &label, &q.id, trace);
            }
            result.error = Some(e.to_string());
            return result;
        }
    };
    result.trace_path = write_trace(config, &label, &q.id, &outcome.trace);
    result.termination = match outcome.trace.termination() {
        Some(Termination::Final { .. }) => "final",
        _ => "budget_exhausted",
    }
    .into();
    if job.setting.mode == ModeKind::Agentic {
        result.context = Some(freeze_context(&outcome.trace));
    }
    result.answer = outcome.answer.clone();
    let answer = outcome.answer.unwrap_or_default();
    result.prediction = match (q.style, options) {
        (Style::Oe, _) => {
            if answer.trim().is_empty() {
                Prediction::Unparseable
            } else {
                Prediction::Text(answer.trim().to_string())
            }
        }
        (Style::Mc, Some(opts)) => choice(&answer, opts),
        (Style::Oemc, Some(opts)) => {
            // second step: the open-ended answer becomes the context for choosing
            match build_tq_prompt(&answer, &q.question, Some(opts)) {
                Ok(prompt) => match adapter.complete(&prompt) {
                    Ok(raw) => choice(&raw, opts),
                    Err(e) => {
                        result.error = Some(e.to_string());
                        Prediction::Unparseable
                    }
                },
                Err(e) => {
                    result.error = Some(e.to_string());
                    Prediction::Unparseable
                }
            }
        }
        _ => Prediction::Unparseable,
    };
    result
}

fn write_trace(config: &BenchConfig, label: &str, qid: &str, trace: &crate::agent::AgentTrace) -> Option<String> {
    let dir = config.out_dir.join("traces").join(label);
    std::fs::create_dir_all(&dir).ok()?;
    let path = dir.join(format!("{}.jsonl", file_safe(qid)));
    std::fs::write(&path, trace.to_jsonl()).ok()?;
    Some(relative(&path, &config.out_dir))
}

fn cache_path(config: &BenchConfig, setting: &Setting, qid: &str) -> PathBuf {
    config
        .out_dir
        .join("cache")
        .join(setting.label())
        .join(format!("{}.json", file_safe(qid)))
}

fn load_cached(path: &Path) -> Option<QuestionResult> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

fn store_cached(path: &Path, result: &QuestionResult) -> Result<(), EvalError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_string_pretty(result).expect("result serializes"))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs `jobs` on a bounded pool; results come back in job order.
fn run_jobs(jobs: &[Job<'_>], deps: &BenchDeps<'_>, config: &BenchConfig) -> Result<(Vec<QuestionResult>, usize), EvalError> {
    let next = AtomicUsize::new(0);
    let executed = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<QuestionResult, EvalError>>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    let workers = config.workers.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let path = cache_path(config, &job.setting, &job.question.id);
                let result = match load_cached(&path) {
                    Some(r) => Ok(r),
                    None => {
                        executed.fetch_add(1, Ordering::SeqCst);
                        let r = run_question(job, deps, config);
                        store_cached(&path, &r).map(|_| r)
                    }
                };
                slots.lock().expect("result lock")[i] = Some(result);
            });
        }
    });
    let results = slots
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((results, executed.into_inner()))
}

fn setting_questions(questions: &[Question], setting: &Setting, spec: &PermutationSpec) -> Result<Vec<Question>, EvalError> {
    questions
        .iter()
        .map(|q| {
            if setting.permuted && q.style.has_options() {
                permute_options(q, spec)
            } else {
                Ok(q.clone())
            }
        })
        .collect()
}

fn rows_for(
    model: &str,
    setting: &Setting,
    questions: &[Question],
    results: &[QuestionResult],
) -> Result<Vec<ReportRow>, EvalError> {
    let mut rows = Vec::new();
    for style in Style::ALL {
        let labeled: Vec<Question> = questions
            .iter()
            .filter(|q| q.style == style && q.gold.is_some())
            .cloned()
            .collect();
        if labeled.is_empty() {
            continue;
        }
        let preds: Vec<(String, Prediction)> = results
            .iter()
            .filter(|r| labeled.iter().any(|q| q.id == r.id))
            .map(|r| (r.id.clone(), r.prediction.clone()))
            .collect();
        let table = score(&preds, &labeled)?;
        rows.push(ReportRow {
            model: model.to_string(),
            setting: setting.mode.to_string(),
            style,
            permuted: setting.permuted,
            n: table.n,
            accuracy: table.accuracy,
            rel_delta: 0.0,
            unparseable: table.unparseable,
        });
    }
    Ok(rows)
}

/// Runs every setting over `questions`, writing per-question results,
/// traces and prediction files under the output directory.
pub fn run_bench(questions: &[Question], deps: &BenchDeps<'_>, config: &BenchConfig) -> Result<BenchRun, EvalError> {
    if config.settings.is_empty() {
        return Err(EvalError::EmptySettings);
    }
    if questions.is_empty() {
        return Err(EvalError::Config("dataset has no questions".into()));
    }
    let has_fixed = config.settings.iter().any(|s| s.mode == ModeKind::Fixed);
    let has_agentic = config.settings.iter().any(|s| s.mode == ModeKind::Agentic);
    if has_fixed && deps.contexts.is_none() && !has_agentic {
        return Err(EvalError::Config(
            "fixed-retrieval settings need stored contexts or an agentic setting to freeze them from".into(),
        ));
    }
    config
        .session
        .validate()
        .map_err(|e| EvalError::Config(e.to_string()))?;

    // agentic settings first, so fixed settings can reuse their contexts
    let mut order: Vec<usize> = (0..config.settings.len()).collect();
    order.sort_by_key(|&i| (config.settings[i].mode != ModeKind::Agentic, i));

    let model = deps.adapters.model_id();
    let mut results: BTreeMap<String, Vec<QuestionResult>> = BTreeMap::new();
    let mut per_setting_rows: Vec<Vec<ReportRow>> = vec![Vec::new(); config.settings.len()];
    let mut frozen: Option<BTreeMap<String, String>> = None;
    let mut executed = 0;

    for i in order {
        let setting = config.settings[i];
        let qs = setting_questions(questions, &setting, &config.permutation)?;
        let jobs: Vec<Job<'_>> = qs
            .iter()
            .map(|q| Job {
                setting,
                question: q,
                context: match setting.mode {
                    ModeKind::Fixed => deps
                        .contexts
                        .and_then(|c| c.get(&q.id).map(str::to_string))
                        .or_else(|| frozen.as_ref().and_then(|f| f.get(&q.id).cloned())),
                    _ => None,
                },
            })
            .collect();
        let (setting_results, ran) = run_jobs(&jobs, deps, config)?;
        executed += ran;
        if setting.mode == ModeKind::Agentic && (frozen.is_none() || !setting.permuted) {
            frozen = Some(
                setting_results
                    .iter()
                    .filter_map(|r| r.context.clone().map(|c| (r.id.clone(), c)))
                    .collect(),
            );
        }
        per_setting_rows[i] = rows_for(&model, &setting, &qs, &setting_results)?;
        write_predictions(config, &setting, &setting_results)?;
        results.insert(setting.label(), setting_results);
    }

    let mut rows: Vec<ReportRow> = per_setting_rows.into_iter().flatten().collect();
    super::compute_deltas(&mut rows);
    let report = EvalReport {
        config: serde_json::json!({
            "model": model,
            "questions": questions.len(),
            "settings": config.settings.iter().map(Setting::label).collect::<Vec<_>>(),
            "permutation": config.permutation.to_string(),
            "workers": config.workers,
            "session": config.session,
        }),
        rows,
        retrievers: Vec::new(),
    };
    // unlabeled datasets produce predictions only
    if !report.rows.is_empty() {
        super::emit_report(&report, &config.out_dir, super::ReportFormat::Both)?;
    }
    Ok(BenchRun {
        report,
        results,
        executed,
    })
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: &'a str,
    answer: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace_path: Option<&'a str>,
}

fn write_predictions(config: &BenchConfig, setting: &Setting, results: &[QuestionResult]) -> Result<(), EvalError> {
    let dir = config.out_dir.join("predictions");
    std::fs::create_dir_all(&dir)?;
    let mut text = String::new();
    for r in results {
        let line = PredictionLine {
            id: &r.id,
            answer: r.prediction.text(),
            trace_path: r.trace_path.as_deref(),
        };
        text.push_str(&serde_json::to_string(&line).expect("prediction serializes"));
        text.push('\n');
    }
    std::fs::write(dir.join(format!("{}.jsonl", setting.label())), text)?;
    Ok(())
}

/// Rankings and metrics for each backend over the same query set.
pub struct RetrieverComparison {
    pub rows: Vec<RetrieverRow>,
    pub rankings: BTreeMap<String, Vec<RankedTools>>,
}

pub fn compare_retrievers(corpus: &AnnotatedCorpus, backends: &[Backend], k: usize) -> Result<RetrieverComparison, EvalError> {
    let registry = corpus.registry().map_err(|e| EvalError::Config(e.to_string()))?;
    let mut rows = Vec::new();
    let mut rankings = BTreeMap::new();
    for backend in backends {
        let config = RetrievalConfig {
            backend: backend.clone(),
            k,
            ..Default::default()
        };
        let retriever = Retriever::build(&registry, &config, None)?;
        let ranked: Vec<RankedTools> = corpus
            .queries
            .iter()
            .map(|q| retriever.retrieve_top_k(&q.query, k))
            .collect::<Result<_, _>>()?;
        let metrics = super::ranking_metrics(
            ranked.iter().zip(&corpus.queries).map(|(r, q)| (r, q.gold.as_slice())),
            k,
        );
        rows.push(RetrieverRow {
            backend: backend.to_string(),
            k,
            n: metrics.n,
            recall: metrics.recall,
            mrr: metrics.mrr,
            rel_delta: 0.0,
        });
        rankings.insert(backend.to_string(), ranked);
    }
    super::compute_retriever_deltas(&mut rows);
    Ok(RetrieverComparison { rows, rankings })
}
