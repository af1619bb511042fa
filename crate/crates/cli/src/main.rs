//! `toolrag` command-line front end.

mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{AdapterSpec, Effective, FileConfig};
use toolrag::agent::{
    run_session, AgentTrace, ContextStore, OutcomeStatus, SessionConfig, SessionDeps, SessionMode, Termination,
    TraceStep,
};
use toolrag::clock::{Clock, ManualClock, SystemClock};
use toolrag::eval::synthetic::{
    generate_corpus, generate_dataset, oracle_script_book, shape_by_name, AnnotatedCorpus, CorpusKind, DatasetShape,
};
use toolrag::eval::{
    compare_retrievers, emit_report, load_dataset, run_bench, settings_matrix, AdapterSource, BenchConfig, BenchDeps,
    DatasetManifest, EvalReport, ModeKind, PermutationSpec, ReportFormat, SharedAdapter,
};
use toolrag::executor::{execute_calls, ExecMode, ExecutionEnv, Executor};
use toolrag::http::{ReplayTransport, FixtureStore, ReqwestTransport, StaticTransport, Transport};
use toolrag::llm::{FunctionCall, HttpAdapter, LlmAdapter, ScriptBook};
use toolrag::registry::Registry;
use toolrag::retrieval::{Backend, Retriever};

/// Start of the fixed clock used with scripted adapters, so traces are
/// byte-reproducible.
const FIXED_CLOCK_START: u64 = 1_700_000_000_000;

#[derive(Parser, Debug)]
#[command(name = "toolrag", version, about = "Tool-retrieval agent engine and benchmark harness")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Flags override the config file,
/// which overrides the built-in defaults.
#[derive(Args, Debug, Default)]
pub struct GlobalArgs {
    /// TOML file with defaults for any of these options.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Tool registry JSON file.
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
    /// `scripted:<path>`, `http:<url>#<model>[#<api-key-env>]`, or `oracle` (bench only).
    #[arg(long, global = true)]
    pub adapter: Option<String>,
    /// Retrieval backend: bm25, dense-hash, dense-hash-token or none.
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// Tools retrieved per iteration.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Agent iteration budget.
    #[arg(long = "max-iters", global = true)]
    pub max_iters: Option<usize>,
    /// Repeated-call policy: cached, reject or allow.
    #[arg(long, global = true)]
    pub policy: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for synthetic generation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Bench worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Serve tool HTTP traffic from the fixture store only; never touch the network.
    #[arg(long = "fixtures-only", global = true)]
    pub fixtures_only: bool,
    /// Fixture store of recorded HTTP responses (default: `<fixture-root>/http`).
    #[arg(long = "cache-dir", global = true)]
    pub cache_dir: Option<PathBuf>,
    /// Base directory for fixture-bound tools (default: the registry's directory).
    #[arg(long = "fixture-root", global = true)]
    pub fixture_root: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Answer one question with an agentic session and write its trace.
    Ask(AskArgs),
    /// Run a benchmark sweep over a dataset and write report files.
    Bench(BenchArgs),
    /// Compare retrieval backends on an annotated corpus.
    Retrievers(RetrieverArgs),
    /// Load a registry and report errors and lint warnings.
    RegistryValidate {
        /// Registry file; defaults to --registry.
        path: Option<PathBuf>,
    },
    /// Execute a list of calls in record mode, filling the fixture store.
    RecordFixtures(RecordArgs),
    /// Summarize a trace JSONL file.
    TraceInspect {
        path: PathBuf,
        /// Print the full records as pretty JSON.
        #[arg(long)]
        json: bool,
    },
    /// Write a seeded synthetic question set.
    GenDataset(GenDatasetArgs),
    /// Write a seeded annotated retrieval corpus.
    GenCorpus(GenCorpusArgs),
}

#[derive(Args, Debug)]
struct AskArgs {
    question: String,
    /// Answer option; repeat four times for a multiple-choice question.
    #[arg(long = "option")]
    options: Vec<String>,
    /// Question id, used for the session id and script lookup.
    #[arg(long, default_value = "ask")]
    id: String,
    /// agentic, fixed or none.
    #[arg(long, default_value = "agentic")]
    mode: String,
    /// Frozen contexts (JSON object id -> text) for fixed mode.
    #[arg(long)]
    contexts: Option<PathBuf>,
    /// Trace output path (default: `<out>/traces/<id>.jsonl`).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Comma-separated modes: agentic, fixed, none.
    #[arg(long, value_delimiter = ',')]
    mode: Option<Vec<String>>,
    /// Also run permuted-option variants, with this bijection.
    #[arg(long, num_args = 0..=1, default_missing_value = "BDAC")]
    permute: Option<String>,
    /// Frozen contexts for fixed settings.
    #[arg(long)]
    contexts: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Lexical,
    Paraphrase,
}

impl From<KindArg> for CorpusKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Lexical => CorpusKind::Lexical,
            KindArg::Paraphrase => CorpusKind::Paraphrase,
        }
    }
}

#[derive(Args, Debug)]
struct RetrieverArgs {
    /// Annotated corpus JSON; generated from --kind, --tools and --seed when absent.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "paraphrase")]
    kind: KindArg,
    #[arg(long, default_value_t = 50)]
    tools: usize,
    #[arg(long, value_delimiter = ',', default_value = "bm25,dense-hash,none")]
    backends: Vec<String>,
}

#[derive(Args, Debug)]
struct RecordArgs {
    /// JSON list of `{name, arguments}` calls.
    #[arg(long)]
    plan: PathBuf,
    /// Serve upstream bodies from this directory (with `index.json`) instead of the network.
    #[arg(long)]
    upstream: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenDatasetArgs {
    output: PathBuf,
    /// validation, test1 or test2.
    #[arg(long, default_value = "validation")]
    shape: String,
    /// Custom per-style counts; all three replace the named shape.
    #[arg(long, requires_all = ["oemc", "oe"])]
    mc: Option<usize>,
    #[arg(long)]
    oemc: Option<usize>,
    #[arg(long)]
    oe: Option<usize>,
    /// Emit gold answers even for unlabeled shapes.
    #[arg(long)]
    labeled: bool,
}

#[derive(Args, Debug)]
struct GenCorpusArgs {
    output: PathBuf,
    #[arg(long, value_enum, default_value = "paraphrase")]
    kind: KindArg,
    #[arg(long, default_value_t = 50)]
    tools: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", render_chain(&e));
            ExitCode::from(1)
        }
    }
}

/// Joins the error chain, skipping causes the previous message already quotes.
fn render_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !prev.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
        prev = text;
    }
    out
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file = match &cli.global.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let eff = Effective::resolve(&cli.global, &file)?;
    match cli.command {
        Command::Ask(args) => cmd_ask(&eff, args),
        Command::Bench(args) => cmd_bench(&eff, &file, args),
        Command::Retrievers(args) => cmd_retrievers(&eff, args),
        Command::RegistryValidate { path } => cmd_registry_validate(&eff, path),
        Command::RecordFixtures(args) => cmd_record(&eff, args),
        Command::TraceInspect { path, json } => cmd_trace_inspect(&path, json),
        Command::GenDataset(args) => cmd_gen_dataset(&eff, args),
        Command::GenCorpus(args) => cmd_gen_corpus(&eff, args),
    }
}

fn load_registry(eff: &Effective) -> Result<Registry> {
    let path = eff.registry.as_ref().ok_or_else(|| anyhow!("no registry given (use --registry)"))?;
    Registry::load(path).with_context(|| format!("loading registry {}", path.display()))
}

fn build_retriever(eff: &Effective, registry: &Registry) -> Result<Retriever> {
    Retriever::build(registry, &eff.session_config()?.retrieval, None).context("building retriever")
}

fn http_timeout() -> Duration {
    toolrag::executor::HttpSettings::default().timeout()
}

fn build_executor(eff: &Effective, clock: Arc<dyn Clock>) -> Result<Executor> {
    let env = ExecutionEnv {
        mode: if eff.fixtures_only { ExecMode::FixturesOnly } else { ExecMode::Live },
        cache_dir: Some(eff.cache_dir.clone()),
        fixture_root: eff.fixture_root.clone(),
        ..ExecutionEnv::default()
    }
    .detect_api_keys();
    let transport: Arc<dyn Transport> = Arc::new(ReqwestTransport::new(http_timeout())?);
    Ok(Executor::new(env, transport).with_clock(clock))
}

fn model_transport(eff: &Effective) -> Result<Arc<dyn Transport>> {
    Ok(if eff.fixtures_only {
        Arc::new(ReplayTransport::new(FixtureStore::new(&eff.cache_dir)))
    } else {
        Arc::new(ReqwestTransport::new(http_timeout())?)
    })
}

fn clock_for(spec: &AdapterSpec) -> Arc<dyn Clock> {
    match spec {
        AdapterSpec::Http { .. } => Arc::new(SystemClock),
        _ => Arc::new(ManualClock::new(FIXED_CLOCK_START, 1)),
    }
}

/// The executor is shared by bench workers, so a ticking clock would make
/// recorded latencies depend on scheduling. Deterministic runs freeze it.
fn executor_clock(spec: &AdapterSpec) -> Arc<dyn Clock> {
    match spec {
        AdapterSpec::Http { .. } => Arc::new(SystemClock),
        _ => Arc::new(ManualClock::new(FIXED_CLOCK_START, 0)),
    }
}

fn parse_mode(mode: &str, id: &str) -> Result<SessionMode> {
    Ok(match mode.parse::<ModeKind>().map_err(|e| anyhow!(e))? {
        ModeKind::Agentic => SessionMode::Agentic,
        ModeKind::Fixed => SessionMode::FixedRetrieval { context_id: id.to_string() },
        ModeKind::None => SessionMode::NoRetrieval,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_ask(eff: &Effective, args: AskArgs) -> Result<ExitCode> {
    let registry = load_registry(eff)?;
    let retriever = build_retriever(eff, &registry)?;
    let spec = eff.adapter()?;
    let adapter: Arc<dyn LlmAdapter> = match &spec {
        AdapterSpec::Scripted(path) => {
            let book = ScriptBook::load(path).with_context(|| format!("loading script {}", path.display()))?;
            Arc::new(book.session(std::slice::from_ref(&args.id)))
        }
        AdapterSpec::Http { url, model, key_env } => {
            Arc::new(HttpAdapter::new(url, model, key_env.clone(), model_transport(eff)?))
        }
        AdapterSpec::Oracle => bail!("the oracle adapter needs a dataset; use it with bench"),
    };
    let clock = clock_for(&spec);
    let executor = build_executor(eff, executor_clock(&spec))?;
    let contexts = args
        .contexts
        .as_ref()
        .map(|p| ContextStore::load(p).with_context(|| format!("loading contexts {}", p.display())))
        .transpose()?;
    let config = SessionConfig {
        mode: parse_mode(&args.mode, &args.id)?,
        ..eff.session_config()?
    };
    if !args.options.is_empty() && args.options.len() != 4 {
        bail!("multiple-choice questions take exactly 4 --option values, got {}", args.options.len());
    }
    let options = (!args.options.is_empty()).then_some(args.options.as_slice());
    let deps = SessionDeps {
        registry: &registry,
        retriever: &retriever,
        adapter: adapter.as_ref(),
        executor: &executor,
        clock: clock.as_ref(),
        contexts: contexts.as_ref(),
    };
    let (trace, answer, code) = match run_session(&args.id, &args.question, options, &deps, &config) {
        Ok(outcome) => {
            let code = if outcome.budget_exhausted() { 2 } else { 0 };
            (outcome.trace, outcome.answer, code)
        }
        Err(toolrag::agent::SessionError::Adapter { error, trace }) => {
            eprintln!("error: {error}");
            (*trace, None, 1)
        }
        Err(e) => return Err(e.into()),
    };
    let trace_path = args
        .trace
        .unwrap_or_else(|| eff.out.join("traces").join(format!("{}.jsonl", args.id)));
    write_file(&trace_path, &trace.to_jsonl())?;
    eprintln!("trace: {}", trace_path.display());
    if code == 2 {
        eprintln!("iteration budget exhausted after {} iterations", config.max_iterations);
    }
    if let Some(a) = answer {
        println!("{a}");
    }
    Ok(ExitCode::from(code))
}

fn cmd_bench(eff: &Effective, file: &FileConfig, args: BenchArgs) -> Result<ExitCode> {
    let registry = load_registry(eff)?;
    let retriever = build_retriever(eff, &registry)?;
    let (manifest, questions) =
        load_dataset(&args.dataset).with_context(|| format!("loading dataset {}", args.dataset.display()))?;
    let modes: Vec<ModeKind> = args
        .mode
        .or_else(|| file.modes.clone())
        .unwrap_or_else(|| vec!["agentic".into()])
        .iter()
        .map(|m| m.trim())
        .filter(|m| !m.is_empty())
        .map(|m| m.parse::<ModeKind>().map_err(|e| anyhow!(e)))
        .collect::<Result<_>>()?;
    let permute = args.permute.or_else(|| file.permute.clone());
    let mut orderings = vec![false];
    if permute.is_some() {
        orderings.push(true);
    }
    let settings = settings_matrix(&modes, &orderings);
    if settings.is_empty() {
        bail!("the settings matrix is empty (no modes given)");
    }
    let spec = eff.adapter()?;
    let adapters: Box<dyn AdapterSource> = match &spec {
        AdapterSpec::Scripted(path) => {
            Box::new(ScriptBook::load(path).with_context(|| format!("loading script {}", path.display()))?)
        }
        AdapterSpec::Oracle => Box::new(oracle_script_book(
            &questions,
            &settings,
            &permute.as_deref().unwrap_or("BDAC").parse::<PermutationSpec>()?,
        )),
        AdapterSpec::Http { url, model, key_env } => Box::new(SharedAdapter(Arc::new(HttpAdapter::new(
            url,
            model,
            key_env.clone(),
            model_transport(eff)?,
        )))),
    };
    let executor = build_executor(eff, executor_clock(&spec))?;
    let contexts = args
        .contexts
        .as_ref()
        .map(|p| ContextStore::load(p).with_context(|| format!("loading contexts {}", p.display())))
        .transpose()?;
    let mut config = BenchConfig::new(settings, &eff.out);
    config.session = eff.session_config()?;
    config.workers = eff.workers;
    config.fixed_clock = !matches!(spec, AdapterSpec::Http { .. });
    if let Some(p) = &permute {
        config.permutation = p.parse()?;
    }
    let deps = BenchDeps {
        registry: &registry,
        retriever: &retriever,
        executor: &executor,
        adapters: adapters.as_ref(),
        contexts: contexts.as_ref(),
    };
    let mut run = run_bench(&questions, &deps, &config)?;
    eprintln!(
        "dataset {}: {} questions ({} MC, {} OEMC, {} OE); {} sessions run",
        manifest.name,
        manifest.total,
        manifest.count(toolrag::eval::Style::Mc),
        manifest.count(toolrag::eval::Style::Oemc),
        manifest.count(toolrag::eval::Style::Oe),
        run.executed
    );
    if run.report.rows.is_empty() {
        eprintln!("dataset is unlabeled; predictions written to {}", eff.out.join("predictions").display());
        return Ok(ExitCode::SUCCESS);
    }
    attach_effective(&mut run.report, eff);
    toolrag::eval::compute_deltas(&mut run.report.rows);
    emit_report(&run.report, &eff.out, ReportFormat::Both)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "setting\tpermuted\tstyle\tn\taccuracy\trel_delta")?;
    for r in &run.report.rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.4}\t{:+.4}",
            r.setting, r.permuted, r.style, r.n, r.accuracy, r.rel_delta
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn attach_effective(report: &mut EvalReport, eff: &Effective) {
    if let serde_json::Value::Object(map) = &mut report.config {
        map.insert("effective".into(), serde_json::to_value(eff).expect("config serializes"));
    } else {
        report.config = serde_json::json!({ "effective": eff });
    }
}

fn cmd_retrievers(eff: &Effective, args: RetrieverArgs) -> Result<ExitCode> {
    let corpus: AnnotatedCorpus = match &args.corpus {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing corpus {}", path.display()))?
        }
        None => generate_corpus(args.kind.into(), args.tools, eff.seed),
    };
    let backends: Vec<Backend> = args
        .backends
        .iter()
        .map(|b| b.parse::<Backend>().map_err(|e| anyhow!("{e}")))
        .collect::<Result<_>>()?;
    let cmp = compare_retrievers(&corpus, &backends, eff.k)?;
    let mut report = EvalReport {
        config: serde_json::json!({ "queries": corpus.queries.len(), "tools": corpus.tools.len() }),
        rows: Vec::new(),
        retrievers: cmp.rows,
    };
    attach_effective(&mut report, eff);
    toolrag::eval::compute_retriever_deltas(&mut report.retrievers);
    emit_report(&report, &eff.out, ReportFormat::Both)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "backend\tk\tn\trecall\tmrr\trel_delta")?;
    for r in &report.retrievers {
        writeln!(out, "{}\t{}\t{}\t{:.4}\t{:.4}\t{:+.4}", r.backend, r.k, r.n, r.recall, r.mrr, r.rel_delta)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_registry_validate(eff: &Effective, path: Option<PathBuf>) -> Result<ExitCode> {
    let path = path
        .or_else(|| eff.registry.clone())
        .ok_or_else(|| anyhow!("no registry given"))?;
    match Registry::load(&path) {
        Ok(registry) => {
            println!("{}: {} tools", path.display(), registry.len());
            for w in registry.lint() {
                println!("warning: {w}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            Ok(ExitCode::from(1))
        }
    }
}

fn cmd_record(eff: &Effective, args: RecordArgs) -> Result<ExitCode> {
    let registry = load_registry(eff)?;
    let text = std::fs::read_to_string(&args.plan).with_context(|| format!("reading {}", args.plan.display()))?;
    let calls: Vec<FunctionCall> = serde_json::from_str(&text).context("parsing call plan")?;
    let transport: Arc<dyn Transport> = match &args.upstream {
        Some(dir) => Arc::new(StaticTransport::from_dir(dir)?),
        None => Arc::new(ReqwestTransport::new(http_timeout())?),
    };
    let env = ExecutionEnv {
        mode: ExecMode::Record,
        cache_dir: Some(eff.cache_dir.clone()),
        fixture_root: eff.fixture_root.clone(),
        ..ExecutionEnv::default()
    }
    .detect_api_keys();
    let executor = Executor::new(env, transport);
    let records = execute_calls(&registry, &executor, &calls);
    for r in &records {
        let args = serde_json::Value::Object(r.call.arguments.clone());
        let note = match &r.outcome.status {
            OutcomeStatus::Ok { payload } => format!("{} bytes", payload.len()),
            other => other.text().lines().next().unwrap_or_default().to_string(),
        };
        println!("{} {args}: {} ({note})", r.call.name, r.outcome.status.label());
    }
    eprintln!("{} upstream requests recorded into {}", executor.upstream_calls(), eff.cache_dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_trace_inspect(path: &Path, json: bool) -> Result<ExitCode> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let trace = AgentTrace::parse_jsonl(&text).with_context(|| format!("parsing trace {}", path.display()))?;
    let mut out = std::io::stdout().lock();
    if json {
        for r in trace.records() {
            writeln!(out, "{}", serde_json::to_string_pretty(&r)?)?;
        }
        return Ok(ExitCode::SUCCESS);
    }
    writeln!(out, "session {} (question {})", trace.session_id, trace.question_id)?;
    for r in trace.records() {
        let summary = match &r.step {
            TraceStep::Rewrite { text } => one_line(text),
            TraceStep::Retrieval(ranked) => ranked.names().collect::<Vec<_>>().join(", "),
            TraceStep::CallRound { calls } => calls
                .iter()
                .map(|c| format!("{} -> {}", c.call.name, c.outcome.status.label()))
                .collect::<Vec<_>>()
                .join("; "),
            TraceStep::Feedback { text } => format!("{} bytes", text.len()),
            TraceStep::Context { context_id, text } => format!("{context_id} ({} bytes)", text.len()),
            TraceStep::Termination(Termination::Final { answer }) => format!("final: {}", one_line(answer)),
            TraceStep::Termination(Termination::BudgetExhausted { forced_answer }) => format!(
                "budget exhausted; forced answer: {}",
                forced_answer.as_deref().map(one_line).unwrap_or_else(|| "none".into())
            ),
        };
        writeln!(out, "{:>3} {:<12} {}", r.step_index, r.step.kind(), summary)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn one_line(text: &str) -> String {
    let flat = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() > 80 {
        format!("{}...", flat.chars().take(77).collect::<String>())
    } else {
        flat
    }
}

fn cmd_gen_dataset(eff: &Effective, args: GenDatasetArgs) -> Result<ExitCode> {
    let mut shape = shape_by_name(&args.shape).ok_or_else(|| anyhow!("unknown shape `{}`", args.shape))?;
    if let (Some(mc), Some(oemc), Some(oe)) = (args.mc, args.oemc, args.oe) {
        shape = DatasetShape {
            name: "custom",
            mc,
            oemc,
            oe,
            labeled: true,
        };
    }
    shape.labeled |= args.labeled;
    let questions = generate_dataset(&shape, eff.seed);
    toolrag::eval::write_dataset(&args.output, &questions)?;
    let name = args
        .output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    println!("{}", serde_json::to_string(&DatasetManifest::of(name, &questions))?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen_corpus(eff: &Effective, args: GenCorpusArgs) -> Result<ExitCode> {
    let corpus = generate_corpus(args.kind.into(), args.tools, eff.seed);
    write_file(&args.output, &(serde_json::to_string_pretty(&corpus)? + "\n"))?;
    println!("{} tools, {} queries", corpus.tools.len(), corpus.queries.len());
    Ok(ExitCode::SUCCESS)
}
