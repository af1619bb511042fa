//! Tool execution: builtin handlers, fixture-backed tools, and HTTP tools
//! with caching, retries, and offline fixture replay.

pub mod dailymed;
pub mod openfda;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, LazyLock, Mutex};
use std::time::Duration;

use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::agent::{CallRecord, OutcomeStatus, ToolOutcome};
use crate::clock::{Clock, SystemClock};
use crate::http::{FixtureStore, HttpRequest, HttpResponse, Transport, TransportError};
use crate::llm::FunctionCall;
use crate::registry::{Binding, Registry, ToolSpec, ValidatedCall};

pub use dailymed::{dailymed_lookup, SplDocument, SplLookup, SplSection};
pub use openfda::{openfda_label_field, LabelQuery, LabelSearchField, LABEL_FIELDS};

pub const OPENFDA_KEY_VAR: &str = "OPENFDA_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    Live,
    FixturesOnly,
    Record,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpSettings {
    pub timeout_ms: u64,
    /// Total attempts, including the first.
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl Default for HttpSettings {
    fn default() -> Self {
        Self {
            timeout_ms: 30_000,
            attempts: 3,
            backoff_ms: 250,
        }
    }
}

impl HttpSettings {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecutionEnv {
    pub http: HttpSettings,
    pub mode: ExecMode,
    /// Recorded HTTP responses, keyed by request fingerprint.
    pub cache_dir: Option<PathBuf>,
    /// Base directory for fixture-bound tools.
    pub fixture_root: PathBuf,
    /// Cache lifetime; `None` never expires.
    pub ttl_ms: Option<u64>,
    /// Which API-key variables are set. Values are never stored.
    pub api_keys: BTreeMap<String, bool>,
    pub dailymed_base: String,
    pub openfda_base: String,
}

impl Default for ExecutionEnv {
    fn default() -> Self {
        Self {
            http: HttpSettings::default(),
            mode: ExecMode::Live,
            cache_dir: None,
            fixture_root: PathBuf::from("."),
            ttl_ms: None,
            api_keys: BTreeMap::new(),
            dailymed_base: dailymed::DAILYMED_BASE.to_string(),
            openfda_base: openfda::OPENFDA_LABEL_URL.to_string(),
        }
    }
}

impl ExecutionEnv {
    pub fn fixtures_only(cache_dir: impl Into<PathBuf>, fixture_root: impl Into<PathBuf>) -> Self {
        Self {
            mode: ExecMode::FixturesOnly,
            cache_dir: Some(cache_dir.into()),
            fixture_root: fixture_root.into(),
            ..Self::default()
        }
    }

    pub fn detect_api_keys(mut self) -> Self {
        self.api_keys
            .insert(OPENFDA_KEY_VAR.to_string(), std::env::var_os(OPENFDA_KEY_VAR).is_some());
        self
    }

    fn api_key(&self, var: &str) -> Option<String> {
        if self.api_keys.get(var).copied().unwrap_or(false) {
            std::env::var(var).ok()
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("network: {0}")]
    Network(String),
    #[error("fixture missing for request {0}")]
    FixtureMissing(String),
    #[error("cache io: {0}")]
    CacheIo(String),
    #[error("upstream returned status {0}")]
    Status(u16),
}

impl From<TransportError> for ExecError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::FixtureMissing(fp) => ExecError::FixtureMissing(fp),
            TransportError::Store(m) => ExecError::CacheIo(m),
            other => ExecError::Network(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheEntry {
    pub fingerprint: String,
    pub response: HttpResponse,
    pub fetched_at: u64,
    pub ttl_ms: Option<u64>,
}

impl CacheEntry {
    fn fresh(&self, now: u64) -> bool {
        self.ttl_ms
            .is_none_or(|ttl| now.saturating_sub(self.fetched_at) < ttl)
    }
}

/// A response served by [`Executor::cache_roundtrip`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fetched {
    pub response: HttpResponse,
    /// Served from an expired fixture in fixtures-only mode.
    pub stale: bool,
}

/// Executes validated calls. The agent loop only depends on this trait.
pub trait ToolExecutor: Send + Sync {
    fn execute(&self, spec: &ToolSpec, call: &ValidatedCall) -> ToolOutcome;
}

type BuiltinFn = dyn Fn(&ValidatedCall) -> Result<String, String> + Send + Sync;

pub struct Executor {
    env: ExecutionEnv,
    transport: Arc<dyn Transport>,
    store: Option<FixtureStore>,
    clock: Arc<dyn Clock>,
    memory: Mutex<HashMap<String, CacheEntry>>,
    custom: BTreeMap<String, Box<BuiltinFn>>,
    upstream_calls: AtomicUsize,
}

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([A-Za-z0-9_]+)\}").unwrap());

const COMPONENT: &AsciiSet = &NON_ALPHANUMERIC
    .remove(b'-')
    .remove(b'_')
    .remove(b'.')
    .remove(b'~');

impl Executor {
    pub fn new(env: ExecutionEnv, transport: Arc<dyn Transport>) -> Self {
        let store = env.cache_dir.clone().map(FixtureStore::new);
        Self {
            env,
            transport,
            store,
            clock: Arc::new(SystemClock),
            memory: Mutex::new(HashMap::new()),
            custom: BTreeMap::new(),
            upstream_calls: AtomicUsize::new(0),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Registers an in-process handler under `id`, for `builtin` bindings.
    pub fn with_builtin<F>(mut self, id: impl Into<String>, handler: F) -> Self
    where
        F: Fn(&ValidatedCall) -> Result<String, String> + Send + Sync + 'static,
    {
        self.custom.insert(id.into(), Box::new(handler));
        self
    }

    pub fn env(&self) -> &ExecutionEnv {
        &self.env
    }

    /// Requests that reached the transport (each retry counts).
    pub fn upstream_calls(&self) -> usize {
        self.upstream_calls.load(Ordering::SeqCst)
    }

    fn send_with_retries(&self, request: &HttpRequest) -> Result<HttpResponse, ExecError> {
        let attempts = self.env.http.attempts.max(1);
        let mut last = ExecError::Network("no attempt made".into());
        for attempt in 0..attempts {
            if attempt > 0 && self.env.http.backoff_ms > 0 {
                let wait = self.env.http.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(wait));
            }
            self.upstream_calls.fetch_add(1, Ordering::SeqCst);
            match self.transport.send(request) {
                Ok(resp) if resp.status >= 500 => last = ExecError::Status(resp.status),
                Ok(resp) => return Ok(resp),
                Err(e) => last = e.into(),
            }
        }
        Err(last)
    }

    fn store(&self) -> Result<&FixtureStore, ExecError> {
        self.store
            .as_ref()
            .ok_or_else(|| ExecError::CacheIo("no cache directory configured".into()))
    }

    /// Fetches `request` according to the execution mode.
    ///
    /// * live: in-memory cache within ttl, otherwise upstream;
    /// * record: always upstream, and the response is written to the store;
    /// * fixtures-only: the store only, never the transport.
    pub fn cache_roundtrip(&self, request: &HttpRequest) -> Result<Fetched, ExecError> {
        let fingerprint = request.fingerprint();
        let now = self.clock.now_millis();
        match self.env.mode {
            ExecMode::FixturesOnly => {
                let record = self
                    .store()?
                    .load(request)?
                    .ok_or(ExecError::FixtureMissing(fingerprint))?;
                let stale = self
                    .env
                    .ttl_ms
                    .is_some_and(|ttl| now.saturating_sub(record.fetched_at) >= ttl);
                Ok(Fetched {
                    response: HttpResponse {
                        status: record.status,
                        body: record.body,
                    },
                    stale,
                })
            }
            ExecMode::Live => {
                if let Some(entry) = self.memory.lock().expect("cache lock").get(&fingerprint) {
                    if entry.fresh(now) {
                        return Ok(Fetched {
                            response: entry.response.clone(),
                            stale: false,
                        });
                    }
                }
                let response = self.send_with_retries(request)?;
                self.memory.lock().expect("cache lock").insert(
                    fingerprint.clone(),
                    CacheEntry {
                        fingerprint,
                        response: response.clone(),
                        fetched_at: now,
                        ttl_ms: self.env.ttl_ms,
                    },
                );
                Ok(Fetched {
                    response,
                    stale: false,
                })
            }
            ExecMode::Record => {
                let response = self.send_with_retries(request)?;
                self.store()?.save(request, &response, now)?;
                Ok(Fetched {
                    response,
                    stale: false,
                })
            }
        }
    }

    /// Successful response body, or an error naming the status.
    pub(crate) fn fetch_ok(&self, request: &HttpRequest) -> Result<String, ExecError> {
        let fetched = self.cache_roundtrip(request)?;
        if fetched.response.is_success() {
            Ok(fetched.response.body)
        } else {
            Err(ExecError::Status(fetched.response.status))
        }
    }

    fn run_builtin(&self, handler: &str, call: &ValidatedCall) -> Result<String, String> {
        if let Some(f) = self.custom.get(handler) {
            return f(call);
        }
        let required = |name: &str| {
            call.arg_text(name)
                .ok_or_else(|| format!("handler `{handler}` needs argument `{name}`"))
        };
        match handler {
            "dailymed.spl" => {
                let lookup = dailymed_lookup(self, &required("drug_name")?).map_err(|e| e.to_string())?;
                Ok(lookup.render())
            }
            "openfda.label" => {
                let query = LabelQuery::from_call(call)?;
                openfda_label_field(self, &query, &required("field")?).map_err(|e| e.to_string())
            }
            other => match other.strip_prefix("openfda.label:") {
                Some(field) => {
                    let query = LabelQuery::from_call(call)?;
                    openfda_label_field(self, &query, field).map_err(|e| e.to_string())
                }
                None => Err(format!("no builtin handler `{other}`")),
            },
        }
    }

    fn run_http(&self, url_template: &str, method: &str, extract: &str, call: &ValidatedCall) -> Result<String, String> {
        let url = PLACEHOLDER
            .replace_all(url_template, |caps: &regex::Captures| {
                let value = call.arg_text(&caps[1]).unwrap_or_default();
                utf8_percent_encode(&value, COMPONENT).to_string()
            })
            .into_owned();
        let mut request = if method.eq_ignore_ascii_case("GET") {
            HttpRequest::get(url)
        } else {
            let mut r = HttpRequest::post_json(url, &Value::Object(call.arguments.clone()));
            r.method = method.to_ascii_uppercase();
            r
        };
        if let Some(key) = self.env.api_key(OPENFDA_KEY_VAR) {
            if request.url.contains("api.fda.gov") {
                request.url = append_query(&request.url, "api_key", &key);
            }
        }
        let fetched = self.cache_roundtrip(&request).map_err(|e| e.to_string())?;
        if !fetched.response.is_success() {
            return Err(ExecError::Status(fetched.response.status).to_string());
        }
        let doc: Value = serde_json::from_str(&fetched.response.body)
            .map_err(|e| format!("response is not JSON: {e}"))?;
        let selected = doc
            .pointer(extract)
            .ok_or_else(|| format!("extraction `{extract}` matched nothing"))?;
        value_text(selected).ok_or_else(|| format!("extraction `{extract}` selected null"))
    }

    fn run_fixture(&self, file: &str, call: &ValidatedCall) -> Result<String, String> {
        let path = self.env.fixture_root.join(file);
        let bytes = std::fs::read(&path).map_err(|e| format!("fixture `{file}` unavailable: {e}"))?;
        let text = String::from_utf8(bytes).map_err(|_| format!("fixture `{file}` is not UTF-8"))?;
        Ok(PLACEHOLDER
            .replace_all(&text, |caps: &regex::Captures| {
                call.arg_text(&caps[1]).unwrap_or_else(|| caps[0].to_string())
            })
            .into_owned())
    }
}

pub(crate) fn append_query(url: &str, key: &str, value: &str) -> String {
    match url::Url::parse(url) {
        Ok(mut u) => {
            u.query_pairs_mut().append_pair(key, value);
            u.to_string()
        }
        Err(_) => url.to_string(),
    }
}

/// Text form of an extracted JSON value.
fn value_text(value: &Value) -> Option<String> {
    match value {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Array(items) if items.iter().all(Value::is_string) => Some(
            items
                .iter()
                .filter_map(Value::as_str)
                .collect::<Vec<_>>()
                .join("\n\n"),
        ),
        Value::Bool(_) | Value::Number(_) => Some(value.to_string()),
        other => Some(serde_json::to_string_pretty(other).expect("value serializes")),
    }
}

impl ToolExecutor for Executor {
    fn execute(&self, spec: &ToolSpec, call: &ValidatedCall) -> ToolOutcome {
        let started = self.clock.now_millis();
        let result = match &spec.binding {
            Binding::Builtin { handler } => self.run_builtin(handler, call),
            Binding::Http {
                url_template,
                method,
                extract,
            } => self.run_http(url_template, method, extract, call),
            Binding::Fixture { file } => self.run_fixture(file, call),
        };
        let latency = self.clock.now_millis().saturating_sub(started);
        let status = match result {
            Ok(payload) => OutcomeStatus::Ok { payload },
            Err(detail) => OutcomeStatus::ExecutionError { detail },
        };
        ToolOutcome::new(status, latency, call.as_call().fingerprint())
    }
}

/// Validates and executes each call in order, with no repeat handling. This
/// is how a fixture store gets populated from a list of calls.
pub fn execute_calls(registry: &Registry, executor: &dyn ToolExecutor, calls: &[FunctionCall]) -> Vec<CallRecord> {
    calls
        .iter()
        .map(|call| {
            let outcome = match registry.validate_call(call) {
                Ok(valid) => {
                    let spec = registry.get(&valid.tool).expect("validated tool exists");
                    executor.execute(spec, &valid)
                }
                Err(err) => ToolOutcome::new(
                    OutcomeStatus::ValidationError { detail: err.to_string() },
                    0,
                    call.fingerprint(),
                ),
            };
            CallRecord {
                call: call.clone(),
                outcome,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use crate::http::OfflineTransport;
    use crate::registry::{ParamKind, ParamSpec};
    use serde_json::json;

    /// Serves canned responses in order and counts requests.
    pub(crate) struct Scripted {
        pub responses: Mutex<Vec<Result<HttpResponse, TransportError>>>,
        pub seen: Mutex<Vec<HttpRequest>>,
    }

    impl Scripted {
        pub fn new(responses: Vec<Result<HttpResponse, TransportError>>) -> Self {
            Self {
                responses: Mutex::new(responses.into_iter().rev().collect()),
                seen: Mutex::new(Vec::new()),
            }
        }
        pub fn count(&self) -> usize {
            self.seen.lock().unwrap().len()
        }
    }

    impl Transport for Scripted {
        fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
            self.seen.lock().unwrap().push(request.clone());
            self.responses
                .lock()
                .unwrap()
                .pop()
                .unwrap_or(Ok(HttpResponse { status: 200, body: "{}".into() }))
        }
    }

    fn ok(body: &str) -> Result<HttpResponse, TransportError> {
        Ok(HttpResponse { status: 200, body: body.into() })
    }

    fn env(mode: ExecMode, dir: Option<PathBuf>) -> ExecutionEnv {
        ExecutionEnv {
            mode,
            cache_dir: dir,
            http: HttpSettings { backoff_ms: 0, ..Default::default() },
            ..Default::default()
        }
    }

    fn http_tool(extract: &str) -> ToolSpec {
        ToolSpec {
            name: "lookup".into(),
            description: "Looks something up.".into(),
            params: vec![ParamSpec::new("q", ParamKind::String, true)],
            binding: Binding::Http {
                url_template: "https://api.example.test/search?q={q}".into(),
                method: "GET".into(),
                extract: extract.into(),
            },
        }
    }

    fn vcall(q: &str) -> ValidatedCall {
        ValidatedCall {
            tool: "lookup".into(),
            arguments: json!({"q": q}).as_object().cloned().unwrap(),
        }
    }

    #[test]
    fn live_cache_hit_and_ttl_zero() {
        let t = Arc::new(Scripted::new(vec![]));
        let ex = Executor::new(env(ExecMode::Live, None), t.clone());
        let req = HttpRequest::get("https://api.example.test/a");
        ex.cache_roundtrip(&req).unwrap();
        ex.cache_roundtrip(&req).unwrap();
        assert_eq!(t.count(), 1);

        let t0 = Arc::new(Scripted::new(vec![]));
        let mut e0 = env(ExecMode::Live, None);
        e0.ttl_ms = Some(0);
        let ex0 = Executor::new(e0, t0.clone());
        ex0.cache_roundtrip(&req).unwrap();
        ex0.cache_roundtrip(&req).unwrap();
        assert_eq!(t0.count(), 2);
    }

    #[test]
    fn ttl_expiry_refetches_in_live_mode() {
        let t = Arc::new(Scripted::new(vec![]));
        let clock = Arc::new(ManualClock::new(0, 0));
        let mut e = env(ExecMode::Live, None);
        e.ttl_ms = Some(100);
        let ex = Executor::new(e, t.clone()).with_clock(clock.clone());
        let req = HttpRequest::get("https://api.example.test/a");
        ex.cache_roundtrip(&req).unwrap();
        clock.advance(99);
        ex.cache_roundtrip(&req).unwrap();
        assert_eq!(t.count(), 1);
        clock.advance(1);
        ex.cache_roundtrip(&req).unwrap();
        assert_eq!(t.count(), 2);
    }

    #[test]
    fn record_then_replay_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let body = r#"{"results": [{"warnings": ["Bleeding risk."]}]}"#;
        let rec = Executor::new(
            env(ExecMode::Record, Some(dir.path().into())),
            Arc::new(Scripted::new(vec![ok(body)])),
        );
        let req = HttpRequest::get("https://api.example.test/b?x=1");
        let live = rec.cache_roundtrip(&req).unwrap();
        let offline = Arc::new(OfflineTransport::new());
        let replay = Executor::new(env(ExecMode::FixturesOnly, Some(dir.path().into())), offline.clone());
        let back = replay.cache_roundtrip(&req).unwrap();
        assert_eq!(live.response.body.as_bytes(), back.response.body.as_bytes());
        assert_eq!(offline.attempts(), 0);
    }

    #[test]
    fn stale_fixture_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let store = FixtureStore::new(dir.path());
        let req = HttpRequest::get("https://api.example.test/c");
        store.save(&req, &HttpResponse { status: 200, body: "x".into() }, 0).unwrap();
        let mut e = env(ExecMode::FixturesOnly, Some(dir.path().into()));
        e.ttl_ms = Some(10);
        let ex = Executor::new(e, Arc::new(OfflineTransport::new()))
            .with_clock(Arc::new(ManualClock::new(50, 0)));
        assert!(ex.cache_roundtrip(&req).unwrap().stale);
    }

    #[test]
    fn retries_on_5xx_and_transport_errors_only() {
        let t = Arc::new(Scripted::new(vec![
            Ok(HttpResponse { status: 503, body: String::new() }),
            Err(TransportError::Timeout),
            ok("{}"),
        ]));
        let ex = Executor::new(env(ExecMode::Live, None), t.clone());
        assert!(ex.cache_roundtrip(&HttpRequest::get("https://a.test/")).is_ok());
        assert_eq!(t.count(), 3);

        let t4 = Arc::new(Scripted::new(vec![Ok(HttpResponse { status: 404, body: String::new() })]));
        let ex4 = Executor::new(env(ExecMode::Live, None), t4.clone());
        assert_eq!(
            ex4.fetch_ok(&HttpRequest::get("https://a.test/")),
            Err(ExecError::Status(404))
        );
        assert_eq!(t4.count(), 1);
    }

    #[test]
    fn unreachable_host_is_execution_error_after_retries() {
        let offline = Arc::new(OfflineTransport::new());
        let ex = Executor::new(env(ExecMode::Live, None), offline.clone());
        let out = ex.execute(&http_tool("/x"), &vcall("warfarin"));
        assert!(matches!(out.status, OutcomeStatus::ExecutionError { ref detail } if detail.contains("network")));
        assert_eq!(offline.attempts(), 3);
    }

    #[test]
    fn fixtures_only_never_touches_transport() {
        let dir = tempfile::tempdir().unwrap();
        let offline = Arc::new(OfflineTransport::new());
        let ex = Executor::new(env(ExecMode::FixturesOnly, Some(dir.path().into())), offline.clone());
        let out = ex.execute(&http_tool("/x"), &vcall("warfarin"));
        assert!(matches!(out.status, OutcomeStatus::ExecutionError { ref detail } if detail.contains("fixture missing")));
        assert_eq!(offline.attempts(), 0);
    }

    #[test]
    fn http_binding_extracts_and_encodes() {
        let t = Arc::new(Scripted::new(vec![ok(r#"{"items": [{"label": "x"}], "total": 1}"#)]));
        let ex = Executor::new(env(ExecMode::Live, None), t.clone());
        let out = ex.execute(&http_tool("/total"), &vcall("heart failure"));
        assert_eq!(out.status, OutcomeStatus::Ok { payload: "1".into() });
        assert_eq!(t.seen.lock().unwrap()[0].url, "https://api.example.test/search?q=heart%20failure");
        assert_eq!(out.fingerprint, vcall("heart failure").as_call().fingerprint());

        let miss = Executor::new(env(ExecMode::Live, None), Arc::new(Scripted::new(vec![ok("{}")])));
        let out = miss.execute(&http_tool("/nothing"), &vcall("x"));
        assert!(matches!(out.status, OutcomeStatus::ExecutionError { .. }));
    }

    #[test]
    fn fixture_binding_fills_placeholders() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("echo.txt"), "echo: {q} {missing}").unwrap();
        let mut e = env(ExecMode::FixturesOnly, None);
        e.fixture_root = dir.path().into();
        let ex = Executor::new(e, Arc::new(OfflineTransport::new()));
        let spec = ToolSpec {
            binding: Binding::Fixture { file: "echo.txt".into() },
            ..http_tool("")
        };
        let out = ex.execute(&spec, &vcall("hi"));
        assert_eq!(out.status, OutcomeStatus::Ok { payload: "echo: hi {missing}".into() });
        let absent = ToolSpec {
            binding: Binding::Fixture { file: "nope.txt".into() },
            ..http_tool("")
        };
        assert!(matches!(ex.execute(&absent, &vcall("hi")).status, OutcomeStatus::ExecutionError { .. }));
    }

    #[test]
    fn latency_from_clock() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("echo.txt"), "x").unwrap();
        let mut e = env(ExecMode::FixturesOnly, None);
        e.fixture_root = dir.path().into();
        let ex = Executor::new(e, Arc::new(OfflineTransport::new()))
            .with_clock(Arc::new(ManualClock::new(0, 7)));
        let spec = ToolSpec {
            binding: Binding::Fixture { file: "echo.txt".into() },
            ..http_tool("")
        };
        assert_eq!(ex.execute(&spec, &vcall("a")).latency_ms, 7);
    }

    #[test]
    fn custom_builtin() {
        let ex = Executor::new(env(ExecMode::Live, None), Arc::new(OfflineTransport::new()))
            .with_builtin("echo", |c| Ok(format!("got {}", c.arg_text("q").unwrap())));
        let spec = ToolSpec {
            binding: Binding::Builtin { handler: "echo".into() },
            ..http_tool("")
        };
        assert_eq!(ex.execute(&spec, &vcall("z")).status, OutcomeStatus::Ok { payload: "got z".into() });
        let unknown = ToolSpec {
            binding: Binding::Builtin { handler: "nope".into() },
            ..http_tool("")
        };
        assert!(matches!(ex.execute(&unknown, &vcall("z")).status, OutcomeStatus::ExecutionError { .. }));
    }
}
