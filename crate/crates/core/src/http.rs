//! Minimal HTTP transport abstraction plus a fingerprint-keyed fixture store.
//!
//! Everything that talks to the network goes through [`Transport`], which
//! lets tests inject counting or failing transports and lets offline runs
//! replay recorded responses.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::clock::Clock;
use crate::fingerprint::sha256_hex;

const CREDENTIAL_PARAMS: [&str; 2] = ["api_key", "apikey"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpRequest {
    pub method: String,
    pub url: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub headers: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

impl HttpRequest {
    pub fn get(url: impl Into<String>) -> Self {
        Self {
            method: "GET".into(),
            url: url.into(),
            headers: BTreeMap::new(),
            body: None,
        }
    }

    pub fn post_json(url: impl Into<String>, body: &serde_json::Value) -> Self {
        let mut headers = BTreeMap::new();
        headers.insert("content-type".into(), "application/json".into());
        Self {
            method: "POST".into(),
            url: url.into(),
            headers,
            body: Some(body.to_string()),
        }
    }

    pub fn header(mut self, name: &str, value: impl Into<String>) -> Self {
        self.headers.insert(name.to_ascii_lowercase(), value.into());
        self
    }

    /// URL with query parameters sorted by key, then value. Credential
    /// parameters are dropped.
    pub fn canonical_url(&self) -> String {
        match Url::parse(&self.url) {
            Ok(mut url) => {
                let mut pairs: Vec<(String, String)> = url
                    .query_pairs()
                    .filter(|(k, _)| !CREDENTIAL_PARAMS.contains(&k.as_ref()))
                    .map(|(k, v)| (k.into_owned(), v.into_owned()))
                    .collect();
                if pairs.is_empty() {
                    url.set_query(None);
                    return url.to_string();
                }
                pairs.sort();
                url.query_pairs_mut().clear().extend_pairs(pairs);
                url.to_string()
            }
            Err(_) => self.url.clone(),
        }
    }

    /// Stable identity of the request. Headers are excluded so API keys never
    /// influence fixture names.
    pub fn fingerprint(&self) -> String {
        let canonical = format!(
            "{}\n{}\n{}",
            self.method.to_ascii_uppercase(),
            self.canonical_url(),
            self.body.as_deref().unwrap_or("")
        );
        sha256_hex(canonical.as_bytes())[..32].to_string()
    }

    pub fn summary(&self) -> RequestSummary {
        RequestSummary {
            method: self.method.to_ascii_uppercase(),
            url: self.canonical_url(),
            body: self.body.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

impl HttpResponse {
    pub fn is_success(&self) -> bool {
        (200..300).contains(&self.status)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("network error: {0}")]
    Network(String),
    #[error("request timed out")]
    Timeout,
    #[error("no recorded fixture for request {0}")]
    FixtureMissing(String),
    #[error("fixture store error: {0}")]
    Store(String),
}

pub trait Transport: Send + Sync {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

/// Blocking transport backed by `reqwest`.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new(timeout: Duration) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .user_agent(concat!("toolrag/", env!("CARGO_PKG_VERSION")))
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(Self { client })
    }
}

impl Transport for ReqwestTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let method = reqwest::Method::from_bytes(request.method.to_ascii_uppercase().as_bytes())
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let mut builder = self.client.request(method, &request.url);
        for (k, v) in &request.headers {
            builder = builder.header(k, v);
        }
        if let Some(body) = &request.body {
            builder = builder.body(body.clone());
        }
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                TransportError::Timeout
            } else {
                TransportError::Network(e.to_string())
            }
        })?;
        let status = response.status().as_u16();
        let body = response
            .text()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

/// Transport that refuses every request and counts the attempts.
#[derive(Debug, Default)]
pub struct OfflineTransport {
    attempts: AtomicUsize,
}

impl OfflineTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn attempts(&self) -> usize {
        self.attempts.load(Ordering::SeqCst)
    }
}

impl Transport for OfflineTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        self.attempts.fetch_add(1, Ordering::SeqCst);
        Err(TransportError::Network(format!(
            "offline: refused {} {}",
            request.method, request.url
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestSummary {
    pub method: String,
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<String>,
}

/// One recorded response, stored as `<fingerprint>.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub request: RequestSummary,
    pub status: u16,
    pub body: String,
    pub fetched_at: u64,
}

/// Directory of recorded responses keyed by request fingerprint.
#[derive(Debug, Clone)]
pub struct FixtureStore {
    dir: PathBuf,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, fingerprint: &str) -> PathBuf {
        self.dir.join(format!("{fingerprint}.json"))
    }

    pub fn load(&self, request: &HttpRequest) -> Result<Option<FixtureRecord>, TransportError> {
        let path = self.path_for(&request.fingerprint());
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| TransportError::Store(e.to_string()))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| TransportError::Store(format!("{}: {e}", path.display())))
    }

    pub fn save(
        &self,
        request: &HttpRequest,
        response: &HttpResponse,
        fetched_at: u64,
    ) -> Result<PathBuf, TransportError> {
        fs::create_dir_all(&self.dir).map_err(|e| TransportError::Store(e.to_string()))?;
        let record = FixtureRecord {
            request: request.summary(),
            status: response.status,
            body: response.body.clone(),
            fetched_at,
        };
        let path = self.path_for(&request.fingerprint());
        let text = serde_json::to_string_pretty(&record).expect("fixture serializes");
        // write-then-rename keeps concurrent readers from seeing partial files
        let tmp = path.with_extension(format!("json.tmp{}", std::process::id()));
        fs::write(&tmp, text).map_err(|e| TransportError::Store(e.to_string()))?;
        fs::rename(&tmp, &path).map_err(|e| TransportError::Store(e.to_string()))?;
        Ok(path)
    }
}

/// Passes requests through to `inner` and records every response.
pub struct RecordingTransport {
    inner: Arc<dyn Transport>,
    store: FixtureStore,
    clock: Arc<dyn Clock>,
}

impl RecordingTransport {
    pub fn new(inner: Arc<dyn Transport>, store: FixtureStore, clock: Arc<dyn Clock>) -> Self {
        Self { inner, store, clock }
    }
}

impl Transport for RecordingTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let response = self.inner.send(request)?;
        self.store.save(request, &response, self.clock.now_millis())?;
        Ok(response)
    }
}

/// Serves recorded responses only; never touches the network.
pub struct ReplayTransport {
    store: FixtureStore,
}

impl ReplayTransport {
    pub fn new(store: FixtureStore) -> Self {
        Self { store }
    }
}

impl Transport for ReplayTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        match self.store.load(request)? {
            Some(record) => Ok(HttpResponse {
                status: record.status,
                body: record.body,
            }),
            None => Err(TransportError::FixtureMissing(request.fingerprint())),
        }
    }
}

/// One raw upstream body served by [`StaticTransport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StaticEntry {
    #[serde(default = "default_method")]
    pub method: String,
    pub url: String,
    #[serde(default = "default_status")]
    pub status: u16,
    /// Path of the body file, relative to the index.
    pub file: String,
}

fn default_method() -> String {
    "GET".into()
}

fn default_status() -> u16 {
    200
}

/// Serves bodies from a directory of files listed in `index.json`, matched
/// by method and canonical URL. Used to feed the recorder without a network.
pub struct StaticTransport {
    routes: BTreeMap<(String, String), (u16, PathBuf)>,
}

impl StaticTransport {
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, TransportError> {
        let dir = dir.as_ref();
        let index = dir.join("index.json");
        let text = fs::read_to_string(&index).map_err(|e| TransportError::Store(format!("{}: {e}", index.display())))?;
        let entries: Vec<StaticEntry> =
            serde_json::from_str(&text).map_err(|e| TransportError::Store(format!("{}: {e}", index.display())))?;
        let routes = entries
            .into_iter()
            .map(|e| {
                let key = HttpRequest {
                    method: e.method.to_ascii_uppercase(),
                    ..HttpRequest::get(e.url)
                };
                ((key.method.clone(), key.canonical_url()), (e.status, dir.join(e.file)))
            })
            .collect();
        Ok(Self { routes })
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }
}

impl Transport for StaticTransport {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let key = (request.method.to_ascii_uppercase(), request.canonical_url());
        let (status, path) = self
            .routes
            .get(&key)
            .ok_or_else(|| TransportError::Network(format!("no static route for {} {}", key.0, key.1)))?;
        let body = fs::read_to_string(path).map_err(|e| TransportError::Store(format!("{}: {e}", path.display())))?;
        Ok(HttpResponse { status: *status, body })
    }
}
