use std::collections::{BTreeMap, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CompletionRequest;
use crate::http::{HttpRequest, Transport, TransportError};

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
#[error("adapter error: {message}")]
pub struct AdapterError {
    pub message: String,
    pub retryable: bool,
}

impl AdapterError {
    pub fn new(message: impl Into<String>, retryable: bool) -> Self {
        Self {
            message: message.into(),
            retryable,
        }
    }
}

pub trait LlmAdapter: Send + Sync {
    /// Identifier used as the model column in reports.
    fn model_id(&self) -> String;

    fn complete(&self, request: &CompletionRequest) -> Result<String, AdapterError>;
}

/// Replays a fixed list of responses in order, one per completion.
#[derive(Debug)]
pub struct ScriptedAdapter {
    queue: Mutex<VecDeque<String>>,
    calls: AtomicUsize,
    shared_calls: Option<Arc<AtomicUsize>>,
}

impl ScriptedAdapter {
    pub fn new<I, S>(script: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            queue: Mutex::new(script.into_iter().map(Into::into).collect()),
            calls: AtomicUsize::new(0),
            shared_calls: None,
        }
    }

    fn with_counter(mut self, counter: Arc<AtomicUsize>) -> Self {
        self.shared_calls = Some(counter);
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn remaining(&self) -> usize {
        self.queue.lock().expect("script lock").len()
    }
}

impl LlmAdapter for ScriptedAdapter {
    fn model_id(&self) -> String {
        "scripted".to_string()
    }

    fn complete(&self, _request: &CompletionRequest) -> Result<String, AdapterError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        if let Some(c) = &self.shared_calls {
            c.fetch_add(1, Ordering::SeqCst);
        }
        self.queue
            .lock()
            .expect("script lock")
            .pop_front()
            .ok_or_else(|| AdapterError::new("script exhausted", false))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ScriptBookFile {
    #[serde(default)]
    sessions: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    default: Vec<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScriptDocument {
    Single(Vec<String>),
    Book(ScriptBookFile),
}

/// Per-session scripts. A session looks up the first key that exists among
/// the candidates it offers (most specific first), falling back to `default`.
///
/// Script files are either a plain JSON array (one script for every session)
/// or `{"sessions": {"<key>": [..]}, "default": [..]}`.
#[derive(Debug, Clone, Default)]
pub struct ScriptBook {
    file: ScriptBookFile,
    completions: Arc<AtomicUsize>,
}

impl ScriptBook {
    pub fn new(sessions: BTreeMap<String, Vec<String>>, default: Vec<String>) -> Self {
        Self {
            file: ScriptBookFile { sessions, default },
            completions: Arc::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        let file = match serde_json::from_str(text)? {
            ScriptDocument::Single(script) => ScriptBookFile {
                sessions: BTreeMap::new(),
                default: script,
            },
            ScriptDocument::Book(book) => book,
        };
        Ok(Self {
            file,
            completions: Arc::default(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.file).expect("script book serializes")
    }

    /// Fresh adapter for one session.
    pub fn session(&self, keys: &[String]) -> ScriptedAdapter {
        let script = keys
            .iter()
            .find_map(|k| self.file.sessions.get(k))
            .unwrap_or(&self.file.default)
            .clone();
        ScriptedAdapter::new(script).with_counter(self.completions.clone())
    }

    /// Completions served across every session created from this book.
    pub fn completions(&self) -> usize {
        self.completions.load(Ordering::SeqCst)
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [super::ChatMessage],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
}

/// Remote chat model: `POST base_url` with
/// `{model, messages: [{role, content}], temperature, max_tokens}` returning `{text}`.
pub struct HttpAdapter {
    base_url: String,
    model: String,
    api_key_env: Option<String>,
    transport: Arc<dyn Transport>,
}

impl HttpAdapter {
    pub fn new(
        base_url: impl Into<String>,
        model: impl Into<String>,
        api_key_env: Option<String>,
        transport: Arc<dyn Transport>,
    ) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env,
            transport,
        }
    }

    pub fn wire_request(&self, request: &CompletionRequest) -> HttpRequest {
        let body = serde_json::to_value(WireRequest {
            model: &self.model,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        })
        .expect("request serializes");
        let mut http = HttpRequest::post_json(&self.base_url, &body);
        if let Some(key) = self
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
        {
            http = http.header("authorization", format!("Bearer {key}"));
        }
        http
    }
}

impl LlmAdapter for HttpAdapter {
    fn model_id(&self) -> String {
        self.model.clone()
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, AdapterError> {
        let response = self
            .transport
            .send(&self.wire_request(request))
            .map_err(|e| match e {
                TransportError::FixtureMissing(_) | TransportError::Store(_) => {
                    AdapterError::new(e.to_string(), false)
                }
                _ => AdapterError::new(e.to_string(), true),
            })?;
        if !response.is_success() {
            return Err(AdapterError::new(
                format!("model endpoint returned status {}", response.status),
                response.status >= 500,
            ));
        }
        serde_json::from_str::<WireResponse>(&response.body)
            .map(|r| r.text)
            .map_err(|e| AdapterError::new(format!("malformed model response: {e}"), false))
    }
}
