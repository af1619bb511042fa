//! Tool registry: described tools with parameter schemas, and call validation.
//!
//! A [`Registry`] is an immutable revision. Registering a tool produces a new
//! revision with a higher version number, so sessions and retrieval indexes
//! built from an older revision are never affected by later registrations.

use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::llm::FunctionCall;

/// Declared kind of a tool parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    String,
    Integer,
    Number,
    Boolean,
    Enum,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParamKind::String => "string",
            ParamKind::Integer => "integer",
            ParamKind::Number => "number",
            ParamKind::Boolean => "boolean",
            ParamKind::Enum => "enum",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default)]
    pub required: bool,
    #[serde(default)]
    pub description: String,
    /// Allowed values, only meaningful for [`ParamKind::Enum`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<String>,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, kind: ParamKind, required: bool) -> Self {
        Self {
            name: name.into(),
            kind,
            required,
            description: String::new(),
            values: Vec::new(),
        }
    }

    pub fn described(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn with_values<I, S>(mut self, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.values = values.into_iter().map(Into::into).collect();
        self
    }

    /// Human-readable kind, including enum values.
    pub fn kind_label(&self) -> String {
        match self.kind {
            ParamKind::Enum => format!("enum({})", self.values.join("|")),
            _ => self.kind.to_string(),
        }
    }
}

/// How a tool is executed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Binding {
    /// Handled in-process by a named handler.
    Builtin { handler: String },
    /// Remote HTTP endpoint. `url_template` carries `{param}` placeholders and
    /// `extract` is a JSON pointer selecting the payload from the response.
    Http {
        url_template: String,
        #[serde(default = "default_method")]
        method: String,
        #[serde(default)]
        extract: String,
    },
    /// Payload read from a fixture file, with `{param}` placeholders filled.
    Fixture { file: String },
}

fn default_method() -> String {
    "GET".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub params: Vec<ParamSpec>,
    pub binding: Binding,
}

impl ToolSpec {
    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Checks structural invariants and returns every violation found.
    pub fn check(&self) -> Vec<String> {
        let mut reasons = Vec::new();
        if self.name.trim().is_empty() {
            reasons.push("name: must be non-empty".to_string());
        }
        if self.description.trim().is_empty() {
            reasons.push("description: must be non-empty".to_string());
        }
        let mut seen = std::collections::HashSet::new();
        for (i, p) in self.params.iter().enumerate() {
            if p.name.trim().is_empty() {
                reasons.push(format!("params[{i}].name: must be non-empty"));
            } else if !seen.insert(p.name.as_str()) {
                reasons.push(format!("params[{i}].name: duplicate parameter `{}`", p.name));
            }
            if p.kind == ParamKind::Enum && p.values.is_empty() {
                reasons.push(format!("params[{i}].values: enum `{}` needs at least one value", p.name));
            }
        }
        match &self.binding {
            Binding::Builtin { handler } if handler.trim().is_empty() => {
                reasons.push("binding.handler: must be non-empty".to_string())
            }
            Binding::Http { url_template, .. } if url_template.trim().is_empty() => {
                reasons.push("binding.url_template: must be non-empty".to_string())
            }
            Binding::Fixture { file } if file.trim().is_empty() => {
                reasons.push("binding.file: must be non-empty".to_string())
            }
            _ => {}
        }
        reasons
    }
}

/// Counts sentences by splitting on `.`, `?` or `!` followed by whitespace.
pub fn sentence_count(text: &str) -> usize {
    let chars: Vec<char> = text.chars().collect();
    let mut count = 0;
    let mut current = String::new();
    for (i, c) in chars.iter().enumerate() {
        current.push(*c);
        let terminal = matches!(c, '.' | '?' | '!');
        let boundary = chars.get(i + 1).is_none_or(|n| n.is_whitespace());
        if terminal && boundary {
            if !current.trim().is_empty() {
                count += 1;
            }
            current.clear();
        }
    }
    if !current.trim().is_empty() {
        count += 1;
    }
    count
}

/// Non-fatal observation about a registered tool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LintWarning {
    pub tool: String,
    pub message: String,
}

impl fmt::Display for LintWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.tool, self.message)
    }
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("tool `{0}` is already registered")]
    DuplicateName(String),
    #[error("invalid tool spec `{tool}`: {}", reasons.join("; "))]
    InvalidSpec { tool: String, reasons: Vec<String> },
    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    InvalidSpecs(Vec<RegistryError>),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cannot read registry file: {0}")]
    Io(#[from] std::io::Error),
}

/// One violation found while validating a function call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallViolation {
    UnknownTool(String),
    UnknownParam(String),
    MissingRequiredParam(String),
    TypeMismatch {
        name: String,
        expected: String,
        got: String,
    },
}

impl fmt::Display for CallViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CallViolation::UnknownTool(name) => write!(f, "unknown tool `{name}`"),
            CallViolation::UnknownParam(name) => write!(f, "unknown parameter `{name}`"),
            CallViolation::MissingRequiredParam(name) => {
                write!(f, "missing required parameter `{name}`")
            }
            CallViolation::TypeMismatch {
                name,
                expected,
                got,
            } => write!(f, "parameter `{name}` expects {expected}, got {got}"),
        }
    }
}

/// Every violation of one call, in a stable order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct CallError {
    pub tool: String,
    pub violations: Vec<CallViolation>,
}

impl fmt::Display for CallError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "invalid call to `{}`: {}", self.tool, parts.join("; "))
    }
}

/// A call whose arguments conform to the tool schema, coerced to declared kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedCall {
    pub tool: String,
    pub arguments: Map<String, Value>,
}

impl ValidatedCall {
    pub fn as_call(&self) -> FunctionCall {
        FunctionCall {
            name: self.tool.clone(),
            arguments: self.arguments.clone(),
        }
    }

    /// Argument rendered as plain text, for URL templates and handlers.
    pub fn arg_text(&self, name: &str) -> Option<String> {
        self.arguments.get(name).map(|v| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct RegistryFile {
    tools: Vec<ToolSpec>,
}

/// Immutable registry revision.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Registry {
    tools: IndexMap<String, ToolSpec>,
    version: u64,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    /// Tools in registration order.
    pub fn tools(&self) -> impl Iterator<Item = &ToolSpec> {
        self.tools.values()
    }

    /// `(name, description)` pairs in registration order.
    pub fn corpus(&self) -> impl Iterator<Item = (&str, &str)> {
        self.tools
            .values()
            .map(|t| (t.name.as_str(), t.description.as_str()))
    }

    /// Returns a new revision containing `spec`.
    pub fn register_tool(&self, spec: ToolSpec) -> Result<Registry, RegistryError> {
        let reasons = spec.check();
        if !reasons.is_empty() {
            return Err(RegistryError::InvalidSpec {
                tool: spec.name.clone(),
                reasons,
            });
        }
        if self.tools.contains_key(&spec.name) {
            return Err(RegistryError::DuplicateName(spec.name));
        }
        let mut tools = self.tools.clone();
        tools.insert(spec.name.clone(), spec);
        Ok(Registry {
            tools,
            version: self.version + 1,
        })
    }

    pub fn from_specs(specs: impl IntoIterator<Item = ToolSpec>) -> Result<Registry, RegistryError> {
        let mut errors = Vec::new();
        let mut tools = IndexMap::new();
        for spec in specs {
            let reasons = spec.check();
            if !reasons.is_empty() {
                errors.push(RegistryError::InvalidSpec {
                    tool: spec.name.clone(),
                    reasons,
                });
            } else if tools.contains_key(&spec.name) {
                errors.push(RegistryError::DuplicateName(spec.name.clone()));
            } else {
                tools.insert(spec.name.clone(), spec);
            }
        }
        match errors.len() {
            0 => Ok(Registry {
                version: tools.len() as u64,
                tools,
            }),
            1 => Err(errors.remove(0)),
            _ => Err(RegistryError::InvalidSpecs(errors)),
        }
    }

    /// Parses a registry document (JSON with a top-level `tools` list).
    pub fn parse(document: &str) -> Result<Registry, RegistryError> {
        let file: RegistryFile =
            serde_json::from_str(document).map_err(|e| RegistryError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        Registry::from_specs(file.tools)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Registry, RegistryError> {
        let text = std::fs::read_to_string(path)?;
        Registry::parse(&text)
    }

    pub fn to_document(&self) -> String {
        let file = RegistryFile {
            tools: self.tools.values().cloned().collect(),
        };
        serde_json::to_string_pretty(&file).expect("registry serializes")
    }

    /// Descriptions longer than two sentences are flagged, not rejected.
    pub fn lint(&self) -> Vec<LintWarning> {
        self.tools
            .values()
            .filter_map(|t| {
                let n = sentence_count(&t.description);
                (n > 2).then(|| LintWarning {
                    tool: t.name.clone(),
                    message: format!("description has {n} sentences (expected at most 2)"),
                })
            })
            .collect()
    }

    /// Validates a call and coerces its arguments to the declared kinds.
    ///
    /// The error lists all violations: unknown keys first (in argument
    /// order), then missing required parameters and type mismatches in
    /// schema order.
    pub fn validate_call(&self, call: &FunctionCall) -> Result<ValidatedCall, CallError> {
        let Some(spec) = self.tools.get(&call.name) else {
            return Err(CallError {
                tool: call.name.clone(),
                violations: vec![CallViolation::UnknownTool(call.name.clone())],
            });
        };
        let mut violations = Vec::new();
        for key in call.arguments.keys() {
            if spec.param(key).is_none() {
                violations.push(CallViolation::UnknownParam(key.clone()));
            }
        }
        let mut arguments = Map::new();
        for param in &spec.params {
            match call.arguments.get(&param.name) {
                None | Some(Value::Null) => {
                    if param.required {
                        violations.push(CallViolation::MissingRequiredParam(param.name.clone()));
                    }
                }
                Some(value) => match coerce(param, value) {
                    Ok(v) => {
                        arguments.insert(param.name.clone(), v);
                    }
                    Err(got) => violations.push(CallViolation::TypeMismatch {
                        name: param.name.clone(),
                        expected: param.kind_label(),
                        got,
                    }),
                },
            }
        }
        if violations.is_empty() {
            Ok(ValidatedCall {
                tool: spec.name.clone(),
                arguments,
            })
        } else {
            Err(CallError {
                tool: spec.name.clone(),
                violations,
            })
        }
    }
}

fn describe(value: &Value) -> String {
    match value {
        Value::Null => "null".to_string(),
        Value::Bool(b) => format!("boolean {b}"),
        Value::Number(n) => format!("number {n}"),
        Value::String(s) => format!("string {s:?}"),
        Value::Array(_) => "array".to_string(),
        Value::Object(_) => "object".to_string(),
    }
}

/// Numeric strings coerce to numeric kinds; everything else is strict.
fn coerce(param: &ParamSpec, value: &Value) -> Result<Value, String> {
    match (&param.kind, value) {
        (ParamKind::String, Value::String(_)) => Ok(value.clone()),
        (ParamKind::Boolean, Value::Bool(_)) => Ok(value.clone()),
        (ParamKind::Integer, Value::Number(n)) if n.is_i64() || n.is_u64() => Ok(value.clone()),
        (ParamKind::Integer, Value::String(s)) => s
            .trim()
            .parse::<i64>()
            .map(Value::from)
            .map_err(|_| describe(value)),
        (ParamKind::Number, Value::Number(_)) => Ok(value.clone()),
        (ParamKind::Number, Value::String(s)) => s
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|f| f.is_finite())
            .and_then(serde_json::Number::from_f64)
            .map(Value::Number)
            .ok_or_else(|| describe(value)),
        (ParamKind::Enum, Value::String(s)) if param.values.iter().any(|v| v == s) => {
            Ok(value.clone())
        }
        _ => Err(describe(value)),
    }
}
