//! Session trace: the ordered record of rewrites, retrievals, call rounds,
//! feedback and termination, persisted as one JSON line per step.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::FunctionCall;
use crate::retrieval::RankedTools;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OutcomeStatus {
    Ok { payload: String },
    ValidationError { detail: String },
    ExecutionError { detail: String },
    Cached { payload: String },
}

impl OutcomeStatus {
    pub fn label(&self) -> &'static str {
        match self {
            OutcomeStatus::Ok { .. } => "ok",
            OutcomeStatus::ValidationError { .. } => "validation_error",
            OutcomeStatus::ExecutionError { .. } => "execution_error",
            OutcomeStatus::Cached { .. } => "cached",
        }
    }

    /// Payload of a successful (`ok` or `cached`) outcome.
    pub fn payload(&self) -> Option<&str> {
        match self {
            OutcomeStatus::Ok { payload } | OutcomeStatus::Cached { payload } => Some(payload),
            _ => None,
        }
    }

    pub fn text(&self) -> &str {
        match self {
            OutcomeStatus::Ok { payload } | OutcomeStatus::Cached { payload } => payload,
            OutcomeStatus::ValidationError { detail } | OutcomeStatus::ExecutionError { detail } => {
                detail
            }
        }
    }
}

/// Result of one function call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolOutcome {
    #[serde(flatten)]
    pub status: OutcomeStatus,
    pub latency_ms: u64,
    pub fingerprint: String,
    /// Size of the returned payload; large label narratives show up here.
    pub payload_bytes: usize,
}

impl ToolOutcome {
    pub fn new(status: OutcomeStatus, latency_ms: u64, fingerprint: String) -> Self {
        let payload_bytes = status.payload().map_or(0, str::len);
        Self {
            status,
            latency_ms,
            fingerprint,
            payload_bytes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub call: FunctionCall,
    pub outcome: ToolOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    Final { answer: String },
    BudgetExhausted { forced_answer: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum TraceStep {
    Rewrite { text: String },
    Retrieval(RankedTools),
    CallRound { calls: Vec<CallRecord> },
    Feedback { text: String },
    /// Frozen context supplied to a fixed-retrieval session.
    Context { context_id: String, text: String },
    Termination(Termination),
}

impl TraceStep {
    pub fn kind(&self) -> &'static str {
        match self {
            TraceStep::Rewrite { .. } => "rewrite",
            TraceStep::Retrieval(_) => "retrieval",
            TraceStep::CallRound { .. } => "call_round",
            TraceStep::Feedback { .. } => "feedback",
            TraceStep::Context { .. } => "context",
            TraceStep::Termination(_) => "termination",
        }
    }
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub session_id: String,
    pub question_id: String,
    pub step_index: usize,
    #[serde(flatten)]
    pub step: TraceStep,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedStep {
    pub timestamp: u64,
    pub step: TraceStep,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace mixes sessions `{0}` and `{1}`")]
    MixedSessions(String, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrace {
    pub session_id: String,
    pub question_id: String,
    pub steps: Vec<TimedStep>,
}

impl AgentTrace {
    pub fn new(session_id: impl Into<String>, question_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            question_id: question_id.into(),
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, timestamp: u64, step: TraceStep) {
        self.steps.push(TimedStep { timestamp, step });
    }

    pub fn kinds(&self) -> Vec<&'static str> {
        self.steps.iter().map(|s| s.step.kind()).collect()
    }

    pub fn termination(&self) -> Option<&Termination> {
        match self.steps.last().map(|s| &s.step) {
            Some(TraceStep::Termination(t)) => Some(t),
            _ => None,
        }
    }

    pub fn call_records(&self) -> impl Iterator<Item = &CallRecord> {
        self.steps.iter().flat_map(|s| match &s.step {
            TraceStep::CallRound { calls } => calls.as_slice(),
            _ => &[],
        })
    }

    pub fn retrievals(&self) -> impl Iterator<Item = &RankedTools> {
        self.steps.iter().filter_map(|s| match &s.step {
            TraceStep::Retrieval(r) => Some(r),
            _ => None,
        })
    }

    pub fn feedback(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().filter_map(|s| match &s.step {
            TraceStep::Feedback { text } => Some(text.as_str()),
            _ => None,
        })
    }

    pub fn records(&self) -> Vec<TraceRecord> {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| TraceRecord {
                session_id: self.session_id.clone(),
                question_id: self.question_id.clone(),
                step_index: i,
                step: s.step.clone(),
                timestamp: s.timestamp,
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in self.records() {
            let _ = writeln!(out, "{}", serde_json::to_string(&r).expect("trace serializes"));
        }
        out
    }

    pub fn write_jsonl(&self, mut writer: impl Write) -> std::io::Result<()> {
        writer.write_all(self.to_jsonl().as_bytes())
    }

    pub fn from_jsonl(reader: impl BufRead) -> Result<AgentTrace, TraceError> {
        let mut trace: Option<AgentTrace> = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TraceRecord = serde_json::from_str(&line).map_err(|e| TraceError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let t = trace.get_or_insert_with(|| AgentTrace::new(&record.session_id, &record.question_id));
            if t.session_id != record.session_id {
                return Err(TraceError::MixedSessions(t.session_id.clone(), record.session_id));
            }
            if record.step_index != t.steps.len() {
                return Err(TraceError::Parse {
                    line: i + 1,
                    message: format!("expected step_index {}, got {}", t.steps.len(), record.step_index),
                });
            }
            t.push(record.timestamp, record.step);
        }
        trace.ok_or(TraceError::Parse {
            line: 0,
            message: "empty trace".into(),
        })
    }

    pub fn parse_jsonl(text: &str) -> Result<AgentTrace, TraceError> {
        Self::from_jsonl(text.as_bytes())
    }
}

/// Concatenates successful payloads in execution order, each headed by its
/// tool name. Failed outcomes are dropped. A fixed-retrieval trace yields
/// the context it was given.
pub fn freeze_context(trace: &AgentTrace) -> String {
    let mut blocks = Vec::new();
    for s in &trace.steps {
        match &s.step {
            TraceStep::Context { text, .. } if !text.is_empty() => blocks.push(text.clone()),
            TraceStep::CallRound { calls } => {
                for rec in calls {
                    if let Some(payload) = rec.outcome.status.payload() {
                        blocks.push(format!("[{}]\n{}", rec.call.name, payload.trim_end()));
                    }
                }
            }
            _ => {}
        }
    }
    blocks.join("\n\n")
}
