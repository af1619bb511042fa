//! Language-model gateway: completion adapters, prompt templates, and the
//! parser that turns raw model text into calls, final answers, or choices.

mod adapter;
mod parse;
mod prompt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use adapter::{
    AdapterError, HttpAdapter, LlmAdapter, ScriptBook, ScriptedAdapter,
};
pub use parse::{extract_choice, parse_turn, render_calls, ChoiceError, ParseFailure, ParseMode, OPTION_LABELS};
pub use prompt::{
    build_agent_prompt, build_forced_final_prompt, build_rewrite_prompt, build_tq_prompt,
    PromptError, AGENT_SCAFFOLD_MARKERS, CHOICE_SENTINEL, FINAL_SENTINEL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

pub const DEFAULT_MAX_TOKENS: u32 = 1024;

impl CompletionRequest {
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        Self {
            messages,
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    /// All message contents joined, for inspection and substring checks.
    pub fn text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

/// One tool invocation requested by the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionCall {
    pub name: String,
    #[serde(default)]
    pub arguments: Map<String, Value>,
}

impl FunctionCall {
    pub fn new(name: impl Into<String>, arguments: Value) -> Self {
        Self {
            name: name.into(),
            arguments: arguments.as_object().cloned().unwrap_or_default(),
        }
    }

    pub fn fingerprint(&self) -> String {
        crate::fingerprint::call_fingerprint(&self.name, &self.arguments)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum TurnKind {
    Rewrite(String),
    Calls(Vec<FunctionCall>),
    Final(String),
    Choice(char),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTurn {
    pub raw: String,
    pub kind: TurnKind,
}
