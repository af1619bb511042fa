//! Prompt templates.
//!
//! Three layouts exist: the rewrite prompt (question to retrieval intention),
//! the agent prompt (candidate tools plus prior outcomes, answered with JSON
//! calls or a `FINAL ANSWER:` line) and the tool-query prompt (context block
//! then question, with no agent scaffolding).

use std::fmt::Write as _;

use thiserror::Error;

use super::parse::OPTION_LABELS;
use super::{ChatMessage, CompletionRequest};
use crate::agent::AgentTrace;
use crate::registry::Registry;
use crate::retrieval::RankedTools;

pub const FINAL_SENTINEL: &str = "FINAL ANSWER:";
pub const CHOICE_SENTINEL: &str = "ANSWER:";

const CANDIDATES_HEADER: &str = "Candidate tools:";
const OUTCOMES_HEADER: &str = "Tool outcomes so far:";

const AGENT_SYSTEM: &str = "You are a therapeutic reasoning assistant that answers questions by calling tools.\n\
In each turn, either request tool calls or give the final answer.\n\
To request tool calls, reply with a JSON array of objects of the form \
{\"name\": \"<tool name>\", \"arguments\": {\"<parameter>\": <value>}}.\n\
Use only tools listed under \"Candidate tools:\" and their exact parameter names.\n\
When the information gathered is sufficient, reply with a line starting with \
\"FINAL ANSWER:\" followed by the answer.";

/// Strings that identify the agent scaffold. None of them may appear in a
/// tool-query prompt.
pub const AGENT_SCAFFOLD_MARKERS: [&str; 4] = [
    CANDIDATES_HEADER,
    OUTCOMES_HEADER,
    FINAL_SENTINEL,
    "JSON array",
];

const REWRITE_SYSTEM: &str =
    "You rewrite therapeutic questions into short retrieval intention statements.";

const REWRITE_INSTRUCTION: &str = "Restate the question below as one sentence naming the information \
needed to answer it, such as the drug and the property of interest (side effects, interactions, \
dosing, contraindications). Reply with the statement only.";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("question text must be non-empty")]
    EmptyQuestion,
    #[error("candidate tool `{0}` is not in the registry")]
    UnknownCandidate(String),
    #[error("expected exactly 4 options, got {0}")]
    InvalidOptions(usize),
}

pub fn build_rewrite_prompt(question: &str) -> Result<CompletionRequest, PromptError> {
    if question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    Ok(CompletionRequest::new(vec![
        ChatMessage::system(REWRITE_SYSTEM),
        ChatMessage::user(format!("{REWRITE_INSTRUCTION}\n\nQuestion:\n{}", question.trim())),
    ]))
}

fn render_options(out: &mut String, options: &[String]) -> Result<(), PromptError> {
    if options.len() != 4 {
        return Err(PromptError::InvalidOptions(options.len()));
    }
    for (label, text) in OPTION_LABELS.iter().zip(options) {
        let _ = writeln!(out, "{label}. {}", text.trim());
    }
    Ok(())
}

/// Question text with options appended as labeled lines, if any.
pub(crate) fn question_block(question: &str, options: Option<&[String]>) -> Result<String, PromptError> {
    if question.trim().is_empty() {
        return Err(PromptError::EmptyQuestion);
    }
    let mut out = format!("{}\n", question.trim());
    if let Some(opts) = options {
        out.push('\n');
        render_options(&mut out, opts)?;
    }
    Ok(out)
}

pub fn build_agent_prompt(
    question: &str,
    options: Option<&[String]>,
    trace: &AgentTrace,
    candidates: &RankedTools,
    registry: &Registry,
) -> Result<CompletionRequest, PromptError> {
    let specs = candidates
        .names()
        .map(|n| registry.get(n).ok_or_else(|| PromptError::UnknownCandidate(n.to_string())))
        .collect::<Result<Vec<_>, _>>()?;

    let mut user = format!("Question:\n{}", question_block(question, options)?);

    let feedback: Vec<&str> = trace.feedback().collect();
    if !feedback.is_empty() {
        let _ = write!(user, "\n{OUTCOMES_HEADER}\n");
        for text in feedback {
            let _ = write!(user, "{}\n\n", text.trim_end());
        }
    }

    let _ = write!(user, "\n{CANDIDATES_HEADER}\n");
    if specs.is_empty() {
        user.push_str("(none retrieved)\n");
    }
    for spec in specs {
        let _ = writeln!(user, "- {}: {}", spec.name, spec.description.trim());
        if spec.params.is_empty() {
            user.push_str("  parameters: none\n");
        }
        for p in &spec.params {
            let req = if p.required { "required" } else { "optional" };
            let _ = write!(user, "  - {} ({}, {})", p.name, p.kind_label(), req);
            if !p.description.trim().is_empty() {
                let _ = write!(user, ": {}", p.description.trim());
            }
            user.push('\n');
        }
    }
    Ok(CompletionRequest::new(vec![
        ChatMessage::system(AGENT_SYSTEM),
        ChatMessage::user(user),
    ]))
}

/// The agent prompt plus an instruction to answer now.
pub fn build_forced_final_prompt(
    question: &str,
    options: Option<&[String]>,
    trace: &AgentTrace,
    candidates: &RankedTools,
    registry: &Registry,
) -> Result<CompletionRequest, PromptError> {
    let mut req = build_agent_prompt(question, options, trace, candidates, registry)?;
    req.messages.push(ChatMessage::user(format!(
        "The tool-call budget is exhausted. Do not call tools. Reply now with a line starting with \
         \"{FINAL_SENTINEL}\" followed by your best answer."
    )));
    Ok(req)
}

/// Tool-query prompt: retrieved context first, then the question. An empty
/// context gives the no-retrieval variant.
pub fn build_tq_prompt(
    context: &str,
    question: &str,
    options: Option<&[String]>,
) -> Result<CompletionRequest, PromptError> {
    let mut user = String::new();
    if !context.trim().is_empty() {
        let _ = write!(user, "Context:\n{}\n\n", context.trim());
    }
    let _ = write!(user, "Question:\n{}", question_block(question, options)?);
    match options {
        Some(_) => {
            let _ = write!(
                user,
                "\nReply with the letter of the correct option on a line of the form \"{CHOICE_SENTINEL} <letter>\"."
            );
        }
        None => user.push_str("\nAnswer the question."),
    }
    Ok(CompletionRequest::new(vec![ChatMessage::user(user)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{CallRecord, OutcomeStatus, ToolOutcome, TraceStep};
    use crate::llm::FunctionCall;
    use crate::registry::{Binding, ParamKind, ParamSpec, ToolSpec};
    use crate::retrieval::RankedEntry;
    use serde_json::json;

    fn registry(n: usize) -> Registry {
        Registry::from_specs((0..n).map(|i| ToolSpec {
            name: format!("tool_{i}"),
            description: format!("Returns fact {i}."),
            params: vec![ParamSpec::new("drug_name", ParamKind::String, true).described("Drug name.")],
            binding: Binding::Fixture { file: "x".into() },
        }))
        .unwrap()
    }

    fn ranked(n: usize) -> RankedTools {
        RankedTools {
            query: "q".into(),
            entries: (0..n)
                .map(|i| RankedEntry { name: format!("tool_{i}"), score: 1.0 })
                .collect(),
            backend: "bm25".into(),
            k: 10,
        }
    }

    fn opts() -> Vec<String> {
        ["w", "x", "y", "z"].map(String::from).to_vec()
    }

    #[test]
    fn rewrite_template() {
        let q = "What are the side-effects to consider taking warfarin for a pregnant woman?";
        let a = build_rewrite_prompt(q).unwrap();
        assert!(a.text().contains(q));
        assert!(a.text().contains("Restate the question"));
        assert_eq!(a, build_rewrite_prompt(q).unwrap());
        assert_eq!(a.temperature, 0.0);
        assert_eq!(build_rewrite_prompt("  "), Err(PromptError::EmptyQuestion));
    }

    #[test]
    fn agent_prompt_lists_each_candidate_once() {
        let reg = registry(10);
        let text = build_agent_prompt("q?", None, &AgentTrace::new("s", "q"), &ranked(10), &reg)
            .unwrap()
            .text();
        for i in 0..10 {
            let needle = format!("- tool_{i}:");
            assert_eq!(text.matches(&needle).count(), 1, "{needle}");
        }
        assert!(text.contains("drug_name (string, required): Drug name."));
        assert!(!text.contains(OUTCOMES_HEADER));
    }

    #[test]
    fn prior_outcomes_precede_candidates() {
        let reg = registry(2);
        let mut trace = AgentTrace::new("s", "q");
        let call = FunctionCall::new("tool_0", json!({"drugname": "x"}));
        let fp = call.fingerprint();
        trace.push(0, TraceStep::CallRound {
            calls: vec![CallRecord {
                call,
                outcome: ToolOutcome::new(
                    OutcomeStatus::ValidationError { detail: "unknown parameter `drugname`".into() },
                    0,
                    fp,
                ),
            }],
        });
        trace.push(0, TraceStep::Feedback { text: "[call 1] tool_0: unknown parameter `drugname`".into() });
        let text = build_agent_prompt("q?", None, &trace, &ranked(2), &reg).unwrap().text();
        let outcomes = text.find(OUTCOMES_HEADER).unwrap();
        let cands = text.rfind(CANDIDATES_HEADER).unwrap();
        assert!(outcomes < cands);
        assert!(text.contains("unknown parameter `drugname`"));
    }

    #[test]
    fn agent_prompt_rejects_unknown_candidate() {
        let err = build_agent_prompt("q?", None, &AgentTrace::new("s", "q"), &ranked(3), &registry(2));
        assert_eq!(err, Err(PromptError::UnknownCandidate("tool_2".into())));
    }

    #[test]
    fn tq_context_first_and_no_scaffold() {
        let req = build_tq_prompt("label text", "Which drug?", Some(&opts())).unwrap();
        let text = req.text();
        assert!(text.find("label text").unwrap() < text.find("Which drug?").unwrap());
        for (label, o) in ["A. w", "B. x", "C. y", "D. z"].iter().zip(0..) {
            assert!(text.contains(label), "{o}");
        }
        for m in AGENT_SCAFFOLD_MARKERS {
            assert!(!text.contains(m), "{m}");
        }
        assert_eq!(req.messages.len(), 1);
    }

    #[test]
    fn tq_without_context() {
        let text = build_tq_prompt("", "Which drug?", None).unwrap().text();
        assert_eq!(text, "Question:\nWhich drug?\n\nAnswer the question.");
        assert!(build_tq_prompt("", "Which drug?", Some(&opts()[..2])).is_err());
    }
}
