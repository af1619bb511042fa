//! Grammar for model output.
//!
//! Extraction order for [`parse_turn`]:
//! 1. a fenced code block, then bare bracket regions in text order; the first
//!    region that parses as `{name, arguments}` or a list of them is a call list;
//! 2. a line starting with `FINAL ANSWER:`, whose remainder and following
//!    lines are the answer;
//! 3. in [`ParseMode::Choice`], a line `ANSWER: <letter>`.

use std::sync::LazyLock;

use regex::Regex;
use serde_json::{Map, Value};
use thiserror::Error;

use super::{FunctionCall, ModelTurn, TurnKind, FINAL_SENTINEL};

pub const OPTION_LABELS: [char; 4] = ['A', 'B', 'C', 'D'];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Agent,
    Choice,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseFailure {
    #[error("unterminated JSON in model output")]
    Unterminated,
    #[error("malformed function call: {0}")]
    Malformed(String),
    #[error("no function calls or `{FINAL_SENTINEL}` line found in model output")]
    NoContent,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChoiceError {
    #[error("expected exactly 4 options, got {0}")]
    InvalidOptions(usize),
    #[error("no unambiguous option letter in model output")]
    Unparseable,
}

static FENCE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)```[A-Za-z0-9_-]*[ \t]*\n?(.*?)```").unwrap());
static ANSWER_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?m)^[\s*#>_]*(?i:final\s+)?(?i:answer)\s*:\s*[*_]*\(?([A-D])\)?(?:[^A-Za-z0-9]|$)")
        .unwrap()
});
static LETTER_MENTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?m)\(([A-D])\)|(?:^|[^A-Za-z0-9(])([A-D])\)|(?i:option|choice)\s+\(?([A-D])\b|^\s*([A-D])[.:]\s|^\s*([A-D])[.:]?\s*$",
    )
    .unwrap()
});

enum Region<'a> {
    Balanced(&'a str),
    Unterminated,
}

/// Top-level bracket regions in text order, skipping string literals.
fn bracket_regions(text: &str) -> Vec<Region<'_>> {
    let bytes = text.as_bytes();
    let mut regions = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'[' && bytes[i] != b'{' {
            i += 1;
            continue;
        }
        let start = i;
        let mut stack = Vec::new();
        let mut in_string = false;
        let mut escaped = false;
        let mut end = None;
        while i < bytes.len() {
            let c = bytes[i];
            if in_string {
                if escaped {
                    escaped = false;
                } else if c == b'\\' {
                    escaped = true;
                } else if c == b'"' {
                    in_string = false;
                }
            } else {
                match c {
                    b'"' => in_string = true,
                    b'[' | b'{' => stack.push(c),
                    b']' | b'}' => {
                        let open = if c == b']' { b'[' } else { b'{' };
                        if stack.last() == Some(&open) {
                            stack.pop();
                        } else {
                            // mismatched closer: not a JSON region
                            break;
                        }
                        if stack.is_empty() {
                            end = Some(i + 1);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            i += 1;
        }
        match end {
            Some(e) => {
                regions.push(Region::Balanced(&text[start..e]));
                i = e;
            }
            None if i >= bytes.len() => {
                regions.push(Region::Unterminated);
                break;
            }
            None => i = start + 1,
        }
    }
    regions
}

enum CallsParse {
    Calls(Vec<FunctionCall>),
    /// Looks like a call list but violates the grammar.
    Malformed(String),
    NotCalls,
}

fn call_from_object(obj: &Map<String, Value>) -> Result<FunctionCall, String> {
    let name = match obj.get("name") {
        Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
        Some(_) => return Err("`name` must be a non-empty string".into()),
        None => return Err("missing `name`".into()),
    };
    let arguments = match obj.get("arguments") {
        None | Some(Value::Null) => Map::new(),
        Some(Value::Object(m)) => m.clone(),
        // some models double-encode the arguments object
        Some(Value::String(s)) => match serde_json::from_str::<Value>(s) {
            Ok(Value::Object(m)) => m,
            _ => return Err(format!("`arguments` of `{name}` must be an object")),
        },
        Some(_) => return Err(format!("`arguments` of `{name}` must be an object")),
    };
    Ok(FunctionCall { name, arguments })
}

fn parse_calls(candidate: &str) -> CallsParse {
    let Ok(value) = serde_json::from_str::<Value>(candidate.trim()) else {
        return CallsParse::NotCalls;
    };
    let items: Vec<&Map<String, Value>> = match &value {
        Value::Object(obj) if obj.contains_key("name") => vec![obj],
        Value::Array(items) => {
            let objs: Vec<_> = items.iter().filter_map(Value::as_object).collect();
            if objs.len() != items.len() {
                return CallsParse::NotCalls;
            }
            if !objs.is_empty() && !objs.iter().any(|o| o.contains_key("name")) {
                return CallsParse::NotCalls;
            }
            objs
        }
        _ => return CallsParse::NotCalls,
    };
    match items.into_iter().map(call_from_object).collect() {
        Ok(calls) => CallsParse::Calls(calls),
        Err(reason) => CallsParse::Malformed(reason),
    }
}

fn find_final(raw: &str) -> Option<String> {
    let mut lines = raw.lines();
    while let Some(line) = lines.next() {
        let trimmed = line.trim_start().trim_start_matches(['*', '#', '>', '_', ' ']);
        if let Some(rest) = trimmed.strip_prefix(FINAL_SENTINEL) {
            let mut answer = rest.trim_start_matches(['*', '_']).trim().to_string();
            let tail: Vec<&str> = lines.collect();
            if !tail.is_empty() {
                if !answer.is_empty() {
                    answer.push('\n');
                }
                answer.push_str(&tail.join("\n"));
            }
            return Some(answer.trim().to_string());
        }
    }
    None
}

fn answer_line(raw: &str) -> Option<char> {
    ANSWER_LINE
        .captures_iter(raw)
        .last()
        .and_then(|c| c.get(1))
        .and_then(|m| m.as_str().chars().next())
}

pub fn parse_turn(raw: &str, mode: ParseMode) -> Result<ModelTurn, ParseFailure> {
    let turn = |kind| ModelTurn {
        raw: raw.to_string(),
        kind,
    };
    let mut failure = None;
    let fenced = FENCE.captures_iter(raw).filter_map(|c| c.get(1)).map(|m| m.as_str());
    for block in fenced {
        match parse_calls(block) {
            CallsParse::Calls(calls) => return Ok(turn(TurnKind::Calls(calls))),
            CallsParse::Malformed(r) => {
                failure.get_or_insert(ParseFailure::Malformed(r));
            }
            CallsParse::NotCalls => {}
        }
    }
    for region in bracket_regions(raw) {
        match region {
            Region::Balanced(text) => match parse_calls(text) {
                CallsParse::Calls(calls) => return Ok(turn(TurnKind::Calls(calls))),
                CallsParse::Malformed(r) => {
                    failure.get_or_insert(ParseFailure::Malformed(r));
                }
                CallsParse::NotCalls => {}
            },
            Region::Unterminated => {
                failure.get_or_insert(ParseFailure::Unterminated);
            }
        }
    }
    if let Some(answer) = find_final(raw) {
        return Ok(turn(TurnKind::Final(answer)));
    }
    if mode == ParseMode::Choice {
        if let Some(letter) = answer_line(raw) {
            return Ok(turn(TurnKind::Choice(letter)));
        }
    }
    Err(failure.unwrap_or(ParseFailure::NoContent))
}

/// Machine rendering of a call list; [`parse_turn`] inverts it.
pub fn render_calls(calls: &[FunctionCall]) -> String {
    serde_json::to_string(calls).expect("calls serialize")
}

/// Picks the chosen option letter from free model text.
///
/// Tries an `ANSWER: X` line first, then a unique letter mention such as
/// "(B)" or "option C", then a unique verbatim mention of one option's text.
pub fn extract_choice(raw: &str, options: &[String]) -> Result<char, ChoiceError> {
    if options.len() != 4 {
        return Err(ChoiceError::InvalidOptions(options.len()));
    }
    if let Some(letter) = answer_line(raw) {
        return Ok(letter);
    }
    let mut letters: Vec<char> = LETTER_MENTION
        .captures_iter(raw)
        .filter_map(|c| c.iter().skip(1).flatten().next())
        .filter_map(|m| m.as_str().chars().next())
        .collect();
    letters.sort_unstable();
    letters.dedup();
    match letters.len() {
        1 => return Ok(letters[0]),
        0 => {}
        _ => return Err(ChoiceError::Unparseable),
    }
    let lower = raw.to_lowercase();
    let texts: Vec<String> = options.iter().map(|o| o.trim().to_lowercase()).collect();
    let hits: Vec<usize> = (0..4)
        .filter(|&i| texts[i].chars().count() >= 3 && lower.contains(&texts[i]))
        .collect();
    // a hit contained in a longer hit is not an independent mention
    let independent: Vec<usize> = hits
        .iter()
        .copied()
        .filter(|&i| !hits.iter().any(|&j| j != i && texts[j].len() > texts[i].len() && texts[j].contains(&texts[i])))
        .collect();
    match independent.as_slice() {
        [i] => Ok(OPTION_LABELS[*i]),
        _ => Err(ChoiceError::Unparseable),
    }
}
