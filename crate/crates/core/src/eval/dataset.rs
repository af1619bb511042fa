use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::llm::OPTION_LABELS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Style {
    #[serde(rename = "MC")]
    Mc,
    #[serde(rename = "OEMC")]
    Oemc,
    #[serde(rename = "OE")]
    Oe,
}

impl Style {
    pub const ALL: [Style; 3] = [Style::Mc, Style::Oemc, Style::Oe];

    pub fn label(self) -> &'static str {
        match self {
            Style::Mc => "MC",
            Style::Oemc => "OEMC",
            Style::Oe => "OE",
        }
    }

    pub fn has_options(self) -> bool {
        self != Style::Oe
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Style {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().replace('-', "").as_str() {
            "MC" => Ok(Style::Mc),
            "OEMC" => Ok(Style::Oemc),
            "OE" => Ok(Style::Oe),
            other => Err(format!("unknown question style `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub style: Style,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    /// Option label for MC and OEMC, reference text for OE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<String>,
}

impl Question {
    pub fn gold_label(&self) -> Option<char> {
        match self.style {
            Style::Oe => None,
            _ => self.gold.as_deref().and_then(|g| g.trim().chars().next()),
        }
    }

    pub fn check(&self) -> Result<(), EvalError> {
        let schema = |reason: String| EvalError::Schema {
            id: self.id.clone(),
            reason,
        };
        if self.id.trim().is_empty() {
            return Err(schema("empty id".into()));
        }
        if self.question.trim().is_empty() {
            return Err(schema("empty question text".into()));
        }
        match (&self.options, self.style.has_options()) {
            (Some(opts), true) => {
                if opts.len() != 4 {
                    return Err(schema(format!("{} style needs exactly 4 options, got {}", self.style, opts.len())));
                }
                if let Some(g) = &self.gold {
                    let label = g.trim();
                    if label.chars().count() != 1 || !OPTION_LABELS.contains(&label.chars().next().unwrap_or(' ')) {
                        return Err(schema(format!("gold `{g}` is not an option label A-D")));
                    }
                }
            }
            (None, true) => return Err(schema(format!("{} style needs exactly 4 options, got 0", self.style))),
            (Some(_), false) => return Err(schema("OE questions take no options".into())),
            (None, false) => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub total: usize,
    pub per_style: BTreeMap<Style, usize>,
}

impl DatasetManifest {
    pub fn of(name: impl Into<String>, questions: &[Question]) -> Self {
        let mut per_style: BTreeMap<Style, usize> = Style::ALL.iter().map(|s| (*s, 0)).collect();
        for q in questions {
            *per_style.entry(q.style).or_default() += 1;
        }
        Self {
            name: name.into(),
            total: questions.len(),
            per_style,
        }
    }

    pub fn count(&self, style: Style) -> usize {
        self.per_style.get(&style).copied().unwrap_or(0)
    }
}

pub fn parse_dataset(name: &str, text: &str) -> Result<(DatasetManifest, Vec<Question>), EvalError> {
    let questions: Vec<Question> = serde_json::from_str(text).map_err(|e| EvalError::Parse(e.to_string()))?;
    let mut seen = HashSet::new();
    for q in &questions {
        q.check()?;
        if !seen.insert(q.id.as_str()) {
            return Err(EvalError::Schema {
                id: q.id.clone(),
                reason: "duplicate id".into(),
            });
        }
    }
    Ok((DatasetManifest::of(name, &questions), questions))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<Question>), EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset(&name, &text)
}

pub fn write_dataset(path: impl AsRef<Path>, questions: &[Question]) -> Result<(), EvalError> {
    let text = serde_json::to_string_pretty(questions).expect("questions serialize");
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// MC and OEMC variants of a labeled question with options. Ids carry the
/// style as a suffix.
pub fn derive_styles(q: &Question) -> Result<(Question, Question), EvalError> {
    let options = q.options.clone().ok_or_else(|| EvalError::MissingOptions(q.id.clone()))?;
    let gold = q.gold.clone().ok_or_else(|| EvalError::MissingGold(q.id.clone()))?;
    let base = q
        .id
        .strip_suffix(&format!("-{}", q.style))
        .unwrap_or(&q.id);
    let variant = |style: Style| Question {
        id: format!("{base}-{style}"),
        style,
        question: q.question.clone(),
        options: Some(options.clone()),
        gold: Some(gold.clone()),
    };
    let (mc, oemc) = (variant(Style::Mc), variant(Style::Oemc));
    mc.check()?;
    Ok((mc, oemc))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mc(id: &str, n: usize) -> Question {
        Question {
            id: id.into(),
            style: Style::Mc,
            question: "Which?".into(),
            options: Some((0..n).map(|i| format!("o{i}")).collect()),
            gold: Some("A".into()),
        }
    }

    #[test]
    fn three_options_is_schema_error() {
        let text = serde_json::to_string(&[mc("q1", 3)]).unwrap();
        match parse_dataset("d", &text) {
            Err(EvalError::Schema { id, .. }) => assert_eq!(id, "q1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manifest_counts() {
        let mut qs = vec![mc("a", 4), mc("b", 4)];
        qs.push(Question {
            id: "c".into(),
            style: Style::Oe,
            question: "Why?".into(),
            options: None,
            gold: Some("because".into()),
        });
        let text = serde_json::to_string(&qs).unwrap();
        let (m, _) = parse_dataset("d", &text).unwrap();
        assert_eq!((m.total, m.count(Style::Mc), m.count(Style::Oemc), m.count(Style::Oe)), (3, 2, 0, 1));
        assert_eq!(parse_dataset("d", &text).unwrap().0, m);
    }

    #[test]
    fn wire_format() {
        let q: Question = serde_json::from_str(
            r#"{"id": "x", "style": "OEMC", "question": "Q?", "options": ["a","b","c","d"], "gold": "D"}"#,
        )
        .unwrap();
        assert_eq!(q.gold_label(), Some('D'));
        assert!(q.check().is_ok());
        let bad = Question { gold: Some("E".into()), ..q };
        assert!(bad.check().is_err());
    }

    #[test]
    fn derived_variants() {
        let q = Question {
            id: "q7-OEMC".into(),
            style: Style::Oemc,
            ..mc("", 4)
        };
        let (m, o) = derive_styles(&q).unwrap();
        assert_eq!((m.id.as_str(), o.id.as_str()), ("q7-MC", "q7-OEMC"));
        assert_eq!(m.options, q.options);
        assert_eq!(m.gold, q.gold);
        let oe = Question {
            style: Style::Oe,
            options: None,
            ..mc("z", 4)
        };
        assert!(matches!(derive_styles(&oe), Err(EvalError::MissingOptions(_))));
        let unlabeled = Question { gold: None, ..mc("u", 4) };
        assert!(matches!(derive_styles(&unlabeled), Err(EvalError::MissingGold(_))));
    }
}
