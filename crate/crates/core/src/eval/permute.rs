use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EvalError, Question, Style};
use crate::llm::OPTION_LABELS;

/// Bijection over option positions: `targets[i]` is where the option at
/// position `i` moves. Written as the label list, so `BDAC` sends A to B,
/// B to D, C to A and D to C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PermutationSpec {
    targets: [usize; 4],
}

impl Default for PermutationSpec {
    fn default() -> Self {
        "BDAC".parse().expect("default permutation is valid")
    }
}

impl PermutationSpec {
    pub const IDENTITY: PermutationSpec = PermutationSpec { targets: [0, 1, 2, 3] };

    pub fn new(targets: [usize; 4]) -> Result<Self, EvalError> {
        let mut seen = [false; 4];
        for &t in &targets {
            if t >= 4 || seen[t] {
                return Err(EvalError::InvalidPermutation(format!("{targets:?} is not a bijection")));
            }
            seen[t] = true;
        }
        Ok(Self { targets })
    }

    pub fn targets(&self) -> [usize; 4] {
        self.targets
    }

    pub fn inverse(&self) -> Self {
        let mut inv = [0; 4];
        for (i, &t) in self.targets.iter().enumerate() {
            inv[t] = i;
        }
        Self { targets: inv }
    }

    /// New label of the option that sat at `label`.
    pub fn map_label(&self, label: char) -> Option<char> {
        let i = OPTION_LABELS.iter().position(|&l| l == label)?;
        Some(OPTION_LABELS[self.targets[i]])
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

impl fmt::Display for PermutationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &t in &self.targets {
            write!(f, "{}", OPTION_LABELS[t])?;
        }
        Ok(())
    }
}

impl FromStr for PermutationSpec {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let letters: Vec<char> = s
            .chars()
            .filter(|c| c.is_ascii_alphabetic())
            .map(|c| c.to_ascii_uppercase())
            .collect();
        if letters.len() != 4 {
            return Err(EvalError::InvalidPermutation(s.to_string()));
        }
        let mut targets = [0; 4];
        for (slot, c) in targets.iter_mut().zip(&letters) {
            *slot = OPTION_LABELS
                .iter()
                .position(|l| l == c)
                .ok_or_else(|| EvalError::InvalidPermutation(s.to_string()))?;
        }
        Self::new(targets)
    }
}

impl TryFrom<String> for PermutationSpec {
    type Error = EvalError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<PermutationSpec> for String {
    fn from(p: PermutationSpec) -> Self {
        p.to_string()
    }
}

/// Relocates options per `spec`; the gold label follows its text.
pub fn permute_options(q: &Question, spec: &PermutationSpec) -> Result<Question, EvalError> {
    if q.style == Style::Oe {
        return Err(EvalError::StyleError(q.id.clone()));
    }
    let options = q.options.as_ref().ok_or_else(|| EvalError::MissingOptions(q.id.clone()))?;
    if options.len() != 4 {
        return Err(EvalError::Schema {
            id: q.id.clone(),
            reason: format!("expected 4 options, got {}", options.len()),
        });
    }
    let mut moved = vec![String::new(); 4];
    for (i, text) in options.iter().enumerate() {
        moved[spec.targets[i]] = text.clone();
    }
    let gold = match &q.gold {
        Some(g) => {
            let label = g.trim().chars().next().and_then(|c| spec.map_label(c)).ok_or_else(|| EvalError::Schema {
                id: q.id.clone(),
                reason: format!("gold `{g}` is not an option label"),
            })?;
            Some(label.to_string())
        }
        None => None,
    };
    Ok(Question {
        options: Some(moved),
        gold,
        ..q.clone()
    })
}
