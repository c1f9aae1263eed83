//! Question decompositions: ordered natural-language steps with `#k`
//! back-references.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecompositionError {
    #[error("decomposition has no steps")]
    Empty,
    #[error("step {step} references #{reference}, which is not an earlier step")]
    BadReference { step: usize, reference: usize },
}

static REF_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#(\d+)").unwrap());

/// Whether the source QDMR annotation is low- or high-level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Low,
    High,
}

impl Default for Level {
    fn default() -> Self {
        Level::Low
    }
}

/// One decomposition step plus the step indices it references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepText {
    raw: String,
    /// Referenced step numbers, ascending and unique.
    references: Vec<usize>,
}

impl StepText {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let mut references: Vec<usize> = REF_RE
            .captures_iter(&raw)
            .filter_map(|c| c[1].parse::<usize>().ok())
            .collect();
        references.sort_unstable();
        references.dedup();
        StepText { raw, references }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn references(&self) -> &[usize] {
        &self.references
    }
}

/// A question paired with its ordered decomposition steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    pub question_id: String,
    pub question_text: String,
    steps: Vec<StepText>,
    pub level: Level,
    pub source_dataset: String,
}

impl Decomposition {
    pub fn new(
        question_id: impl Into<String>,
        question_text: impl Into<String>,
        step_texts: Vec<String>,
        level: Level,
        source_dataset: impl Into<String>,
    ) -> Result<Self, DecompositionError> {
        if step_texts.is_empty() {
            return Err(DecompositionError::Empty);
        }
        let steps: Vec<StepText> = step_texts.into_iter().map(StepText::new).collect();
        for (i, step) in steps.iter().enumerate() {
            let step_no = i + 1;
            for &r in step.references() {
                if r == 0 || r >= step_no {
                    return Err(DecompositionError::BadReference { step: step_no, reference: r });
                }
            }
        }
        Ok(Decomposition {
            question_id: question_id.into(),
            question_text: question_text.into(),
            steps,
            level,
            source_dataset: source_dataset.into(),
        })
    }

    /// Splits a `;`-joined decomposition string into steps.
    pub fn from_joined(
        question_id: impl Into<String>,
        question_text: impl Into<String>,
        joined: &str,
        level: Level,
        source_dataset: impl Into<String>,
    ) -> Result<Self, DecompositionError> {
        let steps: Vec<String> = joined
            .split(';')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        Decomposition::new(question_id, question_text, steps, level, source_dataset)
    }

    pub fn steps(&self) -> &[StepText] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn references_extracted_sorted_unique() {
        let s = StepText::new("return number #2 where #3 is least and #2 is kept");
        assert_eq!(s.references(), &[2, 3]);
    }

    #[test]
    fn forward_and_self_references_rejected() {
        let err = Decomposition::new(
            "q1",
            "q",
            vec!["return players".into(), "return #2".into()],
            Level::Low,
            "TEST",
        )
        .unwrap_err();
        assert_eq!(err, DecompositionError::BadReference { step: 2, reference: 2 });

        let err = Decomposition::new(
            "q1",
            "q",
            vec!["return #1 players".into()],
            Level::Low,
            "TEST",
        )
        .unwrap_err();
        assert_eq!(err, DecompositionError::BadReference { step: 1, reference: 1 });
    }

    #[test]
    fn joined_form_splits_on_semicolons() {
        let d = Decomposition::from_joined(
            "q1",
            "How many touchdowns did Edward throw in the 1st quarter?",
            "return touchdowns by Edward ;return #1 from the 1st quarter ;return the number of #2",
            Level::Low,
            "DROP",
        )
        .unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.steps()[1].references(), &[1]);
    }

    #[test]
    fn empty_rejected() {
        assert!(Decomposition::new("q", "q", vec![], Level::Low, "T").is_err());
    }
}
