//! Predicates: natural-language relation templates with one blank slot.
//!
//! A predicate like `"touchdowns by Edward ___"` is grounded by filling the
//! blank with generated entities. Entity mentions inside the template (names,
//! numbers, years, ordinals) are tagged so they can be swapped when building
//! distractor chains and contrastive questions.

use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The blank slot marker inside predicate templates.
pub const BLANK: &str = "___";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PredicateError {
    #[error("predicate template must contain exactly one blank slot: {0:?}")]
    BlankCount(String),
    #[error("predicate template is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionKind {
    Number,
    Date,
    NamedEntity,
    Ordinal,
}

/// A tagged span within a template or question text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mention {
    pub start: usize,
    pub end: usize,
    pub kind: MentionKind,
}

impl Mention {
    pub fn text<'a>(&self, source: &'a str) -> &'a str {
        &source[self.start..self.end]
    }
}

static FULL_DATE_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\b(\d{1,2}) (January|February|March|April|May|June|July|August|September|October|November|December) (\d{4})\b",
    )
    .unwrap()
});

static ORDINAL_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b(\d+(?:st|nd|rd|th)|first|second|third|fourth|fifth|sixth|seventh|eighth|ninth|tenth|last)\b",
    )
    .unwrap()
});

static NUMBER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\b\d{1,3}(?:,\d{3})+(?:\.\d+)?\b|\b\d+(?:\.\d+)?\b").unwrap());

static CAPITALIZED_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[A-Z][a-zA-Z]*\b").unwrap());

/// Words that look like proper nouns but never denote swappable entities.
const CAPITALIZED_STOPWORDS: &[&str] = &[
    "The", "A", "An", "In", "On", "Of", "At", "By", "To", "From", "And", "Or", "Not", "Is", "Are",
    "Was", "Were", "Did", "Does", "Do", "If", "Return", "How", "What", "When", "Which", "Who",
    "Where", "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];

fn overlaps(taken: &[(usize, usize)], start: usize, end: usize) -> bool {
    taken.iter().any(|&(s, e)| start < e && s < end)
}

/// Scans free text for entity mentions. Full dates take precedence over
/// ordinals, ordinals over bare numbers, numbers over capitalized names;
/// bare years in 1100..=2022 count as dates.
pub fn scan_mentions(text: &str) -> Vec<Mention> {
    let mut taken: Vec<(usize, usize)> = vec![];
    let mut out: Vec<Mention> = vec![];

    // Never treat the blank slot as a mention.
    if let Some(pos) = text.find(BLANK) {
        taken.push((pos, pos + BLANK.len()));
    }

    for m in FULL_DATE_RE.find_iter(text) {
        if !overlaps(&taken, m.start(), m.end()) {
            taken.push((m.start(), m.end()));
            out.push(Mention { start: m.start(), end: m.end(), kind: MentionKind::Date });
        }
    }
    for m in ORDINAL_RE.find_iter(text) {
        if !overlaps(&taken, m.start(), m.end()) {
            taken.push((m.start(), m.end()));
            out.push(Mention { start: m.start(), end: m.end(), kind: MentionKind::Ordinal });
        }
    }
    for m in NUMBER_RE.find_iter(text) {
        if !overlaps(&taken, m.start(), m.end()) {
            let kind = match m.as_str().parse::<i32>() {
                Ok(y) if (crate::value::YEAR_MIN..=crate::value::YEAR_MAX).contains(&y)
                    && m.as_str().len() == 4 =>
                {
                    MentionKind::Date
                }
                _ => MentionKind::Number,
            };
            taken.push((m.start(), m.end()));
            out.push(Mention { start: m.start(), end: m.end(), kind });
        }
    }
    for m in CAPITALIZED_RE.find_iter(text) {
        if !overlaps(&taken, m.start(), m.end())
            && !CAPITALIZED_STOPWORDS.contains(&m.as_str())
        {
            taken.push((m.start(), m.end()));
            out.push(Mention { start: m.start(), end: m.end(), kind: MentionKind::NamedEntity });
        }
    }

    out.sort_by_key(|m| m.start);
    out
}

/// A relation template with exactly one blank slot for grounded entities,
/// e.g. `"touchdowns by Edward ___"` or `"___ from the 1st quarter"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Predicate {
    template: String,
    mentions: Vec<Mention>,
}

impl Predicate {
    pub fn new(template: impl Into<String>) -> Result<Self, PredicateError> {
        let template = template.into();
        if template.trim().is_empty() {
            return Err(PredicateError::Empty);
        }
        if template.matches(BLANK).count() != 1 {
            return Err(PredicateError::BlankCount(template));
        }
        let mentions = scan_mentions(&template);
        Ok(Predicate { template, mentions })
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn mentions(&self) -> &[Mention] {
        &self.mentions
    }

    pub fn has_mentions(&self) -> bool {
        !self.mentions.is_empty()
    }

    /// Template text with the blank removed and whitespace squeezed; used
    /// where the grounded entity is stated separately in the fact sentence.
    pub fn text_without_blank(&self) -> String {
        let replaced = self.template.replace(BLANK, " ");
        replaced.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    /// Template text with the blank filled in.
    pub fn instantiate(&self, filler: &str) -> String {
        self.template.replacen(BLANK, filler, 1)
    }

    /// Whitespace tokens of the blank-stripped text, lowercased. Used by the
    /// word-overlap metric for retrieved-predicate perturbation.
    pub fn tokens_lower(&self) -> Vec<String> {
        self.text_without_blank()
            .split_whitespace()
            .map(|t| t.to_lowercase())
            .collect()
    }

    /// Returns a new predicate with `mention` (a span of this template)
    /// replaced by `replacement`.
    pub fn with_mention_replaced(&self, mention: &Mention, replacement: &str) -> Result<Self, PredicateError> {
        let mut s = String::with_capacity(self.template.len());
        s.push_str(&self.template[..mention.start]);
        s.push_str(replacement);
        s.push_str(&self.template[mention.end..]);
        Predicate::new(s)
    }

    /// Replaces every whole-word occurrence of `from` in the template.
    pub fn with_text_substituted(&self, from: &str, to: &str) -> Result<Self, PredicateError> {
        Predicate::new(substitute_word(&self.template, from, to))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.template)
    }
}

impl Serialize for Predicate {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.template)
    }
}

impl<'de> Deserialize<'de> for Predicate {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Predicate::new(s).map_err(serde::de::Error::custom)
    }
}

/// Whole-word textual substitution (word boundaries on both sides).
pub fn substitute_word(text: &str, from: &str, to: &str) -> String {
    if from.is_empty() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    let mut offset = 0;
    while let Some(pos) = rest.find(from) {
        let abs = offset + pos;
        let before_ok = abs == 0
            || !text[..abs].chars().next_back().is_some_and(|c| c.is_alphanumeric());
        let after = abs + from.len();
        let after_ok =
            after >= text.len() || !text[after..].chars().next().is_some_and(|c| c.is_alphanumeric());
        if before_ok && after_ok {
            out.push_str(&text[offset..abs]);
            out.push_str(to);
            offset = after;
        } else {
            out.push_str(&text[offset..after]);
            offset = after;
        }
        rest = &text[offset..];
    }
    out.push_str(&text[offset..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requires_exactly_one_blank() {
        assert!(Predicate::new("touchdowns by Edward ___").is_ok());
        assert!(Predicate::new("touchdowns by Edward").is_err());
        assert!(Predicate::new("___ and ___").is_err());
        assert!(Predicate::new("   ").is_err());
    }

    #[test]
    fn mentions_tagged_by_kind() {
        let p = Predicate::new("touchdowns by Edward ___").unwrap();
        assert_eq!(p.mentions().len(), 1);
        assert_eq!(p.mentions()[0].kind, MentionKind::NamedEntity);
        assert_eq!(p.mentions()[0].text(p.template()), "Edward");

        let p = Predicate::new("___ from the 1st quarter").unwrap();
        assert_eq!(p.mentions().len(), 1);
        assert_eq!(p.mentions()[0].kind, MentionKind::Ordinal);

        let p = Predicate::new("___ scored more than 30 points in 1944").unwrap();
        let kinds: Vec<MentionKind> = p.mentions().iter().map(|m| m.kind).collect();
        assert_eq!(kinds, vec![MentionKind::Number, MentionKind::Date]);
    }

    #[test]
    fn full_dates_win_over_bare_years() {
        let ms = scan_mentions("born on 6 June 1944 in Paris");
        assert_eq!(ms.len(), 2);
        assert_eq!(ms[0].kind, MentionKind::Date);
        assert_eq!(ms[1].kind, MentionKind::NamedEntity);
    }

    #[test]
    fn ordinal_not_double_counted_as_number() {
        let ms = scan_mentions("the 2nd quarter");
        assert_eq!(ms.len(), 1);
        assert_eq!(ms[0].kind, MentionKind::Ordinal);
    }

    #[test]
    fn blank_stripping_and_instantiation() {
        let p = Predicate::new("___ from the 1st quarter").unwrap();
        assert_eq!(p.text_without_blank(), "from the 1st quarter");
        assert_eq!(p.instantiate("ABC"), "ABC from the 1st quarter");

        let p = Predicate::new("yard lines of ___").unwrap();
        assert_eq!(p.instantiate("FGH"), "yard lines of FGH");
    }

    #[test]
    fn word_substitution_respects_boundaries() {
        assert_eq!(substitute_word("Edward threw to Edwardo", "Edward", "Tom"), "Tom threw to Edwardo");
        assert_eq!(substitute_word("the 1st of the 1st", "1st", "2nd"), "the 2nd of the 2nd");
    }

    #[test]
    fn mention_replacement_produces_valid_predicate() {
        let p = Predicate::new("touchdowns by Edward ___").unwrap();
        let m = p.mentions()[0].clone();
        let q = p.with_mention_replaced(&m, "Tom").unwrap();
        assert_eq!(q.template(), "touchdowns by Tom ___");
        assert_eq!(q.mentions().len(), 1);
    }
}
