//! Sentence templates for context rendering and primitive teaching.
//!
//! Templates live in an external file (`templates/default.tmpl` is embedded
//! as the default) so surface forms can be swapped without code changes.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::LazyLock;

use thiserror::Error;

use crate::facts::{Fact, FactRole};
use crate::registry::{Cmp, PrimitiveId};

pub const DEFAULT_TEMPLATES: &str = include_str!("../templates/default.tmpl");

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("cannot read template file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected 'key<TAB>template'")]
    Malformed { line: usize },
    #[error("missing template {key:?}")]
    Missing { key: String },
    #[error("no question template for primitive {0}")]
    NoTemplate(PrimitiveId),
}

#[derive(Debug, Clone)]
pub struct TemplateSet {
    entries: BTreeMap<String, Vec<String>>,
}

impl TemplateSet {
    pub fn from_str(text: &str) -> Result<Self, TemplateError> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, template) =
                raw.split_once('\t').ok_or(TemplateError::Malformed { line: i + 1 })?;
            entries.entry(key.trim().to_string()).or_default().push(template.trim().to_string());
        }
        Ok(TemplateSet { entries })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path)?;
        TemplateSet::from_str(&text)
    }

    pub fn default_set() -> &'static TemplateSet {
        static SET: LazyLock<TemplateSet> = LazyLock::new(|| {
            TemplateSet::from_str(DEFAULT_TEMPLATES).expect("embedded templates are valid")
        });
        &SET
    }

    fn one(&self, key: &str) -> Result<&str, TemplateError> {
        self.entries
            .get(key)
            .and_then(|v| v.first())
            .map(|s| s.as_str())
            .ok_or_else(|| TemplateError::Missing { key: key.to_string() })
    }

    /// Teacher context sentence by kind ("kv", "list_entity", ...).
    pub fn teacher_context(&self, kind: &str) -> Result<&str, TemplateError> {
        self.one(&format!("tctx.{kind}"))
    }

    /// All question template variants for a primitive.
    pub fn questions(&self, primitive: PrimitiveId) -> Result<&[String], TemplateError> {
        self.entries
            .get(&format!("q.{}", primitive.name()))
            .map(|v| v.as_slice())
            .ok_or(TemplateError::NoTemplate(primitive))
    }

    fn fact_template(&self, role: FactRole) -> Result<&str, TemplateError> {
        let key = match role {
            FactRole::SelectEntity => "fact.select_entity",
            FactRole::SelectValue => "fact.select_value",
            FactRole::Filter => "fact.filter",
            FactRole::Project => "fact.project",
            FactRole::Boolean => "fact.boolean",
        };
        self.one(key)
    }

    /// Renders one fact into a context sentence.
    pub fn render_fact(&self, fact: &Fact) -> Result<String, TemplateError> {
        let template = self.fact_template(fact.role)?;
        let rendered = match fact.role {
            FactRole::SelectEntity => template
                .replace("{entity}", &fact.subject.to_display_string())
                .replace("{predicate}", &fact.predicate.text_without_blank()),
            FactRole::SelectValue => template
                .replace("{value}", &fact.subject.to_display_string())
                .replace("{predicate}", &fact.predicate.text_without_blank()),
            FactRole::Filter => template
                .replace("{entity}", &fact.subject.to_display_string())
                .replace("{predicate}", &fact.predicate.text_without_blank()),
            FactRole::Project => {
                let object = fact.object.as_ref().expect("project facts carry an object");
                template
                    .replace(
                        "{predicate}",
                        &fact.predicate.instantiate(&fact.subject.to_display_string()),
                    )
                    .replace("{value}", &object.to_display_string())
            }
            FactRole::Boolean => {
                let polarity = match fact.object {
                    Some(crate::value::Value::Bool(true)) => "true",
                    _ => "false",
                };
                template
                    .replace(
                        "{predicate}",
                        &fact.predicate.instantiate(&fact.subject.to_display_string()),
                    )
                    .replace("{polarity}", polarity)
            }
        };
        Ok(rendered)
    }
}

/// Surface phrase for a comparator inside questions.
pub fn cmp_phrase(cmp: Cmp) -> &'static str {
    match cmp {
        Cmp::Gt => "larger than",
        Cmp::Lt => "smaller than",
        Cmp::Ge => "at least",
        Cmp::Le => "at most",
        Cmp::Eq => "equal to",
    }
}

/// "1st", "2nd", "3rd", "4th", ...
pub fn ordinal_phrase(k: usize) -> String {
    let suffix = match (k % 10, k % 100) {
        (1, 11) | (2, 12) | (3, 13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{k}{suffix}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::Chain;
    use crate::predicate::Predicate;
    use crate::value::Value;

    #[test]
    fn default_templates_load() {
        let set = TemplateSet::default_set();
        assert!(set.teacher_context("kv").is_ok());
        for p in crate::registry::registered_primitives() {
            assert!(set.questions(p).is_ok(), "missing question template for {}", p.name());
        }
    }

    #[test]
    fn fact_rendering_by_role() {
        let set = TemplateSet::default_set();
        let f = Fact {
            predicate: Predicate::new("touchdowns by Edward ___").unwrap(),
            subject: Value::entity("ABC").unwrap(),
            object: None,
            chain: Chain::Gold,
            role: FactRole::SelectEntity,
        };
        assert_eq!(set.render_fact(&f).unwrap(), "ABC is one of the touchdowns by Edward.");

        let f = Fact {
            predicate: Predicate::new("___ from the 1st quarter").unwrap(),
            subject: Value::entity("ABC").unwrap(),
            object: None,
            chain: Chain::Gold,
            role: FactRole::Filter,
        };
        assert_eq!(set.render_fact(&f).unwrap(), "ABC is from the 1st quarter.");

        let f = Fact {
            predicate: Predicate::new("yard line of ___").unwrap(),
            subject: Value::entity("FGH").unwrap(),
            object: Some(Value::number(30.0).unwrap()),
            chain: Chain::Gold,
            role: FactRole::Project,
        };
        assert_eq!(set.render_fact(&f).unwrap(), "The yard line of FGH is 30.");

        let f = Fact {
            predicate: Predicate::new("___ is american").unwrap(),
            subject: Value::entity("PQR").unwrap(),
            object: Some(Value::Bool(true)),
            chain: Chain::Gold,
            role: FactRole::Boolean,
        };
        assert_eq!(set.render_fact(&f).unwrap(), "It is true that PQR is american.");
    }

    #[test]
    fn ordinal_phrases() {
        assert_eq!(ordinal_phrase(1), "1st");
        assert_eq!(ordinal_phrase(2), "2nd");
        assert_eq!(ordinal_phrase(3), "3rd");
        assert_eq!(ordinal_phrase(4), "4th");
        assert_eq!(ordinal_phrase(11), "11th");
    }
}
