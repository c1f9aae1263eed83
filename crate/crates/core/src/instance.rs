//! Emitted QA instances and their JSONL wire format.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};
use thiserror::Error;

use crate::facts::{Chain, Fact, FactRole, FactStore};
use crate::predicate::Predicate;
use crate::value::{BaseType, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("answers must be non-empty")]
    EmptyAnswers,
    #[error("cardinality {0} is outside 1..=4")]
    BadCardinality(u8),
    #[error("cannot decode value {0:?}")]
    BadValue(String),
}

/// One emitted reading-comprehension instance. Field names are fixed;
/// unknown fields survive a read-write cycle via `extra`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAInstance {
    pub id: String,
    pub question: String,
    pub context: String,
    pub answers: Vec<String>,
    /// Canonical program text (`parse_program` reads it back).
    pub program: String,
    pub pattern: String,
    pub num_facts: usize,
    pub cardinality: u8,
    #[serde(default)]
    pub meta: Map<String, Json>,
    #[serde(flatten)]
    pub extra: Map<String, Json>,
}

impl QAInstance {
    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.answers.is_empty() {
            return Err(InstanceError::EmptyAnswers);
        }
        if !(1..=4).contains(&self.cardinality) {
            return Err(InstanceError::BadCardinality(self.cardinality));
        }
        Ok(())
    }
}

/// Typed JSON form of a scalar value for the facts sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueJson {
    pub t: BaseType,
    pub v: String,
}

impl ValueJson {
    pub fn from_value(v: &Value) -> Self {
        let t = v.base_type().expect("fact values are scalars");
        ValueJson { t, v: v.to_display_string() }
    }

    pub fn to_value(&self) -> Result<Value, InstanceError> {
        Value::parse_scalar(&self.v, self.t).map_err(|_| InstanceError::BadValue(self.v.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactJson {
    pub predicate: String,
    pub subject: ValueJson,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub object: Option<ValueJson>,
    pub chain: Chain,
    pub role: FactRole,
}

/// Sidecar record carrying the structured facts behind an instance, plus the
/// contrastive program, so the verifier can re-check P1-P3 independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactsRecord {
    pub id: String,
    pub facts: Vec<FactJson>,
    pub perturbed_program: String,
}

impl FactsRecord {
    pub fn from_store(id: &str, store: &FactStore, perturbed_program: String) -> Self {
        let facts = store
            .facts()
            .iter()
            .map(|f| FactJson {
                predicate: f.predicate.template().to_string(),
                subject: ValueJson::from_value(&f.subject),
                object: f.object.as_ref().map(ValueJson::from_value),
                chain: f.chain,
                role: f.role,
            })
            .collect();
        FactsRecord { id: id.to_string(), facts, perturbed_program }
    }

    pub fn to_store(&self) -> Result<FactStore, InstanceError> {
        let mut store = FactStore::new();
        for f in &self.facts {
            let predicate = Predicate::new(f.predicate.clone())
                .map_err(|_| InstanceError::BadValue(f.predicate.clone()))?;
            store.insert(Fact {
                predicate,
                subject: f.subject.to_value()?,
                object: f.object.as_ref().map(|o| o.to_value()).transpose()?,
                chain: f.chain,
                role: f.role,
            });
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_preserves_unknown_fields() {
        let line = r#"{"id":"a-1","question":"q?","context":"c.","answers":["2"],"program":"count(#1)","pattern":"select count","num_facts":3,"cardinality":1,"meta":{"seed":7},"custom_field":"kept"}"#;
        let inst: QAInstance = serde_json::from_str(line).unwrap();
        assert_eq!(inst.extra.get("custom_field").unwrap(), "kept");
        let out = serde_json::to_string(&inst).unwrap();
        let again: QAInstance = serde_json::from_str(&out).unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn validation_rules() {
        let mut inst = QAInstance {
            id: "x".into(),
            question: "q".into(),
            context: "c".into(),
            answers: vec!["1".into()],
            program: "p".into(),
            pattern: "select".into(),
            num_facts: 1,
            cardinality: 1,
            meta: Map::new(),
            extra: Map::new(),
        };
        assert!(inst.validate().is_ok());
        inst.answers.clear();
        assert_eq!(inst.validate(), Err(InstanceError::EmptyAnswers));
        inst.answers = vec!["1".into()];
        inst.cardinality = 5;
        assert_eq!(inst.validate(), Err(InstanceError::BadCardinality(5)));
    }

    #[test]
    fn facts_record_round_trips_store() {
        use crate::facts::{Chain, FactRole};
        let mut store = FactStore::new();
        store.insert(Fact {
            predicate: Predicate::new("touchdowns by Edward ___").unwrap(),
            subject: Value::entity("ABC").unwrap(),
            object: None,
            chain: Chain::Gold,
            role: FactRole::SelectEntity,
        });
        store.insert(Fact {
            predicate: Predicate::new("yard line of ___").unwrap(),
            subject: Value::entity("ABC").unwrap(),
            object: Some(Value::number(30.0).unwrap()),
            chain: Chain::Gold,
            role: FactRole::Project,
        });
        let rec = FactsRecord::from_store("id-1", &store, "select(\"x\")".into());
        let json = serde_json::to_string(&rec).unwrap();
        let back: FactsRecord = serde_json::from_str(&json).unwrap();
        let store2 = back.to_store().unwrap();
        assert_eq!(store.facts(), store2.facts());
    }
}
