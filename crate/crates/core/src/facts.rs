//! Grounded facts: the structured form of the synthetic context.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::predicate::Predicate;
use crate::value::Value;

/// Which reasoning chain grounded a fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chain {
    Gold,
    Distractor,
}

/// How a fact renders into a context sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactRole {
    /// Entity membership in a selected set ("ABC is one of the ...").
    SelectEntity,
    /// A scalar attribute asserted by a select ("The ... is 42.").
    SelectValue,
    /// Entity satisfies a filter predicate ("ABC is ...").
    Filter,
    /// A projected attribute of an entity ("The ... of ABC is 42.").
    Project,
    /// A polarity statement ("It is true/false that ...").
    Boolean,
}

/// One grounded predicate instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fact {
    pub predicate: Predicate,
    pub subject: Value,
    pub object: Option<Value>,
    pub chain: Chain,
    pub role: FactRole,
}

/// The set of grounded facts forming one synthetic context.
///
/// (predicate, subject, object) triples are unique; first-mention order is
/// preserved so downstream lists are deterministic.
#[derive(Debug, Clone, Default)]
pub struct FactStore {
    facts: Vec<Fact>,
    by_template: HashMap<String, Vec<usize>>,
}

impl FactStore {
    pub fn new() -> Self {
        FactStore::default()
    }

    /// Inserts a fact unless an identical triple is already present.
    /// Returns true when the store grew.
    pub fn insert(&mut self, fact: Fact) -> bool {
        let key = fact.predicate.template().to_string();
        if let Some(indices) = self.by_template.get(&key) {
            if indices
                .iter()
                .any(|&i| self.facts[i].subject == fact.subject && self.facts[i].object == fact.object)
            {
                return false;
            }
        }
        let idx = self.facts.len();
        self.facts.push(fact);
        self.by_template.entry(key).or_default().push(idx);
        true
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    /// Facts grounded under the given predicate template, in insertion order.
    pub fn matching<'a>(&'a self, predicate: &Predicate) -> impl Iterator<Item = &'a Fact> + 'a {
        let indices = self
            .by_template
            .get(predicate.template())
            .map(|v| v.as_slice())
            .unwrap_or(&[]);
        indices.iter().map(move |&i| &self.facts[i])
    }

    pub fn from_facts(facts: Vec<Fact>) -> Self {
        let mut store = FactStore::new();
        for f in facts {
            store.insert(f);
        }
        store
    }
}

/// Step-wise answers for the gold and distractor reasoning chains.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChainState {
    pub ans: Vec<Value>,
    pub dis: Vec<Value>,
}

impl ChainState {
    pub fn final_gold(&self) -> Option<&Value> {
        self.ans.last()
    }

    pub fn final_distractor(&self) -> Option<&Value> {
        self.dis.last()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact(template: &str, subject: &str, chain: Chain) -> Fact {
        Fact {
            predicate: Predicate::new(template).unwrap(),
            subject: Value::entity(subject).unwrap(),
            object: None,
            chain,
            role: FactRole::SelectEntity,
        }
    }

    #[test]
    fn duplicate_triples_rejected() {
        let mut store = FactStore::new();
        assert!(store.insert(fact("touchdowns by Edward ___", "ABC", Chain::Gold)));
        assert!(!store.insert(fact("touchdowns by Edward ___", "ABC", Chain::Distractor)));
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn matching_preserves_first_mention_order() {
        let mut store = FactStore::new();
        for name in ["ABC", "DXE", "FGH", "PQR"] {
            store.insert(fact("touchdowns by Edward ___", name, Chain::Gold));
        }
        store.insert(fact("touchdowns by Tom ___", "IJK", Chain::Distractor));
        let p = Predicate::new("touchdowns by Edward ___").unwrap();
        let subjects: Vec<String> =
            store.matching(&p).map(|f| f.subject.to_display_string()).collect();
        assert_eq!(subjects, vec!["ABC", "DXE", "FGH", "PQR"]);
    }
}
