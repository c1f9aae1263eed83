//! Independent verifier for the three anti-shortcut properties.
//!
//! P1: answers to dependent steps can't be ignored — a grounding step's
//! answer must be a proper subset of everything grounded under its predicate
//! alone. P2: steps can't be no-ops — a step's output must differ from its
//! inputs (for filter, be a proper subset of the dependent input). P3: the
//! context supports a different answer to the contrastive question — the
//! perturbed program must produce a different final answer on the same facts.
//!
//! All checks run on the brute-force reference interpreter, never the
//! production path, so they stay an independent oracle.

use thiserror::Error;

use crate::facts::FactStore;
use crate::infer::infer_types;
use crate::instance::{FactsRecord, QAInstance};
use crate::interp::ExecError;
use crate::parser::normalize;
use crate::program::{parse_program, Arg, TypedProgram};
use crate::reference::ref_execute;
use crate::registry::{NoOpRule, PrimitiveId};
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckError {
    #[error("execution failed during checking: {0}")]
    Exec(#[from] ExecError),
    #[error("instance has no perturbation record")]
    MissingPerturbationRecord,
    #[error("cannot reconstruct programs: {0}")]
    BadRecord(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub step: usize,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn violation(&mut self, step: usize, detail: impl Into<String>) {
        self.violations.push(Violation { step, detail: detail.into() });
    }
}

fn as_set(v: &Value) -> Vec<Value> {
    let mut out: Vec<Value> = vec![];
    let mut push = |x: Value| {
        if !out.contains(&x) {
            out.push(x);
        }
    };
    match v {
        Value::List(xs) => xs.iter().cloned().for_each(&mut push),
        Value::Dict(xs) => xs.iter().for_each(|(k, val)| {
            push(Value::List(vec![k.clone(), val.clone()]));
        }),
        scalar => push(scalar.clone()),
    }
    out
}

fn proper_subset(a: &[Value], b: &[Value]) -> bool {
    a.iter().all(|x| b.contains(x)) && b.iter().any(|x| !a.contains(x))
}

/// Atoms grounded under the step's predicate alone, shaped like the step's
/// answer set (entities for filter, pairs for project/boolean).
fn predicate_atoms(program: &TypedProgram, store: &FactStore, step: usize) -> Vec<Value> {
    let call = &program.calls[step - 1];
    let pred = call.predicate.as_ref().expect("grounding step");
    let mut out: Vec<Value> = vec![];
    for f in store.facts() {
        if f.predicate.template() != pred.template() {
            continue;
        }
        let atom = match call.primitive {
            PrimitiveId::Filter => f.subject.clone(),
            _ => Value::List(vec![
                f.subject.clone(),
                f.object.clone().unwrap_or(Value::Bool(true)),
            ]),
        };
        if !out.contains(&atom) {
            out.push(atom);
        }
    }
    out
}

/// The atoms a grounding step actually consumed, given its inputs and answer.
fn consumed_atoms(
    program: &TypedProgram,
    trace: &[Value],
    step: usize,
) -> Result<Vec<Value>, CheckError> {
    let call = &program.calls[step - 1];
    let answer = &trace[step - 1];
    match call.primitive {
        PrimitiveId::Filter => Ok(as_set(answer)),
        PrimitiveId::Project => {
            let input = call
                .args
                .first()
                .and_then(Arg::as_step)
                .map(|k| &trace[k - 1])
                .ok_or_else(|| CheckError::BadRecord("project without input".into()))?;
            let pairs: Vec<Value> = match (input, answer) {
                (_, Value::Dict(pairs)) => pairs
                    .iter()
                    .map(|(k, v)| Value::List(vec![k.clone(), v.clone()]))
                    .collect(),
                (Value::List(keys), Value::List(values)) => keys
                    .iter()
                    .zip(values.iter())
                    .map(|(k, v)| Value::List(vec![k.clone(), v.clone()]))
                    .collect(),
                (scalar, value) => vec![Value::List(vec![scalar.clone(), value.clone()])],
            };
            Ok(pairs)
        }
        PrimitiveId::Boolean => {
            let input = call
                .args
                .first()
                .and_then(Arg::as_step)
                .map(|k| &trace[k - 1])
                .ok_or_else(|| CheckError::BadRecord("boolean without input".into()))?;
            let polarity = answer.clone();
            let entities: Vec<Value> = match input {
                Value::List(xs) => xs.clone(),
                scalar => vec![scalar.clone()],
            };
            Ok(entities
                .into_iter()
                .map(|e| Value::List(vec![e, polarity.clone()]))
                .collect())
        }
        _ => Ok(vec![]),
    }
}

/// P1: for grounding steps with dependencies, the step's answer atoms must be
/// a proper subset of the atoms grounded under that predicate alone.
pub fn check_p1(program: &TypedProgram, store: &FactStore) -> Result<CheckReport, CheckError> {
    let trace = ref_execute(program, store)?;
    let mut report = CheckReport::default();
    for (i, call) in program.calls.iter().enumerate() {
        let step = i + 1;
        if !call.primitive.is_grounding() || call.step_refs().next().is_none() {
            continue;
        }
        let consumed = consumed_atoms(program, &trace.values, step)?;
        let available = predicate_atoms(program, store, step);
        if !proper_subset(&consumed, &available) {
            report.violation(
                step,
                format!(
                    "answer covers the full predicate grounding ({} of {} atoms)",
                    consumed.len(),
                    available.len()
                ),
            );
        }
    }
    Ok(report)
}

/// P2: no dependent step is a no-op. Filters must be proper subsets of their
/// dependent input; other steps must differ from every input (primitives that
/// return one of their inputs by definition are exempt).
pub fn check_p2(program: &TypedProgram, store: &FactStore) -> Result<CheckReport, CheckError> {
    let trace = ref_execute(program, store)?;
    let mut report = CheckReport::default();
    for (i, call) in program.calls.iter().enumerate() {
        let step = i + 1;
        let deps: Vec<usize> = call.step_refs().collect();
        if deps.is_empty() {
            continue;
        }
        match call.primitive.signature().no_op {
            NoOpRule::Exempt => {}
            NoOpRule::ProperSubset => {
                let output = as_set(&trace.values[i]);
                let input = as_set(&trace.values[deps[0] - 1]);
                if !proper_subset(&output, &input) {
                    report.violation(step, "filter output is not a proper subset of its input");
                }
            }
            NoOpRule::Standard => {
                for &d in &deps {
                    if trace.values[i] == trace.values[d - 1] {
                        report.violation(step, format!("output equals input #{d}"));
                    }
                }
            }
        }
    }
    Ok(report)
}

/// P3: the perturbed (contrastive) program yields a different final answer on
/// the same store.
pub fn check_p3(
    program: &TypedProgram,
    perturbed: &TypedProgram,
    store: &FactStore,
) -> Result<CheckReport, CheckError> {
    let gold = ref_execute(program, store)?;
    let mut report = CheckReport::default();
    let same_predicates = program
        .calls
        .iter()
        .zip(perturbed.calls.iter())
        .all(|(a, b)| a.predicate == b.predicate);
    if same_predicates {
        report.violation(program.len(), "perturbed program equals the original");
        return Ok(report);
    }
    match ref_execute(perturbed, store) {
        Ok(dis) => {
            if dis.final_value() == gold.final_value() {
                report.violation(
                    program.len(),
                    "perturbed program produces the gold answer",
                );
            }
        }
        Err(e) => {
            report.violation(program.len(), format!("perturbed program does not execute: {e}"));
        }
    }
    Ok(report)
}

/// Gate used at emission time: P1, P2, P3, plus agreement of the reference
/// execution with the generation-time chain values.
pub fn check_all(
    program: &TypedProgram,
    perturbed: &TypedProgram,
    store: &FactStore,
    expected_gold: &[Value],
    expected_distractor: &[Value],
) -> Result<CheckReport, CheckError> {
    let mut report = CheckReport::default();
    let gold = ref_execute(program, store)?;
    if gold.values != expected_gold {
        report.violation(program.len(), "re-execution disagrees with generated gold chain");
    }
    let dis = ref_execute(perturbed, store)?;
    if dis.values != expected_distractor {
        report.violation(program.len(), "re-execution disagrees with generated distractor chain");
    }
    report.violations.extend(check_p1(program, store)?.violations);
    report.violations.extend(check_p2(program, store)?.violations);
    report.violations.extend(check_p3(program, perturbed, store)?.violations);
    Ok(report)
}

/// Outcome of verifying one serialized instance against its facts sidecar.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub p1: bool,
    pub p2: bool,
    pub p3: bool,
    /// Reference execution reproduces the stored answers.
    pub answers_match: bool,
    pub detail: Vec<Violation>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.p1 && self.p2 && self.p3 && self.answers_match
    }
}

fn typed_from_text(text: &str, question: &str) -> Result<TypedProgram, CheckError> {
    let parsed = parse_program(text).map_err(|e| CheckError::BadRecord(e.to_string()))?;
    let normalized = normalize(parsed).map_err(|e| CheckError::BadRecord(e.to_string()))?;
    infer_types(&normalized, question).map_err(|e| CheckError::BadRecord(e.to_string()))
}

/// Verifies a serialized instance: reconstructs the store and both programs,
/// re-executes on the reference path, and checks P1, P2, P3 and answer
/// agreement.
pub fn verify_instance(
    instance: &QAInstance,
    record: &FactsRecord,
) -> Result<VerifyOutcome, CheckError> {
    if record.perturbed_program.trim().is_empty() {
        return Err(CheckError::MissingPerturbationRecord);
    }
    let store = record.to_store().map_err(|e| CheckError::BadRecord(e.to_string()))?;
    let program = typed_from_text(&instance.program, &instance.question)?;
    let perturbed = typed_from_text(&record.perturbed_program, &instance.question)?;

    let p1 = check_p1(&program, &store)?;
    let p2 = check_p2(&program, &store)?;
    let p3 = check_p3(&program, &perturbed, &store)?;
    let trace = ref_execute(&program, &store)?;
    let answers_match = trace.final_value().answer_parts() == instance.answers;

    let mut detail = vec![];
    detail.extend(p1.violations.clone());
    detail.extend(p2.violations.clone());
    detail.extend(p3.violations.clone());
    if !answers_match {
        detail.push(Violation { step: program.len(), detail: "stored answers do not match re-execution".into() });
    }
    Ok(VerifyOutcome {
        p1: p1.passed(),
        p2: p2.passed(),
        p3: p3.passed(),
        answers_match,
        detail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::{Chain, Fact, FactRole};
    use crate::predicate::Predicate;
    use crate::program::PrimitiveCall;
    use crate::value::{BaseType, ValueType};

    fn entity_fact(template: &str, subject: &str, chain: Chain, role: FactRole) -> Fact {
        Fact {
            predicate: Predicate::new(template).unwrap(),
            subject: Value::entity(subject).unwrap(),
            object: None,
            chain,
            role,
        }
    }

    fn worked_example_store() -> FactStore {
        let mut store = FactStore::new();
        for s in ["ABC", "DXE", "FGH", "PQR"] {
            store.insert(entity_fact("touchdowns by Edward ___", s, Chain::Gold, FactRole::SelectEntity));
        }
        for s in ["ABC", "DXE", "MNF", "IOU"] {
            store.insert(entity_fact("___ from the 1st quarter", s, Chain::Gold, FactRole::Filter));
        }
        for s in ["MNF", "IOU", "TUV"] {
            store.insert(entity_fact("touchdowns by Tom ___", s, Chain::Distractor, FactRole::SelectEntity));
        }
        for s in ["TUV", "PQR"] {
            store.insert(entity_fact("___ from the 2nd quarter", s, Chain::Distractor, FactRole::Filter));
        }
        store
    }

    fn program(select_pred: &str, filter_pred: &str) -> TypedProgram {
        TypedProgram::new(
            vec![
                PrimitiveCall {
                    primitive: PrimitiveId::Select,
                    predicate: Some(Predicate::new(select_pred).unwrap()),
                    args: vec![],
                    step_index: 1,
                },
                PrimitiveCall {
                    primitive: PrimitiveId::Filter,
                    predicate: Some(Predicate::new(filter_pred).unwrap()),
                    args: vec![Arg::Step(1)],
                    step_index: 2,
                },
                PrimitiveCall {
                    primitive: PrimitiveId::Count,
                    predicate: None,
                    args: vec![Arg::Step(2)],
                    step_index: 3,
                },
            ],
            vec![
                ValueType::list(BaseType::NamedEntity),
                ValueType::list(BaseType::NamedEntity),
                ValueType::scalar(BaseType::Number),
            ],
        )
    }

    #[test]
    fn worked_example_passes_all_checks() {
        let store = worked_example_store();
        let gold = program("touchdowns by Edward ___", "___ from the 1st quarter");
        let perturbed = program("touchdowns by Tom ___", "___ from the 2nd quarter");
        assert!(check_p1(&gold, &store).unwrap().passed());
        assert!(check_p2(&gold, &store).unwrap().passed());
        assert!(check_p3(&gold, &perturbed, &store).unwrap().passed());
    }

    #[test]
    fn p1_fails_when_predicate_set_equals_answer() {
        // Filter facts exist only for the answer entities: no reserve.
        let mut store = FactStore::new();
        for s in ["ABC", "DXE", "FGH"] {
            store.insert(entity_fact("touchdowns by Edward ___", s, Chain::Gold, FactRole::SelectEntity));
        }
        for s in ["ABC", "DXE"] {
            store.insert(entity_fact("___ from the 1st quarter", s, Chain::Gold, FactRole::Filter));
        }
        let gold = program("touchdowns by Edward ___", "___ from the 1st quarter");
        let report = check_p1(&gold, &store).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].step, 2);
        // P2 still holds: {ABC, DXE} is a proper subset of the select answer.
        assert!(check_p2(&gold, &store).unwrap().passed());
    }

    #[test]
    fn p2_fails_when_filter_keeps_everything() {
        let mut store = FactStore::new();
        for s in ["ABC", "DXE"] {
            store.insert(entity_fact("touchdowns by Edward ___", s, Chain::Gold, FactRole::SelectEntity));
        }
        for s in ["ABC", "DXE", "MNF"] {
            store.insert(entity_fact("___ from the 1st quarter", s, Chain::Gold, FactRole::Filter));
        }
        let gold = program("touchdowns by Edward ___", "___ from the 1st quarter");
        // P1 holds (MNF is a reserve), but the filter is a no-op.
        assert!(check_p1(&gold, &store).unwrap().passed());
        let report = check_p2(&gold, &store).unwrap();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].step, 2);
    }

    #[test]
    fn p3_fails_for_identical_perturbation() {
        let store = worked_example_store();
        let gold = program("touchdowns by Edward ___", "___ from the 1st quarter");
        let report = check_p3(&gold, &gold, &store).unwrap();
        assert!(!report.passed());
    }
}
