//! Random test-case construction shared by the oracle-equivalence and
//! acceptance suites. Not part of the stable API.

use rand::prelude::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::facts::{Chain, Fact, FactRole, FactStore};
use crate::predicate::Predicate;
use crate::program::{Arg, Literal, PrimitiveCall};
use crate::registry::{Cmp, PrimitiveId};
use crate::value::{BaseType, Date, Num, Value, ValueType};

/// A randomly constructed single-call evaluation case.
pub struct RandomCase {
    pub call: PrimitiveCall,
    pub out_ty: ValueType,
    pub trace: Vec<Value>,
    pub store: FactStore,
}

pub fn random_entity(rng: &mut ChaCha8Rng) -> Value {
    let letters: String = (0..3).map(|_| rng.random_range(b'A'..=b'Z') as char).collect();
    Value::entity(letters).expect("three uppercase letters")
}

pub fn random_distinct_entities(rng: &mut ChaCha8Rng, n: usize) -> Vec<Value> {
    let mut out: Vec<Value> = vec![];
    while out.len() < n {
        let e = random_entity(rng);
        if !out.contains(&e) {
            out.push(e);
        }
    }
    out
}

/// A generation-range number with at most two fractional digits.
pub fn random_number(rng: &mut ChaCha8Rng) -> Value {
    let cents = rng.random_range(0..=100_000_000u64);
    Value::generated_number(cents as f64 / 100.0).expect("in range")
}

pub fn random_small_int(rng: &mut ChaCha8Rng, max: u32) -> Value {
    Value::Number(Num::new(rng.random_range(0..=max) as f64).unwrap())
}

pub fn random_date(rng: &mut ChaCha8Rng) -> Value {
    let year = rng.random_range(1100..=2022);
    if rng.random_bool(0.5) {
        Value::Date(Date::year_only(year).unwrap())
    } else {
        let month = rng.random_range(1..=12u8);
        let day = rng.random_range(1..=28u8);
        Value::Date(Date::ymd(year, month, day).unwrap())
    }
}

fn random_scalar(rng: &mut ChaCha8Rng, base: BaseType) -> Value {
    match base {
        BaseType::Number => random_number(rng),
        BaseType::Date => random_date(rng),
        BaseType::NamedEntity => random_entity(rng),
        BaseType::Boolean => Value::Bool(rng.random_bool(0.5)),
    }
}

fn random_list(rng: &mut ChaCha8Rng, base: BaseType, len: usize) -> Value {
    Value::List((0..len).map(|_| random_scalar(rng, base)).collect())
}

fn random_dict(rng: &mut ChaCha8Rng, value_base: BaseType, len: usize) -> Value {
    let keys = random_distinct_entities(rng, len);
    Value::Dict(keys.into_iter().map(|k| (k, random_scalar(rng, value_base))).collect())
}

fn call(primitive: PrimitiveId, args: Vec<Arg>, predicate: Option<Predicate>, step: usize) -> PrimitiveCall {
    PrimitiveCall { primitive, predicate, args, step_index: step }
}

fn ordered_base(rng: &mut ChaCha8Rng) -> BaseType {
    if rng.random_bool(0.5) {
        BaseType::Number
    } else {
        BaseType::Date
    }
}

fn num_lit(v: f64) -> Arg {
    Arg::Lit(Literal::Number(Num::new(v).unwrap()))
}

/// Builds a random small evaluation case for the primitive. Inputs land in
/// the trace as steps 1..n and the call is the following step.
pub fn random_case(primitive: PrimitiveId, rng: &mut ChaCha8Rng) -> RandomCase {
    use PrimitiveId::*;
    let noise_pred = Predicate::new("unrelated marker ___").unwrap();
    match primitive {
        Select => {
            let pred = Predicate::new(format!("group {} ___", rng.random_range(0..1000))).unwrap();
            let scalar = rng.random_bool(0.3);
            let base =
                *[BaseType::Number, BaseType::Date, BaseType::NamedEntity].choose(rng).unwrap();
            let mut store = FactStore::new();
            let n = if scalar { 1 } else { rng.random_range(1..=5) };
            let subjects = if base == BaseType::NamedEntity {
                random_distinct_entities(rng, n)
            } else {
                (0..n).map(|_| random_scalar(rng, base)).collect()
            };
            let role = if base == BaseType::NamedEntity {
                FactRole::SelectEntity
            } else {
                FactRole::SelectValue
            };
            for s in subjects {
                store.insert(Fact {
                    predicate: pred.clone(),
                    subject: s,
                    object: None,
                    chain: Chain::Gold,
                    role,
                });
            }
            // Noise under a different predicate must not leak in.
            store.insert(Fact {
                predicate: noise_pred,
                subject: random_entity(rng),
                object: None,
                chain: Chain::Distractor,
                role: FactRole::SelectEntity,
            });
            let out_ty = if scalar { ValueType::scalar(base) } else { ValueType::list(base) };
            RandomCase { call: call(Select, vec![], Some(pred), 1), out_ty, trace: vec![], store }
        }
        Project => {
            let pred = Predicate::new(format!("attribute {} of ___", rng.random_range(0..1000))).unwrap();
            let base =
                *[BaseType::Number, BaseType::Date, BaseType::NamedEntity].choose(rng).unwrap();
            let n = rng.random_range(1..=5);
            let keys = random_distinct_entities(rng, n + 1);
            let mut store = FactStore::new();
            for k in &keys {
                store.insert(Fact {
                    predicate: pred.clone(),
                    subject: k.clone(),
                    object: Some(random_scalar(rng, base)),
                    chain: Chain::Gold,
                    role: FactRole::Project,
                });
            }
            let scalar_input = rng.random_bool(0.25);
            let (input, out_ty) = if scalar_input {
                (keys[0].clone(), ValueType::scalar(base))
            } else if rng.random_bool(0.5) {
                (
                    Value::List(keys[..n].to_vec()),
                    ValueType::dictionary(BaseType::NamedEntity, base),
                )
            } else {
                (Value::List(keys[..n].to_vec()), ValueType::list(base))
            };
            RandomCase {
                call: call(Project, vec![Arg::Step(1)], Some(pred), 2),
                out_ty,
                trace: vec![input],
                store,
            }
        }
        Filter => {
            let pred = Predicate::new(format!("___ in bucket {}", rng.random_range(0..1000))).unwrap();
            let pool = random_distinct_entities(rng, 6);
            let mut store = FactStore::new();
            for e in pool.iter().take(rng.random_range(0..=4)) {
                store.insert(Fact {
                    predicate: pred.clone(),
                    subject: e.clone(),
                    object: None,
                    chain: Chain::Gold,
                    role: FactRole::Filter,
                });
            }
            let input = Value::List(pool[1..].to_vec());
            RandomCase {
                call: call(Filter, vec![Arg::Step(1)], Some(pred), 2),
                out_ty: ValueType::list(BaseType::NamedEntity),
                trace: vec![input],
                store,
            }
        }
        Boolean => {
            let pred = Predicate::new(format!("___ has flag {}", rng.random_range(0..1000))).unwrap();
            let pool = random_distinct_entities(rng, 4);
            let mut store = FactStore::new();
            for e in &pool {
                store.insert(Fact {
                    predicate: pred.clone(),
                    subject: e.clone(),
                    object: Some(Value::Bool(rng.random_bool(0.5))),
                    chain: Chain::Gold,
                    role: FactRole::Boolean,
                });
            }
            let input = if rng.random_bool(0.5) {
                pool[0].clone()
            } else {
                Value::List(pool[..rng.random_range(1..=3)].to_vec())
            };
            RandomCase {
                call: call(Boolean, vec![Arg::Step(1)], Some(pred), 2),
                out_ty: ValueType::scalar(BaseType::Boolean),
                trace: vec![input],
                store,
            }
        }
        Count => {
            let len = rng.random_range(0..=6);
            let v = if rng.random_bool(0.5) {
                random_list(rng, BaseType::NamedEntity, len)
            } else {
                random_dict(rng, BaseType::Number, len)
            };
            RandomCase {
                call: call(Count, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::scalar(BaseType::Number),
                trace: vec![v],
                store: FactStore::new(),
            }
        }
        CountUnique => {
            // Small value pool forces duplicates.
            let n = rng.random_range(0..=8);
            let pool: Vec<Value> = (0..3).map(|_| random_small_int(rng, 5)).collect();
            let xs: Vec<Value> = (0..n).map(|_| pool.choose(rng).unwrap().clone()).collect();
            RandomCase {
                call: call(CountUnique, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::scalar(BaseType::Number),
                trace: vec![Value::List(xs)],
                store: FactStore::new(),
            }
        }
        GroupedCount => {
            let n = rng.random_range(1..=6);
            let keys = random_distinct_entities(rng, n);
            let values: Vec<Value> = (0..n).map(|_| random_small_int(rng, 3)).collect();
            let dict = Value::Dict(keys.into_iter().zip(values).collect());
            RandomCase {
                call: call(GroupedCount, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::dictionary(BaseType::Number, BaseType::Number),
                trace: vec![dict],
                store: FactStore::new(),
            }
        }
        GroupedSum | GroupedMean => {
            let n = rng.random_range(1..=6);
            let keys = random_distinct_entities(rng, n);
            let values =
                Value::Dict(keys.iter().map(|k| (k.clone(), random_small_int(rng, 100))).collect());
            let groups =
                Value::Dict(keys.iter().map(|k| (k.clone(), random_small_int(rng, 2))).collect());
            RandomCase {
                call: call(primitive, vec![Arg::Step(1), Arg::Step(2)], None, 3),
                out_ty: ValueType::dictionary(BaseType::Number, BaseType::Number),
                trace: vec![values, groups],
                store: FactStore::new(),
            }
        }
        ListSum | ListAverage => {
            let len = rng.random_range(0..=6);
            let xs = random_list(rng, BaseType::Number, len);
            RandomCase {
                call: call(primitive, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::scalar(BaseType::Number),
                trace: vec![xs],
                store: FactStore::new(),
            }
        }
        ListMax | ListMin => {
            let base = ordered_base(rng);
            let len = rng.random_range(0..=6);
            let xs = random_list(rng, base, len);
            RandomCase {
                call: call(primitive, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::scalar(base),
                trace: vec![xs],
                store: FactStore::new(),
            }
        }
        ArithmeticSum | ArithmeticDifference | ArithmeticMultiplication | ArithmeticDivision => {
            let a = random_number(rng);
            // Zero denominators exercise the error path now and then.
            let b = if primitive == ArithmeticDivision && rng.random_bool(0.1) {
                Value::Number(Num::new(0.0).unwrap())
            } else {
                random_number(rng)
            };
            RandomCase {
                call: call(primitive, vec![Arg::Step(1), Arg::Step(2)], None, 3),
                out_ty: ValueType::scalar(BaseType::Number),
                trace: vec![a, b],
                store: FactStore::new(),
            }
        }
        FilterComparedTo | FilterGivenValue | FilterLarger | FilterSmaller | FilterAtLeast
        | FilterAtMost => {
            let n = rng.random_range(1..=6);
            let keys = random_distinct_entities(rng, n);
            let values: Vec<Value> = (0..n).map(|_| random_small_int(rng, 10)).collect();
            let threshold = random_small_int(rng, 10);
            let dict = Value::Dict(keys.into_iter().zip(values).collect());
            let args = if primitive == FilterComparedTo {
                let cmp = *[Cmp::Gt, Cmp::Lt, Cmp::Ge, Cmp::Le, Cmp::Eq].choose(rng).unwrap();
                vec![Arg::Step(1), Arg::Lit(Literal::Cmp(cmp)), Arg::Lit(Literal::Number(match threshold {
                    Value::Number(n) => n,
                    _ => unreachable!(),
                }))]
            } else {
                vec![Arg::Step(1), Arg::Lit(Literal::Number(match threshold {
                    Value::Number(n) => n,
                    _ => unreachable!(),
                }))]
            };
            RandomCase {
                call: call(primitive, args, None, 2),
                out_ty: ValueType::list(BaseType::NamedEntity),
                trace: vec![dict],
                store: FactStore::new(),
            }
        }
        ArgMax | ArgMin => {
            let n = rng.random_range(1..=6);
            let keys = random_distinct_entities(rng, n);
            // Small range invites ties.
            let values: Vec<Value> = (0..n).map(|_| random_small_int(rng, 3)).collect();
            let dict = Value::Dict(keys.into_iter().zip(values).collect());
            RandomCase {
                call: call(primitive, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::list(BaseType::NamedEntity),
                trace: vec![dict],
                store: FactStore::new(),
            }
        }
        KthHighest | KthLowest | TakeKth => {
            let base = if primitive == TakeKth { BaseType::NamedEntity } else { ordered_base(rng) };
            let n = rng.random_range(1..=6);
            let xs = random_list(rng, base, n);
            let k = rng.random_range(1..=(n + 1)); // occasionally out of range
            RandomCase {
                call: call(primitive, vec![Arg::Step(1), num_lit(k as f64)], None, 2),
                out_ty: ValueType::scalar(base),
                trace: vec![xs],
                store: FactStore::new(),
            }
        }
        Union | Intersection | Discard => {
            let pool = random_distinct_entities(rng, 6);
            let pick = |rng: &mut ChaCha8Rng, pool: &[Value]| -> Vec<Value> {
                let n = rng.random_range(0..=4);
                (0..n).map(|_| pool.choose(rng).unwrap().clone()).collect::<Vec<_>>()
            };
            let a = Value::List(pick(rng, &pool));
            let b = Value::List(pick(rng, &pool));
            RandomCase {
                call: call(primitive, vec![Arg::Step(1), Arg::Step(2)], None, 3),
                out_ty: ValueType::list(BaseType::NamedEntity),
                trace: vec![a, b],
                store: FactStore::new(),
            }
        }
        SortAscending | SortDescending => {
            let base = ordered_base(rng);
            let len = rng.random_range(0..=6);
            let xs = random_list(rng, base, len);
            RandomCase {
                call: call(primitive, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::list(base),
                trace: vec![xs],
                store: FactStore::new(),
            }
        }
        DateDifferenceInYears | DateDifferenceInMonths | DateDifferenceInDays => {
            let a = random_date(rng);
            let b = random_date(rng);
            RandomCase {
                call: call(primitive, vec![Arg::Step(1), Arg::Step(2)], None, 3),
                out_ty: ValueType::scalar(BaseType::Number),
                trace: vec![a, b],
                store: FactStore::new(),
            }
        }
        LogicalAnd | LogicalOr => RandomCase {
            call: call(primitive, vec![Arg::Step(1), Arg::Step(2)], None, 3),
            out_ty: ValueType::scalar(BaseType::Boolean),
            trace: vec![Value::Bool(rng.random_bool(0.5)), Value::Bool(rng.random_bool(0.5))],
            store: FactStore::new(),
        },
        BooleanNegation => RandomCase {
            call: call(primitive, vec![Arg::Step(1)], None, 2),
            out_ty: ValueType::scalar(BaseType::Boolean),
            trace: vec![Value::Bool(rng.random_bool(0.5))],
            store: FactStore::new(),
        },
        BooleanComparison => {
            let base = *[BaseType::Number, BaseType::Date, BaseType::NamedEntity].choose(rng).unwrap();
            let cmp = if base == BaseType::NamedEntity {
                Cmp::Eq
            } else {
                *[Cmp::Gt, Cmp::Lt, Cmp::Ge, Cmp::Le, Cmp::Eq].choose(rng).unwrap()
            };
            // Equal operands half the time so Eq has coverage.
            let a = random_scalar(rng, base);
            let b = if rng.random_bool(0.5) { a.clone() } else { random_scalar(rng, base) };
            RandomCase {
                call: call(
                    BooleanComparison,
                    vec![Arg::Step(1), Arg::Lit(Literal::Cmp(cmp)), Arg::Step(2)],
                    None,
                    3,
                ),
                out_ty: ValueType::scalar(BaseType::Boolean),
                trace: vec![a, b],
                store: FactStore::new(),
            }
        }
        Exists => {
            let len = rng.random_range(0..=3);
            let xs = random_list(rng, BaseType::NamedEntity, len);
            RandomCase {
                call: call(Exists, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::scalar(BaseType::Boolean),
                trace: vec![xs],
                store: FactStore::new(),
            }
        }
        TakeLast => {
            let len = rng.random_range(0..=5);
            let xs = random_list(rng, BaseType::NamedEntity, len);
            RandomCase {
                call: call(TakeLast, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::scalar(BaseType::NamedEntity),
                trace: vec![xs],
                store: FactStore::new(),
            }
        }
        SelectLarger | SelectSmaller => {
            let base = ordered_base(rng);
            RandomCase {
                call: call(primitive, vec![Arg::Step(1), Arg::Step(2)], None, 3),
                out_ty: ValueType::scalar(base),
                trace: vec![random_scalar(rng, base), random_scalar(rng, base)],
                store: FactStore::new(),
            }
        }
        Copy => unreachable!("copy is not a registered primitive"),
    }
}

/// Re-extracts the fact multiset from a rendered context, given the programs
/// whose predicates grounded it. The inverse of context rendering, used as a
/// test oracle: every fact in the store must be recoverable from the text.
pub fn invert_context(
    context: &str,
    programs: &[&crate::program::TypedProgram],
    templates: &crate::templates::TemplateSet,
) -> Option<Vec<(String, String, Option<String>, FactRole)>> {
    use crate::value::Structure;
    let _ = templates; // the default sentence shapes are mirrored below

    // Candidate (predicate, role) pairs from all grounding steps.
    let mut candidates: Vec<(Predicate, FactRole)> = vec![];
    for tp in programs {
        for (call, ty) in tp.calls.iter().zip(tp.types.iter()) {
            if let Some(pred) = &call.predicate {
                let role = match call.primitive {
                    PrimitiveId::Select => {
                        if ty.base == BaseType::NamedEntity && ty.structure == Structure::List {
                            FactRole::SelectEntity
                        } else {
                            FactRole::SelectValue
                        }
                    }
                    PrimitiveId::Filter => FactRole::Filter,
                    PrimitiveId::Project => FactRole::Project,
                    PrimitiveId::Boolean => FactRole::Boolean,
                    _ => continue,
                };
                if !candidates.iter().any(|(p, r)| p == pred && *r == role) {
                    candidates.push((pred.clone(), role));
                }
            }
        }
    }

    let build_regex = |pred: &Predicate, role: FactRole| -> regex::Regex {
        let pattern = match role {
            FactRole::SelectEntity => format!(
                "^(?P<e>[A-Z]{{3}}) is one of the {}\\.$",
                regex::escape(&pred.text_without_blank())
            ),
            FactRole::SelectValue => format!(
                "^The {} is (?P<v>.+)\\.$",
                regex::escape(&pred.text_without_blank())
            ),
            FactRole::Filter => format!(
                "^(?P<e>[A-Z]{{3}}) is {}\\.$",
                regex::escape(&pred.text_without_blank())
            ),
            FactRole::Project => {
                let escaped = regex::escape(pred.template());
                let with_capture = escaped.replace("___", "(?P<e>[A-Z]{3})");
                format!("^The {with_capture} is (?P<v>.+)\\.$")
            }
            FactRole::Boolean => {
                let escaped = regex::escape(pred.template());
                let with_capture = escaped.replace("___", "(?P<e>[A-Z]{3})");
                format!("^It is (?P<p>true|false) that {with_capture}\\.$")
            }
        };
        regex::Regex::new(&pattern).expect("escaped pattern is valid")
    };

    let mut out = vec![];
    for raw in context.split(". ") {
        let sentence = if raw.ends_with('.') { raw.to_string() } else { format!("{raw}.") };
        let mut matched = false;
        for (pred, role) in &candidates {
            let re = build_regex(pred, *role);
            if let Some(caps) = re.captures(&sentence) {
                let (subject, object) = match role {
                    FactRole::SelectEntity | FactRole::Filter => {
                        (caps["e"].to_string(), None)
                    }
                    FactRole::SelectValue => (caps["v"].to_string(), None),
                    FactRole::Project => {
                        (caps["e"].to_string(), Some(caps["v"].to_string()))
                    }
                    FactRole::Boolean => {
                        let polarity = if &caps["p"] == "true" { "yes" } else { "no" };
                        (caps["e"].to_string(), Some(polarity.to_string()))
                    }
                };
                out.push((pred.template().to_string(), subject, object, *role));
                matched = true;
                break;
            }
        }
        if !matched {
            return None;
        }
    }
    Some(out)
}

/// The store-side view matching `invert_context` output.
pub fn store_fact_tuples(store: &FactStore) -> Vec<(String, String, Option<String>, FactRole)> {
    store
        .facts()
        .iter()
        .map(|f| {
            (
                f.predicate.template().to_string(),
                f.subject.to_display_string(),
                f.object.as_ref().map(|o| o.to_display_string()),
                f.role,
            )
        })
        .collect()
}
