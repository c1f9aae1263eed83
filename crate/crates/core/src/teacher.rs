//! Template-based single-skill QA instances, one generator per registered
//! primitive. Every emitted answer is the interpreter's output on the
//! structured inputs behind the rendered context, and every context carries
//! at least one non-answer element so copying everything fails.

use rand::prelude::IndexedRandom;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map};
use thiserror::Error;

use crate::facts::{Chain, Fact, FactRole, FactStore};
use crate::instance::QAInstance;
use crate::interp::eval_primitive;
use crate::predicate::Predicate;
use crate::program::{render_calls, Arg, Literal, PrimitiveCall};
use crate::registry::{Cmp, PrimitiveId};
use crate::rng::rng_for;
use crate::templates::{cmp_phrase, ordinal_phrase, TemplateSet};
use crate::value::{BaseType, Date, Num, Value, ValueType};

#[derive(Debug, Error)]
pub enum TeacherError {
    #[error("no question template for primitive {0}")]
    NoTemplate(PrimitiveId),
    #[error("template error: {0}")]
    Template(String),
    #[error("could not build a valid instance for {primitive} after {tries} tries")]
    Exhausted { primitive: PrimitiveId, tries: u32 },
}

/// One constructed teaching case before rendering.
struct Case {
    sentences: Vec<String>,
    question: String,
    call: PrimitiveCall,
    out_ty: ValueType,
    trace: Vec<Value>,
    store: FactStore,
}

/// The structured inputs behind an emitted teaching instance, retained so
/// independent oracles can recompute the answer.
pub struct TeacherCase {
    pub instance: QAInstance,
    pub call: PrimitiveCall,
    pub out_ty: ValueType,
    pub trace: Vec<Value>,
    pub store: FactStore,
}

fn fresh_entities(rng: &mut ChaCha8Rng, n: usize) -> Vec<Value> {
    let mut out: Vec<Value> = vec![];
    while out.len() < n {
        let name: String = (0..3).map(|_| rng.random_range(b'A'..=b'Z') as char).collect();
        let e = Value::entity(name).expect("three uppercase letters");
        if !out.contains(&e) {
            out.push(e);
        }
    }
    out
}

fn money(rng: &mut ChaCha8Rng) -> Value {
    Value::Number(Num::new(rng.random_range(0..=100_000_000i64) as f64 / 100.0).unwrap())
}

fn small_number(rng: &mut ChaCha8Rng, max: i64) -> Value {
    Value::Number(Num::new(rng.random_range(0..=max) as f64).unwrap())
}

fn distinct_numbers(rng: &mut ChaCha8Rng, n: usize) -> Vec<Value> {
    let mut out: Vec<Value> = vec![];
    while out.len() < n {
        let v = money(rng);
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn year_date(rng: &mut ChaCha8Rng) -> Value {
    Value::Date(Date::year_only(rng.random_range(1100..=2022)).unwrap())
}

/// Numbers in contexts may carry comma thousand-separators; answers never do.
fn surface_number(v: &Value, rng: &mut ChaCha8Rng) -> String {
    let plain = v.to_display_string();
    if !rng.random_bool(0.5) {
        return plain;
    }
    let (int_part, frac_part) = match plain.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (plain.as_str(), None),
    };
    if int_part.len() <= 3 {
        return plain;
    }
    let mut grouped = String::new();
    let bytes = int_part.as_bytes();
    for (i, b) in bytes.iter().enumerate() {
        if i > 0 && (bytes.len() - i) % 3 == 0 {
            grouped.push(',');
        }
        grouped.push(*b as char);
    }
    match frac_part {
        Some(f) => format!("{grouped}.{f}"),
        None => grouped,
    }
}

fn surface(v: &Value, rng: &mut ChaCha8Rng) -> String {
    match v {
        Value::Number(_) => surface_number(v, rng),
        other => other.to_display_string(),
    }
}

fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in slots {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

struct Ctx<'a> {
    templates: &'a TemplateSet,
}

impl<'a> Ctx<'a> {
    fn s(&self, kind: &str, slots: &[(&str, &str)]) -> Result<String, TeacherError> {
        let t = self
            .templates
            .teacher_context(kind)
            .map_err(|e| TeacherError::Template(e.to_string()))?;
        Ok(fill(t, slots))
    }

    fn question(
        &self,
        primitive: PrimitiveId,
        rng: &mut ChaCha8Rng,
        slots: &[(&str, &str)],
    ) -> Result<String, TeacherError> {
        let variants =
            self.templates.questions(primitive).map_err(|_| TeacherError::NoTemplate(primitive))?;
        let t = variants.choose(rng).expect("non-empty variants");
        Ok(fill(t, slots))
    }
}

fn step(primitive: PrimitiveId, args: Vec<Arg>, predicate: Option<Predicate>, idx: usize) -> PrimitiveCall {
    PrimitiveCall { primitive, predicate, args, step_index: idx }
}

fn num_lit(v: f64) -> Arg {
    Arg::Lit(Literal::Number(Num::new(v).unwrap()))
}

/// Builds one random case for the primitive. May produce an empty or
/// oversized answer; the caller resamples.
#[allow(clippy::too_many_lines)]
fn build_case(
    primitive: PrimitiveId,
    ctx: &Ctx<'_>,
    rng: &mut ChaCha8Rng,
) -> Result<Case, TeacherError> {
    use PrimitiveId::*;
    let mut sentences: Vec<String> = vec![];
    let case = match primitive {
        Select => {
            let n = rng.random_range(1..=4);
            let pool = fresh_entities(rng, n + 1);
            let (listed, unrelated) = pool.split_at(n);
            let pred = Predicate::new("listed entities ___").unwrap();
            let mut store = FactStore::new();
            for e in listed {
                sentences.push(ctx.s("member", &[("value", &e.to_display_string())])?);
                store.insert(Fact {
                    predicate: pred.clone(),
                    subject: e.clone(),
                    object: None,
                    chain: Chain::Gold,
                    role: FactRole::SelectEntity,
                });
            }
            sentences
                .push(ctx.s("distractor_entity", &[("value", &unrelated[0].to_display_string())])?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(Select, vec![], Some(pred), 1),
                out_ty: ValueType::list(BaseType::NamedEntity),
                trace: vec![],
                store,
            }
        }
        Project => {
            let n = rng.random_range(2..=4);
            let keys = fresh_entities(rng, n);
            let pred = Predicate::new("value of ___").unwrap();
            let mut store = FactStore::new();
            for k in &keys {
                let v = money(rng);
                sentences.push(ctx.s(
                    "kv",
                    &[("key", &k.to_display_string()), ("value", &surface(&v, rng))],
                )?);
                store.insert(Fact {
                    predicate: pred.clone(),
                    subject: k.clone(),
                    object: Some(v),
                    chain: Chain::Gold,
                    role: FactRole::Project,
                });
            }
            let target = keys.choose(rng).unwrap().clone();
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[("key", &target.to_display_string())])?,
                call: step(Project, vec![Arg::Step(1)], Some(pred), 2),
                out_ty: ValueType::scalar(BaseType::Number),
                trace: vec![target],
                store,
            }
        }
        Filter => {
            let n = rng.random_range(3..=5);
            let pool = fresh_entities(rng, n + 1);
            let (listed, outsider) = pool.split_at(n);
            let k = rng.random_range(1..n);
            let pred = Predicate::new("___ active").unwrap();
            let mut store = FactStore::new();
            for e in listed {
                sentences.push(ctx.s("member", &[("value", &e.to_display_string())])?);
            }
            for e in listed.iter().take(k).chain(outsider.iter()) {
                sentences.push(ctx.s("active", &[("value", &e.to_display_string())])?);
                store.insert(Fact {
                    predicate: pred.clone(),
                    subject: e.clone(),
                    object: None,
                    chain: Chain::Gold,
                    role: FactRole::Filter,
                });
            }
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(Filter, vec![Arg::Step(1)], Some(pred), 2),
                out_ty: ValueType::list(BaseType::NamedEntity),
                trace: vec![Value::List(listed.to_vec())],
                store,
            }
        }
        Boolean => {
            let pool = fresh_entities(rng, 3);
            let pred = Predicate::new("___ is active").unwrap();
            let mut store = FactStore::new();
            let target_polarity = rng.random_bool(0.5);
            for (i, e) in pool.iter().enumerate() {
                // The non-target entities include one opposite polarity.
                let polarity = if i == 0 { target_polarity } else { i % 2 == 0 };
                let word = if polarity { "true" } else { "false" };
                sentences.push(fill(
                    "It is {polarity} that {entity} is active.",
                    &[("polarity", word), ("entity", &e.to_display_string())],
                ));
                store.insert(Fact {
                    predicate: pred.clone(),
                    subject: e.clone(),
                    object: Some(Value::Bool(polarity)),
                    chain: Chain::Gold,
                    role: FactRole::Boolean,
                });
            }
            Case {
                sentences,
                question: ctx
                    .question(primitive, rng, &[("key", &pool[0].to_display_string())])?,
                call: step(Boolean, vec![Arg::Step(1)], Some(pred), 2),
                out_ty: ValueType::scalar(BaseType::Boolean),
                trace: vec![pool[0].clone()],
                store,
            }
        }
        Count => {
            let n = rng.random_range(0..=6);
            let pool = fresh_entities(rng, n + 1);
            let (listed, unrelated) = pool.split_at(n);
            for e in listed {
                sentences.push(ctx.s("member", &[("value", &e.to_display_string())])?);
            }
            sentences
                .push(ctx.s("distractor_entity", &[("value", &unrelated[0].to_display_string())])?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(Count, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::scalar(BaseType::Number),
                trace: vec![Value::List(listed.to_vec())],
                store: FactStore::new(),
            }
        }
        CountUnique => {
            let n = rng.random_range(2..=6);
            let pool_n = rng.random_range(1..=3.min(n));
            let pool: Vec<Value> = distinct_numbers(rng, pool_n);
            let values: Vec<Value> =
                (0..n).map(|_| pool.choose(rng).unwrap().clone()).collect();
            for (i, v) in values.iter().enumerate() {
                sentences.push(ctx.s(
                    "value_indexed",
                    &[("index", &(i + 1).to_string()), ("value", &surface(v, rng))],
                )?);
            }
            let d = money(rng);
            sentences.push(ctx.s("distractor_number", &[("value", &surface(&d, rng))])?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(CountUnique, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::scalar(BaseType::Number),
                trace: vec![Value::List(values)],
                store: FactStore::new(),
            }
        }
        GroupedCount => {
            let n = rng.random_range(2..=6);
            let keys = fresh_entities(rng, n);
            let pool: Vec<Value> = (0..rng.random_range(1..=3))
                .map(|_| small_number(rng, 60))
                .collect();
            let pairs: Vec<(Value, Value)> =
                keys.into_iter().map(|k| (k, pool.choose(rng).unwrap().clone())).collect();
            for (k, v) in &pairs {
                sentences.push(ctx.s(
                    "kv",
                    &[("key", &k.to_display_string()), ("value", &surface(v, rng))],
                )?);
            }
            let d = fresh_entities(rng, 1).pop().unwrap();
            sentences.push(ctx.s("distractor_entity", &[("value", &d.to_display_string())])?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(GroupedCount, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::dictionary(BaseType::Number, BaseType::Number),
                trace: vec![Value::Dict(pairs)],
                store: FactStore::new(),
            }
        }
        GroupedSum | GroupedMean => {
            let n = rng.random_range(2..=5);
            let keys = fresh_entities(rng, n);
            let group_n = rng.random_range(1..=3.min(n));
            let group_pool = fresh_entities(rng, group_n);
            let values: Vec<(Value, Value)> =
                keys.iter().map(|k| (k.clone(), small_number(rng, 500))).collect();
            let groups: Vec<(Value, Value)> = keys
                .iter()
                .map(|k| (k.clone(), group_pool.choose(rng).unwrap().clone()))
                .collect();
            for (k, v) in &values {
                sentences.push(ctx.s(
                    "kv",
                    &[("key", &k.to_display_string()), ("value", &surface(v, rng))],
                )?);
            }
            for (k, g) in &groups {
                sentences.push(ctx.s(
                    "kv_group",
                    &[("key", &k.to_display_string()), ("value", &g.to_display_string())],
                )?);
            }
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(primitive, vec![Arg::Step(1), Arg::Step(2)], None, 3),
                out_ty: ValueType::dictionary(BaseType::NamedEntity, BaseType::Number),
                trace: vec![Value::Dict(values), Value::Dict(groups)],
                store: FactStore::new(),
            }
        }
        ListSum | ListAverage | ListMax | ListMin => {
            let n = rng.random_range(1..=5);
            let values = distinct_numbers(rng, n);
            for v in &values {
                sentences.push(ctx.s("list_number", &[("value", &surface(v, rng))])?);
            }
            let d = money(rng);
            sentences.push(ctx.s("distractor_number", &[("value", &surface(&d, rng))])?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(primitive, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::scalar(BaseType::Number),
                trace: vec![Value::List(values)],
                store: FactStore::new(),
            }
        }
        ArithmeticSum | ArithmeticDifference | ArithmeticMultiplication | ArithmeticDivision => {
            let a = money(rng);
            let b = if primitive == ArithmeticDivision {
                loop {
                    let v = money(rng);
                    if v != Value::Number(Num::new(0.0).unwrap()) {
                        break v;
                    }
                }
            } else {
                money(rng)
            };
            sentences.push(ctx.s("first_value", &[("value", &surface(&a, rng))])?);
            sentences.push(ctx.s("second_value", &[("value", &surface(&b, rng))])?);
            let d = money(rng);
            sentences.push(ctx.s("distractor_number", &[("value", &surface(&d, rng))])?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(primitive, vec![Arg::Step(1), Arg::Step(2)], None, 3),
                out_ty: ValueType::scalar(BaseType::Number),
                trace: vec![a, b],
                store: FactStore::new(),
            }
        }
        FilterComparedTo | FilterGivenValue | FilterLarger | FilterSmaller | FilterAtLeast
        | FilterAtMost => {
            let n = rng.random_range(2..=5);
            let keys = fresh_entities(rng, n);
            let values = distinct_numbers(rng, n);
            let cmp = match primitive {
                FilterComparedTo => *[Cmp::Gt, Cmp::Lt, Cmp::Ge, Cmp::Le].choose(rng).unwrap(),
                FilterGivenValue => Cmp::Eq,
                FilterLarger => Cmp::Gt,
                FilterSmaller => Cmp::Lt,
                FilterAtLeast => Cmp::Ge,
                FilterAtMost => Cmp::Le,
                _ => unreachable!(),
            };
            // A threshold that keeps some but not all entities.
            let threshold = if cmp == Cmp::Eq {
                values.choose(rng).unwrap().clone()
            } else {
                let mut sorted = values.clone();
                sorted.sort_by(|a, b| crate::value::compare_scalars(a, b).unwrap());
                let cut = rng.random_range(0..n.saturating_sub(1).max(1));
                sorted[cut].clone()
            };
            let pairs: Vec<(Value, Value)> = keys.into_iter().zip(values).collect();
            for (k, v) in &pairs {
                sentences.push(ctx.s(
                    "kv",
                    &[("key", &k.to_display_string()), ("value", &surface(v, rng))],
                )?);
            }
            let threshold_num = match &threshold {
                Value::Number(x) => *x,
                _ => unreachable!(),
            };
            let mut args = vec![Arg::Step(1)];
            if primitive == FilterComparedTo {
                args.push(Arg::Lit(Literal::Cmp(cmp)));
            }
            args.push(Arg::Lit(Literal::Number(threshold_num)));
            let threshold_text = threshold.to_display_string();
            let slots: Vec<(&str, &str)> =
                vec![("cmp", cmp_phrase(cmp)), ("threshold", &threshold_text)];
            Case {
                sentences,
                question: ctx.question(primitive, rng, &slots)?,
                call: step(primitive, args, None, 2),
                out_ty: ValueType::list(BaseType::NamedEntity),
                trace: vec![Value::Dict(pairs)],
                store: FactStore::new(),
            }
        }
        ArgMax | ArgMin => {
            let n = rng.random_range(2..=5);
            let keys = fresh_entities(rng, n);
            let values = distinct_numbers(rng, n);
            let pairs: Vec<(Value, Value)> = keys.into_iter().zip(values).collect();
            for (k, v) in &pairs {
                sentences.push(ctx.s(
                    "kv",
                    &[("key", &k.to_display_string()), ("value", &surface(v, rng))],
                )?);
            }
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(primitive, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::list(BaseType::NamedEntity),
                trace: vec![Value::Dict(pairs)],
                store: FactStore::new(),
            }
        }
        KthHighest | KthLowest => {
            let n = rng.random_range(2..=5);
            let values = distinct_numbers(rng, n);
            let k = rng.random_range(1..=n);
            for v in &values {
                sentences.push(ctx.s("list_number", &[("value", &surface(v, rng))])?);
            }
            let phrase = ordinal_phrase(k);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[("k", &phrase)])?,
                call: step(primitive, vec![Arg::Step(1), num_lit(k as f64)], None, 2),
                out_ty: ValueType::scalar(BaseType::Number),
                trace: vec![Value::List(values)],
                store: FactStore::new(),
            }
        }
        Union | Intersection | Discard => {
            let pool = fresh_entities(rng, 5);
            let a_n = rng.random_range(1..=3);
            let b_n = rng.random_range(1..=3);
            let mut a: Vec<Value> = pool.clone();
            a.shuffle(rng);
            a.truncate(a_n);
            let mut b: Vec<Value> = pool.clone();
            b.shuffle(rng);
            b.truncate(b_n);
            for e in &a {
                sentences.push(ctx.s("group_a", &[("value", &e.to_display_string())])?);
            }
            for e in &b {
                sentences.push(ctx.s("group_b", &[("value", &e.to_display_string())])?);
            }
            let d = fresh_entities(rng, 1).pop().unwrap();
            sentences.push(ctx.s("distractor_entity", &[("value", &d.to_display_string())])?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(primitive, vec![Arg::Step(1), Arg::Step(2)], None, 3),
                out_ty: ValueType::list(BaseType::NamedEntity),
                trace: vec![Value::List(a), Value::List(b)],
                store: FactStore::new(),
            }
        }
        SortAscending | SortDescending => {
            let n = rng.random_range(2..=4);
            let values = distinct_numbers(rng, n);
            for v in &values {
                sentences.push(ctx.s("list_number", &[("value", &surface(v, rng))])?);
            }
            let d = money(rng);
            sentences.push(ctx.s("distractor_number", &[("value", &surface(&d, rng))])?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(primitive, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::list(BaseType::Number),
                trace: vec![Value::List(values)],
                store: FactStore::new(),
            }
        }
        DateDifferenceInYears | DateDifferenceInMonths | DateDifferenceInDays => {
            let full = rng.random_bool(0.5);
            let mk = |rng: &mut ChaCha8Rng| {
                if full {
                    let y = rng.random_range(1100..=2022);
                    let m = rng.random_range(1..=12u8);
                    let d = rng.random_range(1..=28u8);
                    Value::Date(Date::ymd(y, m, d).unwrap())
                } else {
                    year_date(rng)
                }
            };
            let a = mk(rng);
            let b = mk(rng);
            sentences.push(ctx.s("first_date", &[("value", &a.to_display_string())])?);
            sentences.push(ctx.s("second_date", &[("value", &b.to_display_string())])?);
            let d = mk(rng);
            sentences.push(ctx.s("distractor_date", &[("value", &d.to_display_string())])?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(primitive, vec![Arg::Step(1), Arg::Step(2)], None, 3),
                out_ty: ValueType::scalar(BaseType::Number),
                trace: vec![a, b],
                store: FactStore::new(),
            }
        }
        LogicalAnd | LogicalOr => {
            let a = rng.random_bool(0.5);
            let b = rng.random_bool(0.5);
            sentences.push(ctx.s("first_statement", &[("value", if a { "true" } else { "false" })])?);
            sentences.push(ctx.s("second_statement", &[("value", if b { "true" } else { "false" })])?);
            sentences.push(ctx.s(
                "third_statement",
                &[("value", if rng.random_bool(0.5) { "true" } else { "false" })],
            )?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(primitive, vec![Arg::Step(1), Arg::Step(2)], None, 3),
                out_ty: ValueType::scalar(BaseType::Boolean),
                trace: vec![Value::Bool(a), Value::Bool(b)],
                store: FactStore::new(),
            }
        }
        BooleanNegation => {
            let a = rng.random_bool(0.5);
            sentences.push(ctx.s("statement", &[("value", if a { "true" } else { "false" })])?);
            sentences.push(ctx.s(
                "third_statement",
                &[("value", if rng.random_bool(0.5) { "true" } else { "false" })],
            )?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(primitive, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::scalar(BaseType::Boolean),
                trace: vec![Value::Bool(a)],
                store: FactStore::new(),
            }
        }
        BooleanComparison => {
            let a = money(rng);
            let b = if rng.random_bool(0.3) { a.clone() } else { money(rng) };
            let cmp = *[Cmp::Gt, Cmp::Lt, Cmp::Ge, Cmp::Le, Cmp::Eq].choose(rng).unwrap();
            sentences.push(ctx.s("first_value", &[("value", &surface(&a, rng))])?);
            sentences.push(ctx.s("second_value", &[("value", &surface(&b, rng))])?);
            let d = money(rng);
            sentences.push(ctx.s("distractor_number", &[("value", &surface(&d, rng))])?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[("cmp", cmp_phrase(cmp))])?,
                call: step(
                    primitive,
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
            let n = rng.random_range(0..=3);
            let pool = fresh_entities(rng, n + 1);
            let (listed, unrelated) = pool.split_at(n);
            for e in listed {
                sentences.push(ctx.s("member", &[("value", &e.to_display_string())])?);
            }
            sentences
                .push(ctx.s("distractor_entity", &[("value", &unrelated[0].to_display_string())])?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(Exists, vec![Arg::Step(1)], None, 2),
                out_ty: ValueType::scalar(BaseType::Boolean),
                trace: vec![Value::List(listed.to_vec())],
                store: FactStore::new(),
            }
        }
        TakeKth | TakeLast => {
            let n = rng.random_range(2..=5);
            let entities = fresh_entities(rng, n);
            for (i, e) in entities.iter().enumerate() {
                sentences.push(ctx.s(
                    "indexed",
                    &[("index", &(i + 1).to_string()), ("value", &e.to_display_string())],
                )?);
            }
            let (args, slots) = if primitive == TakeKth {
                let k = rng.random_range(1..=n);
                (vec![Arg::Step(1), num_lit(k as f64)], Some(ordinal_phrase(k)))
            } else {
                (vec![Arg::Step(1)], None)
            };
            let question = match &slots {
                Some(k) => ctx.question(primitive, rng, &[("k", k)])?,
                None => ctx.question(primitive, rng, &[])?,
            };
            Case {
                sentences,
                question,
                call: step(primitive, args, None, 2),
                out_ty: ValueType::scalar(BaseType::NamedEntity),
                trace: vec![Value::List(entities)],
                store: FactStore::new(),
            }
        }
        SelectLarger | SelectSmaller => {
            let values = distinct_numbers(rng, 2);
            sentences.push(ctx.s("first_value", &[("value", &surface(&values[0], rng))])?);
            sentences.push(ctx.s("second_value", &[("value", &surface(&values[1], rng))])?);
            let d = money(rng);
            sentences.push(ctx.s("distractor_number", &[("value", &surface(&d, rng))])?);
            Case {
                sentences,
                question: ctx.question(primitive, rng, &[])?,
                call: step(primitive, vec![Arg::Step(1), Arg::Step(2)], None, 3),
                out_ty: ValueType::scalar(BaseType::Number),
                trace: vec![values[0].clone(), values[1].clone()],
                store: FactStore::new(),
            }
        }
        Copy => unreachable!("copy is not a registered primitive"),
    };
    Ok(case)
}

/// Generates the instance at `index` of the given split stream along with
/// its structured inputs. Instances are independent given the seed, so the
/// streams parallelize trivially.
pub fn teacher_case(
    primitive: PrimitiveId,
    split: &str,
    index: u64,
    root_seed: u64,
    templates: &TemplateSet,
) -> Result<TeacherCase, TeacherError> {
    // Fail early when no question template exists.
    templates.questions(primitive).map_err(|_| TeacherError::NoTemplate(primitive))?;
    let ctx = Ctx { templates };
    let label = format!("teacher/{}/{split}", primitive.name());
    let mut rng = rng_for(root_seed, &label, index);
    const TRIES: u32 = 60;
    for _ in 0..TRIES {
        let mut case = build_case(primitive, &ctx, &mut rng)?;
        let answer = match eval_primitive(&case.call, &case.out_ty, &case.trace, &case.store) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let answers = answer.answer_parts();
        if answers.is_empty() || answers.len() > 4 {
            continue;
        }
        case.sentences.shuffle(&mut rng);
        let num_facts = case.sentences.len();
        let mut meta = Map::new();
        meta.insert("primitive".into(), json!(primitive.name()));
        meta.insert("split".into(), json!(split));
        meta.insert("seed".into(), json!(root_seed));
        let instance = QAInstance {
            id: format!("{}-{split}-{index:06}", primitive.name()),
            question: case.question,
            context: case.sentences.join(" "),
            answers,
            program: render_calls(std::slice::from_ref(&case.call)),
            pattern: primitive.name().to_string(),
            num_facts,
            cardinality: answer.cardinality().clamp(1, 4) as u8,
            meta,
            extra: Map::new(),
        };
        if instance.validate().is_ok() {
            return Ok(TeacherCase {
                instance,
                call: case.call,
                out_ty: case.out_ty,
                trace: case.trace,
                store: case.store,
            });
        }
    }
    Err(TeacherError::Exhausted { primitive, tries: TRIES })
}

/// Generates just the instance at `index` of the given split stream.
pub fn teacher_instance(
    primitive: PrimitiveId,
    split: &str,
    index: u64,
    root_seed: u64,
    templates: &TemplateSet,
) -> Result<QAInstance, TeacherError> {
    teacher_case(primitive, split, index, root_seed, templates).map(|c| c.instance)
}

/// The worked comparative-filter example: two entities with values 871781 and
/// 989,517.24, threshold 948768.92, answer `["RQX"]`.
pub fn comparison_example(templates: &TemplateSet) -> QAInstance {
    let pairs = vec![
        (Value::entity("AFE").unwrap(), Value::number(871_781.0).unwrap()),
        (Value::entity("RQX").unwrap(), Value::number(989_517.24).unwrap()),
    ];
    let call = step(
        PrimitiveId::FilterComparedTo,
        vec![Arg::Step(1), Arg::Lit(Literal::Cmp(Cmp::Gt)), num_lit(948_768.92)],
        None,
        2,
    );
    let out_ty = ValueType::list(BaseType::NamedEntity);
    let trace = vec![Value::Dict(pairs)];
    let answer = eval_primitive(&call, &out_ty, &trace, &FactStore::new())
        .expect("the worked example evaluates");
    let question_template = templates
        .questions(PrimitiveId::FilterComparedTo)
        .expect("template exists")
        .first()
        .expect("non-empty")
        .clone();
    let question =
        fill(&question_template, &[("cmp", cmp_phrase(Cmp::Gt)), ("threshold", "948768.92")]);
    let context = "Entity AFE has value 871781. Entity RQX has value 989,517.24.".to_string();
    let mut meta = Map::new();
    meta.insert("primitive".into(), json!(PrimitiveId::FilterComparedTo.name()));
    QAInstance {
        id: "filter_a_where_b_is_compared_to-example".into(),
        question,
        context,
        answers: answer.answer_parts(),
        program: render_calls(std::slice::from_ref(&call)),
        pattern: PrimitiveId::FilterComparedTo.name().to_string(),
        num_facts: 2,
        cardinality: 1,
        meta,
        extra: Map::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::registered_primitives;

    #[test]
    fn every_primitive_yields_valid_instances() {
        let templates = TemplateSet::default_set();
        for p in registered_primitives() {
            for i in 0..5 {
                let inst = teacher_instance(p, "train", i, 404, templates)
                    .unwrap_or_else(|e| panic!("{}: {e}", p.name()));
                assert!(inst.validate().is_ok());
                assert_eq!(inst.pattern, p.name());
                assert!(!inst.context.is_empty());
                assert!(!inst.question.is_empty());
            }
        }
    }

    #[test]
    fn instances_are_deterministic_per_seed_and_index() {
        let templates = TemplateSet::default_set();
        let a = teacher_instance(PrimitiveId::Count, "train", 3, 7, templates).unwrap();
        let b = teacher_instance(PrimitiveId::Count, "train", 3, 7, templates).unwrap();
        assert_eq!(a, b);
        let c = teacher_instance(PrimitiveId::Count, "dev", 3, 7, templates).unwrap();
        assert_ne!(a.context, c.context);
    }

    #[test]
    fn comparison_example_reproduces_worked_values() {
        let inst = comparison_example(TemplateSet::default_set());
        assert_eq!(inst.question, "Entities that have value larger than 948768.92?");
        assert_eq!(inst.context, "Entity AFE has value 871781. Entity RQX has value 989,517.24.");
        assert_eq!(inst.answers, vec!["RQX".to_string()]);
    }

    #[test]
    fn count_can_be_zero() {
        let templates = TemplateSet::default_set();
        let mut saw_zero = false;
        for i in 0..200 {
            let inst = teacher_instance(PrimitiveId::Count, "train", i, 11, templates).unwrap();
            if inst.answers == vec!["0".to_string()] {
                saw_zero = true;
                break;
            }
        }
        assert!(saw_zero, "no zero-count instance in 200 draws");
    }

    #[test]
    fn answers_never_carry_commas() {
        let templates = TemplateSet::default_set();
        for p in [PrimitiveId::ListSum, PrimitiveId::ArithmeticSum, PrimitiveId::ListMax] {
            for i in 0..20 {
                let inst = teacher_instance(p, "train", i, 99, templates).unwrap();
                for a in &inst.answers {
                    assert!(!a.contains(','), "answer {a:?} has a comma");
                }
            }
        }
    }
}
