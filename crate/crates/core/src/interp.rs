//! Executes typed programs over a fact store, one primitive at a time.

use thiserror::Error;

use crate::facts::FactStore;
use crate::program::{Arg, Literal, PrimitiveCall, TypedProgram};
use crate::registry::{Cmp, PrimitiveId};
use crate::value::{compare_scalars, Date, Num, Structure, Value, ValueType};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("step {step}: no grounded facts for predicate {predicate:?}")]
    MissingGrounding { step: usize, predicate: String },
    #[error("step {step}: {message}")]
    RuntimeTypeMismatch { step: usize, message: String },
    #[error("step {step}: division by zero")]
    DivisionByZero { step: usize },
    #[error("step {step}: aggregation over an empty collection")]
    EmptyAggregation { step: usize },
    #[error("step {step}: position {index} is out of range for {len} elements")]
    IndexOutOfRange { step: usize, index: usize, len: usize },
}

/// Per-step values of one complete execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace {
    pub values: Vec<Value>,
}

impl ExecutionTrace {
    pub fn final_value(&self) -> &Value {
        self.values.last().expect("programs are non-empty")
    }
}

fn mismatch(step: usize, message: impl Into<String>) -> ExecError {
    ExecError::RuntimeTypeMismatch { step, message: message.into() }
}

fn as_list<'a>(v: &'a Value, step: usize) -> Result<&'a [Value], ExecError> {
    match v {
        Value::List(xs) => Ok(xs),
        other => Err(mismatch(step, format!("expected a list, got {}", other.to_display_string()))),
    }
}

fn as_dict<'a>(v: &'a Value, step: usize) -> Result<&'a [(Value, Value)], ExecError> {
    match v {
        Value::Dict(xs) => Ok(xs),
        other => Err(mismatch(step, format!("expected a dictionary, got {}", other.to_display_string()))),
    }
}

fn as_number(v: &Value, step: usize) -> Result<f64, ExecError> {
    match v {
        Value::Number(n) => Ok(n.get()),
        other => Err(mismatch(step, format!("expected a number, got {}", other.to_display_string()))),
    }
}

fn as_date(v: &Value, step: usize) -> Result<Date, ExecError> {
    match v {
        Value::Date(d) => Ok(*d),
        other => Err(mismatch(step, format!("expected a date, got {}", other.to_display_string()))),
    }
}

fn as_bool(v: &Value, step: usize) -> Result<bool, ExecError> {
    match v {
        Value::Bool(b) => Ok(*b),
        other => Err(mismatch(step, format!("expected a boolean, got {}", other.to_display_string()))),
    }
}

fn num_value(v: f64, step: usize) -> Result<Value, ExecError> {
    Num::new(v).map(Value::Number).map_err(|_| mismatch(step, "arithmetic overflow"))
}

fn dedup_in_order(values: impl IntoIterator<Item = Value>) -> Vec<Value> {
    let mut out: Vec<Value> = vec![];
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn ordered_cmp(a: &Value, b: &Value, step: usize) -> Result<std::cmp::Ordering, ExecError> {
    compare_scalars(a, b).ok_or_else(|| {
        mismatch(
            step,
            format!(
                "cannot order {} against {}",
                a.to_display_string(),
                b.to_display_string()
            ),
        )
    })
}

/// Full-year difference, insensitive to argument order.
fn years_between(a: Date, b: Date) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let (ly, lm, ld) = lo.effective_ymd();
    let (hy, hm, hd) = hi.effective_ymd();
    let mut years = (hy - ly) as i64;
    if (hm, hd) < (lm, ld) {
        years -= 1;
    }
    years as f64
}

fn months_between(a: Date, b: Date) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let (ly, lm, ld) = lo.effective_ymd();
    let (hy, hm, hd) = hi.effective_ymd();
    let mut months = (hy - ly) as i64 * 12 + (hm as i64 - lm as i64);
    if hd < ld {
        months -= 1;
    }
    months as f64
}

/// Resolves a literal or already-computed step value for one argument.
fn resolve_args<'a>(
    call: &'a PrimitiveCall,
    trace: &'a [Value],
) -> Result<Vec<ArgValue<'a>>, ExecError> {
    call.args
        .iter()
        .map(|a| match a {
            Arg::Step(k) => trace
                .get(*k - 1)
                .map(ArgValue::Value)
                .ok_or_else(|| mismatch(call.step_index, format!("unresolved reference #{k}"))),
            Arg::Lit(Literal::Number(n)) => Ok(ArgValue::Owned(Value::Number(*n))),
            Arg::Lit(Literal::Date(d)) => Ok(ArgValue::Owned(Value::Date(*d))),
            Arg::Lit(Literal::Cmp(c)) => Ok(ArgValue::Cmp(*c)),
        })
        .collect()
}

enum ArgValue<'a> {
    Value(&'a Value),
    Owned(Value),
    Cmp(Cmp),
}

impl ArgValue<'_> {
    fn value(&self, step: usize) -> Result<&Value, ExecError> {
        match self {
            ArgValue::Value(v) => Ok(v),
            ArgValue::Owned(v) => Ok(v),
            ArgValue::Cmp(_) => Err(mismatch(step, "comparator used as a value")),
        }
    }

    fn cmp(&self, step: usize) -> Result<Cmp, ExecError> {
        match self {
            ArgValue::Cmp(c) => Ok(*c),
            _ => Err(mismatch(step, "expected a comparator")),
        }
    }
}

fn eval_select(call: &PrimitiveCall, out_ty: &ValueType, store: &FactStore) -> Result<Value, ExecError> {
    let step = call.step_index;
    let pred = call.predicate.as_ref().expect("select carries a predicate");
    let subjects: Vec<Value> = store.matching(pred).map(|f| f.subject.clone()).collect();
    match out_ty.structure {
        Structure::Scalar => match subjects.len() {
            0 => Err(ExecError::MissingGrounding { step, predicate: pred.template().to_string() }),
            1 => Ok(subjects.into_iter().next().unwrap()),
            n => Err(mismatch(step, format!("scalar select matched {n} facts"))),
        },
        Structure::List => {
            if subjects.is_empty() {
                return Err(ExecError::MissingGrounding {
                    step,
                    predicate: pred.template().to_string(),
                });
            }
            Ok(Value::List(subjects))
        }
        Structure::Dictionary => Err(mismatch(step, "select cannot produce a dictionary")),
    }
}

fn eval_project(
    call: &PrimitiveCall,
    out_ty: &ValueType,
    input: &Value,
    store: &FactStore,
) -> Result<Value, ExecError> {
    let step = call.step_index;
    let pred = call.predicate.as_ref().expect("project carries a predicate");
    let lookup = |entity: &Value| -> Result<Value, ExecError> {
        store
            .matching(pred)
            .find(|f| &f.subject == entity)
            .and_then(|f| f.object.clone())
            .ok_or_else(|| ExecError::MissingGrounding { step, predicate: pred.template().to_string() })
    };
    match input {
        Value::List(xs) => {
            let mut pairs = vec![];
            for e in xs {
                pairs.push((e.clone(), lookup(e)?));
            }
            match out_ty.structure {
                Structure::Dictionary => Ok(Value::Dict(pairs)),
                Structure::List => Ok(Value::List(pairs.into_iter().map(|(_, v)| v).collect())),
                Structure::Scalar => Err(mismatch(step, "list projection cannot be scalar")),
            }
        }
        scalar => lookup(scalar),
    }
}

fn eval_filter(call: &PrimitiveCall, input: &Value, store: &FactStore) -> Result<Value, ExecError> {
    let step = call.step_index;
    let pred = call.predicate.as_ref().expect("filter carries a predicate");
    let xs = as_list(input, step)?;
    let kept: Vec<Value> = xs
        .iter()
        .filter(|e| store.matching(pred).any(|f| &&f.subject == e))
        .cloned()
        .collect();
    Ok(Value::List(kept))
}

fn eval_boolean(call: &PrimitiveCall, input: &Value, store: &FactStore) -> Result<Value, ExecError> {
    let step = call.step_index;
    let pred = call.predicate.as_ref().expect("boolean carries a predicate");
    let polarity = |entity: &Value| -> Result<bool, ExecError> {
        let fact = store.matching(pred).find(|f| &f.subject == entity).ok_or_else(|| {
            ExecError::MissingGrounding { step, predicate: pred.template().to_string() }
        })?;
        match &fact.object {
            Some(Value::Bool(b)) => Ok(*b),
            _ => Err(mismatch(step, "boolean fact has no polarity")),
        }
    };
    match input {
        Value::List(xs) => {
            if xs.is_empty() {
                return Err(ExecError::EmptyAggregation { step });
            }
            let mut all = true;
            for e in xs {
                all &= polarity(e)?;
            }
            Ok(Value::Bool(all))
        }
        scalar => Ok(Value::Bool(polarity(scalar)?)),
    }
}

/// Evaluates one call given its resolved inputs. Grounding primitives read
/// matching facts from the store; everything else is a pure computation.
pub fn eval_primitive(
    call: &PrimitiveCall,
    out_ty: &ValueType,
    trace: &[Value],
    store: &FactStore,
) -> Result<Value, ExecError> {
    let step = call.step_index;
    let args = resolve_args(call, trace)?;
    let arg = |i: usize| -> Result<&ArgValue<'_>, ExecError> {
        args.get(i).ok_or_else(|| mismatch(step, format!("missing argument {}", i + 1)))
    };

    use PrimitiveId::*;
    match call.primitive {
        Select => eval_select(call, out_ty, store),
        Project => eval_project(call, out_ty, arg(0)?.value(step)?, store),
        Filter => eval_filter(call, arg(0)?.value(step)?, store),
        Boolean => eval_boolean(call, arg(0)?.value(step)?, store),

        Count => {
            let v = arg(0)?.value(step)?;
            let n = match v {
                Value::List(xs) => xs.len(),
                Value::Dict(xs) => xs.len(),
                _ => return Err(mismatch(step, "count expects a collection")),
            };
            num_value(n as f64, step)
        }
        CountUnique => {
            let xs = as_list(arg(0)?.value(step)?, step)?;
            num_value(dedup_in_order(xs.iter().cloned()).len() as f64, step)
        }
        GroupedCount => {
            let pairs = as_dict(arg(0)?.value(step)?, step)?;
            let mut groups: Vec<(Value, usize)> = vec![];
            for (_, v) in pairs {
                match groups.iter_mut().find(|(g, _)| g == v) {
                    Some((_, n)) => *n += 1,
                    None => groups.push((v.clone(), 1)),
                }
            }
            Ok(Value::Dict(
                groups
                    .into_iter()
                    .map(|(g, n)| (g, Value::Number(Num::new(n as f64).expect("count is finite"))))
                    .collect(),
            ))
        }
        GroupedSum | GroupedMean => {
            let values = as_dict(arg(0)?.value(step)?, step)?;
            let groups = as_dict(arg(1)?.value(step)?, step)?;
            let mut acc: Vec<(Value, f64, usize)> = vec![];
            for (k, g) in groups {
                let v = values
                    .iter()
                    .find(|(vk, _)| vk == k)
                    .map(|(_, v)| v)
                    .ok_or_else(|| mismatch(step, format!("no value for key {}", k.to_display_string())))?;
                let x = as_number(v, step)?;
                match acc.iter_mut().find(|(ag, _, _)| ag == g) {
                    Some((_, sum, n)) => {
                        *sum += x;
                        *n += 1;
                    }
                    None => acc.push((g.clone(), x, 1)),
                }
            }
            let mean = call.primitive == GroupedMean;
            let mut out = vec![];
            for (g, sum, n) in acc {
                let v = if mean { sum / n as f64 } else { sum };
                out.push((g, num_value(v, step)?));
            }
            Ok(Value::Dict(out))
        }
        ListSum => {
            let xs = as_list(arg(0)?.value(step)?, step)?;
            let mut sum = 0.0;
            for x in xs {
                sum += as_number(x, step)?;
            }
            num_value(sum, step)
        }
        ListAverage => {
            let xs = as_list(arg(0)?.value(step)?, step)?;
            if xs.is_empty() {
                return Err(ExecError::EmptyAggregation { step });
            }
            let mut sum = 0.0;
            for x in xs {
                sum += as_number(x, step)?;
            }
            num_value(sum / xs.len() as f64, step)
        }
        ListMax | ListMin => {
            let xs = as_list(arg(0)?.value(step)?, step)?;
            let mut best: Option<&Value> = None;
            for x in xs {
                best = Some(match best {
                    None => x,
                    Some(b) => {
                        let ord = ordered_cmp(x, b, step)?;
                        let better =
                            if call.primitive == ListMax { ord.is_gt() } else { ord.is_lt() };
                        if better {
                            x
                        } else {
                            b
                        }
                    }
                });
            }
            best.cloned().ok_or(ExecError::EmptyAggregation { step })
        }
        ArithmeticSum | ArithmeticDifference | ArithmeticMultiplication | ArithmeticDivision => {
            let a = as_number(arg(0)?.value(step)?, step)?;
            let b = as_number(arg(1)?.value(step)?, step)?;
            let v = match call.primitive {
                ArithmeticSum => a + b,
                ArithmeticDifference => a - b,
                ArithmeticMultiplication => a * b,
                ArithmeticDivision => {
                    if b == 0.0 {
                        return Err(ExecError::DivisionByZero { step });
                    }
                    a / b
                }
                _ => unreachable!(),
            };
            num_value(v, step)
        }
        FilterComparedTo | FilterGivenValue | FilterLarger | FilterSmaller | FilterAtLeast
        | FilterAtMost => {
            let pairs = as_dict(arg(0)?.value(step)?, step)?;
            let (cmp, threshold) = match call.primitive {
                FilterComparedTo => (arg(1)?.cmp(step)?, arg(2)?.value(step)?),
                FilterGivenValue => (Cmp::Eq, arg(1)?.value(step)?),
                FilterLarger => (Cmp::Gt, arg(1)?.value(step)?),
                FilterSmaller => (Cmp::Lt, arg(1)?.value(step)?),
                FilterAtLeast => (Cmp::Ge, arg(1)?.value(step)?),
                FilterAtMost => (Cmp::Le, arg(1)?.value(step)?),
                _ => unreachable!(),
            };
            let mut keys = vec![];
            for (k, v) in pairs {
                let keep = if cmp == Cmp::Eq {
                    if compare_scalars(v, threshold).is_none()
                        && v.base_type() != threshold.base_type()
                    {
                        return Err(mismatch(step, "comparing values of different kinds"));
                    }
                    v == threshold
                } else {
                    cmp.holds(ordered_cmp(v, threshold, step)?)
                };
                if keep {
                    keys.push(k.clone());
                }
            }
            Ok(Value::List(keys))
        }
        ArgMax | ArgMin => {
            let pairs = as_dict(arg(0)?.value(step)?, step)?;
            if pairs.is_empty() {
                return Err(ExecError::EmptyAggregation { step });
            }
            let mut best: Option<&Value> = None;
            for (_, v) in pairs {
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let ord = ordered_cmp(v, b, step)?;
                        let better = if call.primitive == ArgMax { ord.is_gt() } else { ord.is_lt() };
                        if better {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            let best = best.unwrap();
            // Ties return every key at the extreme value.
            Ok(Value::List(
                pairs.iter().filter(|(_, v)| v == best).map(|(k, _)| k.clone()).collect(),
            ))
        }
        KthHighest | KthLowest => {
            let xs = as_list(arg(0)?.value(step)?, step)?;
            let k = as_number(arg(1)?.value(step)?, step)? as usize;
            if k < 1 || k > xs.len() {
                return Err(ExecError::IndexOutOfRange { step, index: k, len: xs.len() });
            }
            let mut sorted = xs.to_vec();
            // Validate comparability before sorting.
            for pair in sorted.windows(2) {
                ordered_cmp(&pair[0], &pair[1], step)?;
            }
            sorted.sort_by(|a, b| compare_scalars(a, b).expect("validated comparable"));
            if call.primitive == KthHighest {
                sorted.reverse();
            }
            Ok(sorted[k - 1].clone())
        }
        Union => {
            let a = as_list(arg(0)?.value(step)?, step)?;
            let b = as_list(arg(1)?.value(step)?, step)?;
            Ok(Value::List(dedup_in_order(a.iter().chain(b.iter()).cloned())))
        }
        Intersection => {
            let a = as_list(arg(0)?.value(step)?, step)?;
            let b = as_list(arg(1)?.value(step)?, step)?;
            Ok(Value::List(dedup_in_order(a.iter().filter(|x| b.contains(x)).cloned())))
        }
        Discard => {
            let a = as_list(arg(0)?.value(step)?, step)?;
            let b = as_list(arg(1)?.value(step)?, step)?;
            Ok(Value::List(dedup_in_order(a.iter().filter(|x| !b.contains(x)).cloned())))
        }
        SortAscending | SortDescending => {
            let xs = as_list(arg(0)?.value(step)?, step)?;
            let mut sorted = xs.to_vec();
            for pair in sorted.windows(2) {
                ordered_cmp(&pair[0], &pair[1], step)?;
            }
            sorted.sort_by(|a, b| compare_scalars(a, b).expect("validated comparable"));
            if call.primitive == SortDescending {
                sorted.reverse();
            }
            Ok(Value::List(sorted))
        }
        DateDifferenceInYears | DateDifferenceInMonths | DateDifferenceInDays => {
            let a = as_date(arg(0)?.value(step)?, step)?;
            let b = as_date(arg(1)?.value(step)?, step)?;
            let v = match call.primitive {
                DateDifferenceInYears => years_between(a, b),
                DateDifferenceInMonths => months_between(a, b),
                DateDifferenceInDays => (a.days_from_epoch() - b.days_from_epoch()).abs() as f64,
                _ => unreachable!(),
            };
            num_value(v, step)
        }
        LogicalAnd => {
            let a = as_bool(arg(0)?.value(step)?, step)?;
            let b = as_bool(arg(1)?.value(step)?, step)?;
            Ok(Value::Bool(a && b))
        }
        LogicalOr => {
            let a = as_bool(arg(0)?.value(step)?, step)?;
            let b = as_bool(arg(1)?.value(step)?, step)?;
            Ok(Value::Bool(a || b))
        }
        BooleanNegation => Ok(Value::Bool(!as_bool(arg(0)?.value(step)?, step)?)),
        BooleanComparison => {
            let a = arg(0)?.value(step)?;
            let cmp = arg(1)?.cmp(step)?;
            let b = arg(2)?.value(step)?;
            let holds = if cmp == Cmp::Eq {
                if a.base_type() != b.base_type() {
                    return Err(mismatch(step, "comparing values of different kinds"));
                }
                a == b
            } else {
                cmp.holds(ordered_cmp(a, b, step)?)
            };
            Ok(Value::Bool(holds))
        }
        Exists => {
            let v = arg(0)?.value(step)?;
            let n = match v {
                Value::List(xs) => xs.len(),
                Value::Dict(xs) => xs.len(),
                _ => return Err(mismatch(step, "exists expects a collection")),
            };
            Ok(Value::Bool(n > 0))
        }
        TakeKth => {
            let xs = as_list(arg(0)?.value(step)?, step)?;
            let k = as_number(arg(1)?.value(step)?, step)? as usize;
            if k < 1 || k > xs.len() {
                return Err(ExecError::IndexOutOfRange { step, index: k, len: xs.len() });
            }
            Ok(xs[k - 1].clone())
        }
        TakeLast => {
            let xs = as_list(arg(0)?.value(step)?, step)?;
            xs.last().cloned().ok_or(ExecError::EmptyAggregation { step })
        }
        SelectLarger | SelectSmaller => {
            let a = arg(0)?.value(step)?;
            let b = arg(1)?.value(step)?;
            let ord = ordered_cmp(a, b, step)?;
            let take_a = if call.primitive == SelectLarger { ord.is_ge() } else { ord.is_le() };
            Ok(if take_a { a.clone() } else { b.clone() })
        }
        Copy => Err(mismatch(step, "copy steps must be normalized away")),
    }
}

/// Executes every step of a typed program, returning the per-step values.
/// The final trace entry is the program's answer.
pub fn execute(program: &TypedProgram, store: &FactStore) -> Result<ExecutionTrace, ExecError> {
    let mut values: Vec<Value> = Vec::with_capacity(program.calls.len());
    for (call, ty) in program.calls.iter().zip(program.types.iter()) {
        let v = eval_primitive(call, ty, &values, store)?;
        values.push(v);
    }
    Ok(ExecutionTrace { values })
}

/// One line per step: `step<TAB>primitive<TAB>value-serialized`.
pub fn trace_dump(program: &TypedProgram, trace: &ExecutionTrace) -> String {
    program
        .calls
        .iter()
        .zip(trace.values.iter())
        .map(|(call, v)| format!("{}\t{}\t{}", call.step_index, call.primitive.name(), v.to_display_string()))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::{Chain, Fact, FactRole, FactStore};
    use crate::predicate::Predicate;
    use crate::value::{BaseType, EntityName};

    fn entity(s: &str) -> Value {
        Value::Entity(EntityName::new(s).unwrap())
    }

    fn num(v: f64) -> Value {
        Value::Number(Num::new(v).unwrap())
    }

    fn entity_fact(template: &str, subject: &str, chain: Chain, role: FactRole) -> Fact {
        Fact {
            predicate: Predicate::new(template).unwrap(),
            subject: entity(subject),
            object: None,
            chain,
            role,
        }
    }

    /// The worked three-step example: select/filter/count with the distractor
    /// chain grounded under perturbed predicates in the same store.
    fn worked_example_store() -> FactStore {
        let mut store = FactStore::new();
        for s in ["ABC", "DXE", "FGH", "PQR"] {
            store.insert(entity_fact("touchdowns by Edward ___", s, Chain::Gold, FactRole::SelectEntity));
        }
        for s in ["ABC", "DXE", "MNF", "IOU"] {
            store.insert(entity_fact("___ from the 1st quarter", s, Chain::Gold, FactRole::Filter));
        }
        for s in ["MNF", "IOU", "TUV"] {
            store.insert(entity_fact(
                "touchdowns by Tom ___",
                s,
                Chain::Distractor,
                FactRole::SelectEntity,
            ));
        }
        for s in ["TUV", "PQR"] {
            store.insert(entity_fact(
                "___ from the 2nd quarter",
                s,
                Chain::Distractor,
                FactRole::Filter,
            ));
        }
        store
    }

    fn worked_example_program(select_pred: &str, filter_pred: &str) -> TypedProgram {
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
    fn gold_chain_counts_two() {
        let store = worked_example_store();
        let tp = worked_example_program("touchdowns by Edward ___", "___ from the 1st quarter");
        let trace = execute(&tp, &store).unwrap();
        assert_eq!(
            trace.values[0],
            Value::List(vec![entity("ABC"), entity("DXE"), entity("FGH"), entity("PQR")])
        );
        assert_eq!(trace.values[1], Value::List(vec![entity("ABC"), entity("DXE")]));
        assert_eq!(trace.values[2], num(2.0));
    }

    #[test]
    fn distractor_chain_counts_one() {
        let store = worked_example_store();
        let tp = worked_example_program("touchdowns by Tom ___", "___ from the 2nd quarter");
        let trace = execute(&tp, &store).unwrap();
        assert_eq!(trace.values[2], num(1.0));
    }

    #[test]
    fn count_of_empty_list_is_zero() {
        let call = PrimitiveCall {
            primitive: PrimitiveId::Count,
            predicate: None,
            args: vec![Arg::Step(1)],
            step_index: 2,
        };
        let v = eval_primitive(
            &call,
            &ValueType::scalar(BaseType::Number),
            &[Value::List(vec![])],
            &FactStore::new(),
        )
        .unwrap();
        assert_eq!(v, num(0.0));
    }

    #[test]
    fn empty_aggregation_reserved_for_avg_max_min() {
        for p in [PrimitiveId::ListAverage, PrimitiveId::ListMax, PrimitiveId::ListMin] {
            let call =
                PrimitiveCall { primitive: p, predicate: None, args: vec![Arg::Step(1)], step_index: 2 };
            let err = eval_primitive(
                &call,
                &ValueType::scalar(BaseType::Number),
                &[Value::List(vec![])],
                &FactStore::new(),
            )
            .unwrap_err();
            assert_eq!(err, ExecError::EmptyAggregation { step: 2 });
        }
        // list_sum of nothing is 0.
        let call = PrimitiveCall {
            primitive: PrimitiveId::ListSum,
            predicate: None,
            args: vec![Arg::Step(1)],
            step_index: 2,
        };
        assert_eq!(
            eval_primitive(
                &call,
                &ValueType::scalar(BaseType::Number),
                &[Value::List(vec![])],
                &FactStore::new()
            )
            .unwrap(),
            num(0.0)
        );
    }

    #[test]
    fn comparative_filter_paper_example() {
        let dict = Value::Dict(vec![(entity("AFE"), num(871781.0)), (entity("RQX"), num(989517.24))]);
        let call = PrimitiveCall {
            primitive: PrimitiveId::FilterComparedTo,
            predicate: None,
            args: vec![
                Arg::Step(1),
                Arg::Lit(Literal::Cmp(Cmp::Gt)),
                Arg::Lit(Literal::Number(Num::new(948768.92).unwrap())),
            ],
            step_index: 2,
        };
        let v = eval_primitive(
            &call,
            &ValueType::list(BaseType::NamedEntity),
            &[dict],
            &FactStore::new(),
        )
        .unwrap();
        assert_eq!(v, Value::List(vec![entity("RQX")]));
    }

    #[test]
    fn arithmetic_difference_self_is_zero() {
        let call = PrimitiveCall {
            primitive: PrimitiveId::ArithmeticDifference,
            predicate: None,
            args: vec![Arg::Step(1), Arg::Step(1)],
            step_index: 2,
        };
        let v = eval_primitive(
            &call,
            &ValueType::scalar(BaseType::Number),
            &[num(10.0)],
            &FactStore::new(),
        )
        .unwrap();
        assert_eq!(v, num(0.0));
    }

    #[test]
    fn grouped_count_tallies_values() {
        // {goal1 -> 30, goal2 -> 30, goal3 -> 41} => {30: 2, 41: 1}
        let dict = Value::Dict(vec![
            (entity("AAA"), num(30.0)),
            (entity("BBB"), num(30.0)),
            (entity("CCC"), num(41.0)),
        ]);
        let call = PrimitiveCall {
            primitive: PrimitiveId::GroupedCount,
            predicate: None,
            args: vec![Arg::Step(1)],
            step_index: 2,
        };
        let v = eval_primitive(
            &call,
            &ValueType::dictionary(BaseType::Number, BaseType::Number),
            &[dict],
            &FactStore::new(),
        )
        .unwrap();
        assert_eq!(v, Value::Dict(vec![(num(30.0), num(2.0)), (num(41.0), num(1.0))]));
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let call = PrimitiveCall {
            primitive: PrimitiveId::ArithmeticDivision,
            predicate: None,
            args: vec![Arg::Step(1), Arg::Lit(Literal::Number(Num::new(0.0).unwrap()))],
            step_index: 2,
        };
        let err = eval_primitive(
            &call,
            &ValueType::scalar(BaseType::Number),
            &[num(5.0)],
            &FactStore::new(),
        )
        .unwrap_err();
        assert_eq!(err, ExecError::DivisionByZero { step: 2 });
    }

    #[test]
    fn date_differences() {
        let d1 = Value::Date(Date::ymd(1944, 6, 6).unwrap());
        let d2 = Value::Date(Date::ymd(1945, 5, 8).unwrap());
        let mk = |p: PrimitiveId| PrimitiveCall {
            primitive: p,
            predicate: None,
            args: vec![Arg::Step(1), Arg::Step(2)],
            step_index: 3,
        };
        let ty = ValueType::scalar(BaseType::Number);
        let store = FactStore::new();
        let years = eval_primitive(
            &mk(PrimitiveId::DateDifferenceInYears),
            &ty,
            &[d1.clone(), d2.clone()],
            &store,
        )
        .unwrap();
        assert_eq!(years, num(0.0));
        let days = eval_primitive(
            &mk(PrimitiveId::DateDifferenceInDays),
            &ty,
            &[d1.clone(), d2.clone()],
            &store,
        )
        .unwrap();
        assert_eq!(days, num(336.0));
        let months =
            eval_primitive(&mk(PrimitiveId::DateDifferenceInMonths), &ty, &[d1, d2], &store).unwrap();
        assert_eq!(months, num(11.0));
    }

    #[test]
    fn argmax_returns_all_tied_keys() {
        let dict = Value::Dict(vec![
            (entity("AAA"), num(5.0)),
            (entity("BBB"), num(9.0)),
            (entity("CCC"), num(9.0)),
        ]);
        let call = PrimitiveCall {
            primitive: PrimitiveId::ArgMax,
            predicate: None,
            args: vec![Arg::Step(1)],
            step_index: 2,
        };
        let v = eval_primitive(
            &call,
            &ValueType::list(BaseType::NamedEntity),
            &[dict],
            &FactStore::new(),
        )
        .unwrap();
        assert_eq!(v, Value::List(vec![entity("BBB"), entity("CCC")]));
    }

    #[test]
    fn missing_grounding_reported() {
        let tp = worked_example_program("touchdowns by Casey ___", "___ from the 1st quarter");
        let err = execute(&tp, &FactStore::new()).unwrap_err();
        assert!(matches!(err, ExecError::MissingGrounding { step: 1, .. }));
    }
}
