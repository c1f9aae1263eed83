//! Brute-force reference evaluation.
//!
//! A second, deliberately naive implementation of every primitive, kept
//! independent of the production interpreter: facts are found by scanning the
//! whole store (never the template index), sorting is selection sort, date
//! arithmetic iterates the calendar day by day. The cheat checker and the
//! oracle-equivalence tests compare against this path.

use crate::facts::FactStore;
use crate::interp::{ExecError, ExecutionTrace};
use crate::program::{Arg, Literal, PrimitiveCall, TypedProgram};
use crate::registry::{Cmp, PrimitiveId};
use crate::value::{compare_scalars, Date, Num, Structure, Value, ValueType};

fn mismatch(step: usize, message: impl Into<String>) -> ExecError {
    ExecError::RuntimeTypeMismatch { step, message: message.into() }
}

fn scan_subjects(store: &FactStore, template: &str) -> Vec<Value> {
    let mut out = vec![];
    for f in store.facts() {
        if f.predicate.template() == template {
            out.push(f.subject.clone());
        }
    }
    out
}

fn scan_object(store: &FactStore, template: &str, subject: &Value) -> Option<Value> {
    for f in store.facts() {
        if f.predicate.template() == template && &f.subject == subject {
            return f.object.clone();
        }
    }
    None
}

fn contains(xs: &[Value], x: &Value) -> bool {
    let mut found = false;
    for y in xs {
        if y == x {
            found = true;
        }
    }
    found
}

fn push_unique(out: &mut Vec<Value>, x: Value) {
    if !contains(out, &x) {
        out.push(x);
    }
}

fn selection_sort(xs: &mut [Value], step: usize, descending: bool) -> Result<(), ExecError> {
    let n = xs.len();
    for i in 0..n {
        let mut pick = i;
        for j in (i + 1)..n {
            let ord = compare_scalars(&xs[j], &xs[pick])
                .ok_or_else(|| mismatch(step, "values are not mutually comparable"))?;
            let better = if descending { ord.is_gt() } else { ord.is_lt() };
            if better {
                pick = j;
            }
        }
        xs.swap(i, pick);
    }
    Ok(())
}

/// Whole years between two dates, counted one year at a time.
fn years_by_stepping(a: Date, b: Date) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let (mut y, m, d) = lo.effective_ymd();
    let hi_t = hi.effective_ymd();
    let mut years = 0.0;
    loop {
        y += 1;
        if (y, m, d) <= hi_t {
            years += 1.0;
        } else {
            return years;
        }
    }
}

fn months_by_stepping(a: Date, b: Date) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let (mut y, mut m, d) = lo.effective_ymd();
    let hi_t = hi.effective_ymd();
    let mut months = 0.0;
    loop {
        m += 1;
        if m > 12 {
            m = 1;
            y += 1;
        }
        if (y, m, d) <= hi_t {
            months += 1.0;
        } else {
            return months;
        }
    }
}

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        _ => {
            if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 {
                29
            } else {
                28
            }
        }
    }
}

/// Calendar distance in days, walked one day at a time.
fn days_by_stepping(a: Date, b: Date) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let (mut y, mut m, mut d) = lo.effective_ymd();
    let target = hi.effective_ymd();
    let mut days = 0.0;
    while (y, m, d) < target {
        d += 1;
        if d > days_in_month(y, m) {
            d = 1;
            m += 1;
            if m > 12 {
                m = 1;
                y += 1;
            }
        }
        days += 1.0;
    }
    days
}

fn number_of(v: &Value, step: usize) -> Result<f64, ExecError> {
    match v {
        Value::Number(n) => Ok(n.get()),
        _ => Err(mismatch(step, "expected a number")),
    }
}

fn wrap_num(v: f64, step: usize) -> Result<Value, ExecError> {
    Num::new(v).map(Value::Number).map_err(|_| mismatch(step, "arithmetic overflow"))
}

enum RArg<'a> {
    Value(&'a Value),
    Owned(Value),
    Cmp(Cmp),
}

impl RArg<'_> {
    fn value(&self, step: usize) -> Result<&Value, ExecError> {
        match self {
            RArg::Value(v) => Ok(v),
            RArg::Owned(v) => Ok(v),
            RArg::Cmp(_) => Err(mismatch(step, "comparator used as a value")),
        }
    }
}

fn holds(cmp: Cmp, a: &Value, b: &Value, step: usize) -> Result<bool, ExecError> {
    if cmp == Cmp::Eq {
        return Ok(a == b);
    }
    let ord =
        compare_scalars(a, b).ok_or_else(|| mismatch(step, "values are not comparable"))?;
    Ok(match cmp {
        Cmp::Gt => ord.is_gt(),
        Cmp::Lt => ord.is_lt(),
        Cmp::Ge => ord.is_ge(),
        Cmp::Le => ord.is_le(),
        Cmp::Eq => unreachable!(),
    })
}

/// Reference evaluation of one call.
pub fn ref_eval(
    call: &PrimitiveCall,
    out_ty: &ValueType,
    trace: &[Value],
    store: &FactStore,
) -> Result<Value, ExecError> {
    let step = call.step_index;
    let args: Vec<RArg<'_>> = call
        .args
        .iter()
        .map(|a| match a {
            Arg::Step(k) => trace
                .get(*k - 1)
                .map(RArg::Value)
                .ok_or_else(|| mismatch(step, format!("unresolved reference #{k}"))),
            Arg::Lit(Literal::Number(n)) => Ok(RArg::Owned(Value::Number(*n))),
            Arg::Lit(Literal::Date(d)) => Ok(RArg::Owned(Value::Date(*d))),
            Arg::Lit(Literal::Cmp(c)) => Ok(RArg::Cmp(*c)),
        })
        .collect::<Result<_, _>>()?;
    let val = |i: usize| -> Result<&Value, ExecError> {
        args.get(i).ok_or_else(|| mismatch(step, "missing argument"))?.value(step)
    };
    let list = |i: usize| -> Result<Vec<Value>, ExecError> {
        match val(i)? {
            Value::List(xs) => Ok(xs.clone()),
            _ => Err(mismatch(step, "expected a list")),
        }
    };
    let dict = |i: usize| -> Result<Vec<(Value, Value)>, ExecError> {
        match val(i)? {
            Value::Dict(xs) => Ok(xs.clone()),
            _ => Err(mismatch(step, "expected a dictionary")),
        }
    };
    let boolean = |i: usize| -> Result<bool, ExecError> {
        match val(i)? {
            Value::Bool(b) => Ok(*b),
            _ => Err(mismatch(step, "expected a boolean")),
        }
    };

    use PrimitiveId::*;
    match call.primitive {
        Select => {
            let pred = call.predicate.as_ref().expect("select carries a predicate");
            let subjects = scan_subjects(store, pred.template());
            if subjects.is_empty() {
                return Err(ExecError::MissingGrounding {
                    step,
                    predicate: pred.template().to_string(),
                });
            }
            match out_ty.structure {
                Structure::Scalar => {
                    if subjects.len() == 1 {
                        Ok(subjects.into_iter().next().unwrap())
                    } else {
                        Err(mismatch(step, "scalar select matched several facts"))
                    }
                }
                Structure::List => Ok(Value::List(subjects)),
                Structure::Dictionary => Err(mismatch(step, "select cannot produce a dictionary")),
            }
        }
        Project => {
            let pred = call.predicate.as_ref().expect("project carries a predicate");
            let input = val(0)?;
            let get = |e: &Value| {
                scan_object(store, pred.template(), e).ok_or_else(|| ExecError::MissingGrounding {
                    step,
                    predicate: pred.template().to_string(),
                })
            };
            match input {
                Value::List(xs) => {
                    let mut pairs = vec![];
                    for e in xs {
                        pairs.push((e.clone(), get(e)?));
                    }
                    match out_ty.structure {
                        Structure::Dictionary => Ok(Value::Dict(pairs)),
                        _ => Ok(Value::List(pairs.into_iter().map(|(_, v)| v).collect())),
                    }
                }
                scalar => get(scalar),
            }
        }
        Filter => {
            let pred = call.predicate.as_ref().expect("filter carries a predicate");
            let matched = scan_subjects(store, pred.template());
            let mut kept = vec![];
            for e in list(0)? {
                if contains(&matched, &e) {
                    kept.push(e);
                }
            }
            Ok(Value::List(kept))
        }
        Boolean => {
            let pred = call.predicate.as_ref().expect("boolean carries a predicate");
            let polarity = |e: &Value| -> Result<bool, ExecError> {
                for f in store.facts() {
                    if f.predicate.template() == pred.template() && &f.subject == e {
                        if let Some(Value::Bool(b)) = f.object {
                            return Ok(b);
                        }
                    }
                }
                Err(ExecError::MissingGrounding { step, predicate: pred.template().to_string() })
            };
            match val(0)? {
                Value::List(xs) => {
                    if xs.is_empty() {
                        return Err(ExecError::EmptyAggregation { step });
                    }
                    let mut all = true;
                    for e in xs {
                        if !polarity(e)? {
                            all = false;
                        }
                    }
                    Ok(Value::Bool(all))
                }
                scalar => Ok(Value::Bool(polarity(scalar)?)),
            }
        }
        Count => {
            let n = match val(0)? {
                Value::List(xs) => xs.len(),
                Value::Dict(xs) => xs.len(),
                _ => return Err(mismatch(step, "count expects a collection")),
            };
            wrap_num(n as f64, step)
        }
        CountUnique => {
            let mut seen: Vec<Value> = vec![];
            for x in list(0)? {
                push_unique(&mut seen, x);
            }
            wrap_num(seen.len() as f64, step)
        }
        GroupedCount => {
            let pairs = dict(0)?;
            let mut keys: Vec<Value> = vec![];
            for (_, v) in &pairs {
                push_unique(&mut keys, v.clone());
            }
            let mut out = vec![];
            for key in keys {
                let mut n = 0.0;
                for (_, v) in &pairs {
                    if v == &key {
                        n += 1.0;
                    }
                }
                out.push((key, wrap_num(n, step)?));
            }
            Ok(Value::Dict(out))
        }
        GroupedSum | GroupedMean => {
            let values = dict(0)?;
            let groups = dict(1)?;
            let mut group_keys: Vec<Value> = vec![];
            for (_, g) in &groups {
                push_unique(&mut group_keys, g.clone());
            }
            let mut out = vec![];
            for gk in group_keys {
                let mut sum = 0.0;
                let mut n = 0.0;
                for (k, g) in &groups {
                    if g != &gk {
                        continue;
                    }
                    let mut found = None;
                    for (vk, v) in &values {
                        if vk == k {
                            found = Some(v.clone());
                        }
                    }
                    let v = found.ok_or_else(|| mismatch(step, "no value for grouped key"))?;
                    sum += number_of(&v, step)?;
                    n += 1.0;
                }
                let agg = if call.primitive == GroupedMean { sum / n } else { sum };
                out.push((gk, wrap_num(agg, step)?));
            }
            Ok(Value::Dict(out))
        }
        ListSum => {
            let mut sum = 0.0;
            for x in list(0)? {
                sum += number_of(&x, step)?;
            }
            wrap_num(sum, step)
        }
        ListAverage => {
            let xs = list(0)?;
            if xs.is_empty() {
                return Err(ExecError::EmptyAggregation { step });
            }
            let mut sum = 0.0;
            for x in &xs {
                sum += number_of(x, step)?;
            }
            wrap_num(sum / xs.len() as f64, step)
        }
        ListMax | ListMin => {
            let mut xs = list(0)?;
            if xs.is_empty() {
                return Err(ExecError::EmptyAggregation { step });
            }
            selection_sort(&mut xs, step, call.primitive == ListMax)?;
            Ok(xs[0].clone())
        }
        ArithmeticSum => wrap_num(number_of(val(0)?, step)? + number_of(val(1)?, step)?, step),
        ArithmeticDifference => wrap_num(number_of(val(0)?, step)? - number_of(val(1)?, step)?, step),
        ArithmeticMultiplication => {
            wrap_num(number_of(val(0)?, step)? * number_of(val(1)?, step)?, step)
        }
        ArithmeticDivision => {
            let b = number_of(val(1)?, step)?;
            if b == 0.0 {
                return Err(ExecError::DivisionByZero { step });
            }
            wrap_num(number_of(val(0)?, step)? / b, step)
        }
        FilterComparedTo | FilterGivenValue | FilterLarger | FilterSmaller | FilterAtLeast
        | FilterAtMost => {
            let pairs = dict(0)?;
            let (cmp, threshold) = match call.primitive {
                FilterComparedTo => {
                    let c = match &args[1] {
                        RArg::Cmp(c) => *c,
                        _ => return Err(mismatch(step, "expected a comparator")),
                    };
                    (c, val(2)?.clone())
                }
                FilterGivenValue => (Cmp::Eq, val(1)?.clone()),
                FilterLarger => (Cmp::Gt, val(1)?.clone()),
                FilterSmaller => (Cmp::Lt, val(1)?.clone()),
                FilterAtLeast => (Cmp::Ge, val(1)?.clone()),
                FilterAtMost => (Cmp::Le, val(1)?.clone()),
                _ => unreachable!(),
            };
            if cmp == Cmp::Eq {
                let same_kind = pairs.iter().all(|(_, v)| v.base_type() == threshold.base_type());
                if !same_kind {
                    return Err(mismatch(step, "comparing values of different kinds"));
                }
            }
            let mut keys = vec![];
            for (k, v) in &pairs {
                if holds(cmp, v, &threshold, step)? {
                    keys.push(k.clone());
                }
            }
            Ok(Value::List(keys))
        }
        ArgMax | ArgMin => {
            let pairs = dict(0)?;
            if pairs.is_empty() {
                return Err(ExecError::EmptyAggregation { step });
            }
            // A key is extreme when no other value beats it.
            let beats = |a: &Value, b: &Value| -> Result<bool, ExecError> {
                let ord = compare_scalars(a, b)
                    .ok_or_else(|| mismatch(step, "values are not comparable"))?;
                Ok(if call.primitive == ArgMax { ord.is_gt() } else { ord.is_lt() })
            };
            let mut keys = vec![];
            for (k, v) in &pairs {
                let mut beaten = false;
                for (_, other) in &pairs {
                    if beats(other, v)? {
                        beaten = true;
                    }
                }
                if !beaten {
                    keys.push(k.clone());
                }
            }
            Ok(Value::List(keys))
        }
        KthHighest | KthLowest => {
            let mut xs = list(0)?;
            let k = number_of(val(1)?, step)? as usize;
            if k < 1 || k > xs.len() {
                return Err(ExecError::IndexOutOfRange { step, index: k, len: xs.len() });
            }
            selection_sort(&mut xs, step, call.primitive == KthHighest)?;
            Ok(xs[k - 1].clone())
        }
        Union => {
            let mut out = vec![];
            for x in list(0)? {
                push_unique(&mut out, x);
            }
            for x in list(1)? {
                push_unique(&mut out, x);
            }
            Ok(Value::List(out))
        }
        Intersection => {
            let b = list(1)?;
            let mut out = vec![];
            for x in list(0)? {
                if contains(&b, &x) {
                    push_unique(&mut out, x);
                }
            }
            Ok(Value::List(out))
        }
        Discard => {
            let b = list(1)?;
            let mut out = vec![];
            for x in list(0)? {
                if !contains(&b, &x) {
                    push_unique(&mut out, x);
                }
            }
            Ok(Value::List(out))
        }
        SortAscending | SortDescending => {
            let mut xs = list(0)?;
            selection_sort(&mut xs, step, call.primitive == SortDescending)?;
            Ok(Value::List(xs))
        }
        DateDifferenceInYears | DateDifferenceInMonths | DateDifferenceInDays => {
            let a = match val(0)? {
                Value::Date(d) => *d,
                _ => return Err(mismatch(step, "expected a date")),
            };
            let b = match val(1)? {
                Value::Date(d) => *d,
                _ => return Err(mismatch(step, "expected a date")),
            };
            let v = match call.primitive {
                DateDifferenceInYears => years_by_stepping(a, b),
                DateDifferenceInMonths => months_by_stepping(a, b),
                DateDifferenceInDays => days_by_stepping(a, b),
                _ => unreachable!(),
            };
            wrap_num(v, step)
        }
        LogicalAnd => Ok(Value::Bool(boolean(0)? && boolean(1)?)),
        LogicalOr => Ok(Value::Bool(boolean(0)? || boolean(1)?)),
        BooleanNegation => Ok(Value::Bool(!boolean(0)?)),
        BooleanComparison => {
            let c = match &args[1] {
                RArg::Cmp(c) => *c,
                _ => return Err(mismatch(step, "expected a comparator")),
            };
            let a = val(0)?;
            let b = val(2)?;
            if c == Cmp::Eq && a.base_type() != b.base_type() {
                return Err(mismatch(step, "comparing values of different kinds"));
            }
            Ok(Value::Bool(holds(c, a, b, step)?))
        }
        Exists => {
            let n = match val(0)? {
                Value::List(xs) => xs.len(),
                Value::Dict(xs) => xs.len(),
                _ => return Err(mismatch(step, "exists expects a collection")),
            };
            Ok(Value::Bool(n > 0))
        }
        TakeKth => {
            let xs = list(0)?;
            let k = number_of(val(1)?, step)? as usize;
            if k < 1 || k > xs.len() {
                return Err(ExecError::IndexOutOfRange { step, index: k, len: xs.len() });
            }
            Ok(xs[k - 1].clone())
        }
        TakeLast => {
            let xs = list(0)?;
            xs.last().cloned().ok_or(ExecError::EmptyAggregation { step })
        }
        SelectLarger | SelectSmaller => {
            let a = val(0)?;
            let b = val(1)?;
            let ord = compare_scalars(a, b)
                .ok_or_else(|| mismatch(step, "values are not comparable"))?;
            let take_a =
                if call.primitive == SelectLarger { ord.is_ge() } else { ord.is_le() };
            Ok(if take_a { a.clone() } else { b.clone() })
        }
        Copy => Err(mismatch(step, "copy steps must be normalized away")),
    }
}

/// Reference execution of a whole program.
pub fn ref_execute(program: &TypedProgram, store: &FactStore) -> Result<ExecutionTrace, ExecError> {
    let mut values: Vec<Value> = Vec::with_capacity(program.calls.len());
    for (call, ty) in program.calls.iter().zip(program.types.iter()) {
        let v = ref_eval(call, ty, &values, store)?;
        values.push(v);
    }
    Ok(ExecutionTrace { values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn day_stepping_matches_epoch_arithmetic() {
        let pairs = [
            (Date::ymd(1944, 6, 6).unwrap(), Date::ymd(1945, 5, 8).unwrap()),
            (Date::year_only(1100).unwrap(), Date::year_only(1101).unwrap()),
            (Date::ymd(1999, 12, 31).unwrap(), Date::ymd(2000, 3, 1).unwrap()),
        ];
        for (a, b) in pairs {
            let expected = (a.days_from_epoch() - b.days_from_epoch()).abs() as f64;
            assert_eq!(days_by_stepping(a, b), expected);
        }
    }

    #[test]
    fn year_stepping_counts_whole_years() {
        let a = Date::ymd(1944, 6, 6).unwrap();
        let b = Date::ymd(1945, 5, 8).unwrap();
        assert_eq!(years_by_stepping(a, b), 0.0);
        let c = Date::ymd(1945, 6, 6).unwrap();
        assert_eq!(years_by_stepping(a, c), 1.0);
        assert_eq!(months_by_stepping(a, b), 11.0);
    }
}
