//! Property tests: serialization round-trips, normalization idempotence,
//! set-operation laws, comparator duality, and parser totality.

use proptest::prelude::*;

use synthqa_core::facts::FactStore;
use synthqa_core::interp::eval_primitive;
use synthqa_core::parser::{normalize, parse_decomposition, RuleTable};
use synthqa_core::predicate::{Predicate, BLANK};
use synthqa_core::program::{parse_program, render_calls, Arg, Literal, PrimitiveCall};
use synthqa_core::registry::{Cmp, PrimitiveId};
use synthqa_core::value::{Num, Value, ValueType};
use synthqa_core::{BaseType, Decomposition, Level};

fn predicate_text() -> impl Strategy<Value = String> {
    (
        prop::collection::vec("[a-zA-Z0-9.'\"\\\\]{1,8}", 1..5),
        any::<prop::sample::Index>(),
    )
        .prop_map(|(words, idx)| {
            let mut parts = words;
            let pos = idx.index(parts.len() + 1);
            parts.insert(pos, BLANK.to_string());
            parts.join(" ")
        })
}

#[derive(Debug, Clone)]
enum StepKind {
    Select(String),
    Filter(String),
    Project(String),
    Count,
    ListSum,
    SortAscending,
    TakeKth(u8),
    ArithmeticSum(u32, u32),
    FilterCompared(u8, u32),
    DateDiff(i32),
}

fn step_kind() -> impl Strategy<Value = StepKind> {
    prop_oneof![
        predicate_text().prop_map(StepKind::Select),
        predicate_text().prop_map(StepKind::Filter),
        predicate_text().prop_map(StepKind::Project),
        Just(StepKind::Count),
        Just(StepKind::ListSum),
        Just(StepKind::SortAscending),
        (1u8..5).prop_map(StepKind::TakeKth),
        (0u32..100_000_000, 0u32..100_000_000).prop_map(|(a, b)| StepKind::ArithmeticSum(a, b)),
        (0u8..5, 0u32..100_000_000).prop_map(|(c, t)| StepKind::FilterCompared(c, t)),
        (1100i32..=2022).prop_map(StepKind::DateDiff),
    ]
}

fn build_program(kinds: Vec<StepKind>) -> Vec<PrimitiveCall> {
    let mut calls: Vec<PrimitiveCall> = vec![];
    for kind in kinds {
        let step_index = calls.len() + 1;
        let prev = step_index.saturating_sub(1).max(1);
        let needs_ref = step_index > 1;
        let call = match kind {
            StepKind::Select(p) => PrimitiveCall {
                primitive: PrimitiveId::Select,
                predicate: Some(Predicate::new(p).unwrap()),
                args: vec![],
                step_index,
            },
            StepKind::Filter(p) if needs_ref => PrimitiveCall {
                primitive: PrimitiveId::Filter,
                predicate: Some(Predicate::new(p).unwrap()),
                args: vec![Arg::Step(prev)],
                step_index,
            },
            StepKind::Project(p) if needs_ref => PrimitiveCall {
                primitive: PrimitiveId::Project,
                predicate: Some(Predicate::new(p).unwrap()),
                args: vec![Arg::Step(prev)],
                step_index,
            },
            StepKind::Count if needs_ref => PrimitiveCall {
                primitive: PrimitiveId::Count,
                predicate: None,
                args: vec![Arg::Step(prev)],
                step_index,
            },
            StepKind::ListSum if needs_ref => PrimitiveCall {
                primitive: PrimitiveId::ListSum,
                predicate: None,
                args: vec![Arg::Step(prev)],
                step_index,
            },
            StepKind::SortAscending if needs_ref => PrimitiveCall {
                primitive: PrimitiveId::SortAscending,
                predicate: None,
                args: vec![Arg::Step(prev)],
                step_index,
            },
            StepKind::TakeKth(k) if needs_ref => PrimitiveCall {
                primitive: PrimitiveId::TakeKth,
                predicate: None,
                args: vec![
                    Arg::Step(prev),
                    Arg::Lit(Literal::Number(Num::new(k as f64).unwrap())),
                ],
                step_index,
            },
            StepKind::ArithmeticSum(a, b) => PrimitiveCall {
                primitive: PrimitiveId::ArithmeticSum,
                predicate: None,
                args: vec![
                    Arg::Lit(Literal::Number(Num::new(a as f64 / 100.0).unwrap())),
                    Arg::Lit(Literal::Number(Num::new(b as f64 / 100.0).unwrap())),
                ],
                step_index,
            },
            StepKind::FilterCompared(c, t) if needs_ref => {
                let cmp = [Cmp::Gt, Cmp::Lt, Cmp::Ge, Cmp::Le, Cmp::Eq][c as usize % 5];
                PrimitiveCall {
                    primitive: PrimitiveId::FilterComparedTo,
                    predicate: None,
                    args: vec![
                        Arg::Step(prev),
                        Arg::Lit(Literal::Cmp(cmp)),
                        Arg::Lit(Literal::Number(Num::new(t as f64 / 100.0).unwrap())),
                    ],
                    step_index,
                }
            }
            StepKind::DateDiff(y) => PrimitiveCall {
                primitive: PrimitiveId::DateDifferenceInYears,
                predicate: None,
                args: vec![
                    Arg::Lit(Literal::Date(synthqa_core::Date::year_only(y).unwrap())),
                    Arg::Lit(Literal::Date(synthqa_core::Date::year_only(2022).unwrap())),
                ],
                step_index,
            },
            // First step fallbacks when a reference is unavailable.
            _ => PrimitiveCall {
                primitive: PrimitiveId::Select,
                predicate: Some(Predicate::new(format!("things {BLANK}")).unwrap()),
                args: vec![],
                step_index,
            },
        };
        calls.push(call);
    }
    calls
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn render_parse_round_trip(kinds in prop::collection::vec(step_kind(), 1..7)) {
        let calls = build_program(kinds);
        let rendered = render_calls(&calls);
        let parsed = parse_program(&rendered).expect("rendered programs parse");
        prop_assert_eq!(parsed.calls, calls);
    }
}

proptest! {
    #[test]
    fn parse_decomposition_never_panics(steps in prop::collection::vec(".{0,60}", 1..5)) {
        if let Ok(d) = Decomposition::new("q", "question", steps, Level::Low, "T") {
            let _ = parse_decomposition(&d, RuleTable::default_table());
        }
    }

    #[test]
    fn normalize_is_idempotent(kinds in prop::collection::vec(step_kind(), 1..6), copy_at in any::<prop::sample::Index>()) {
        let mut calls = build_program(kinds);
        // Splice in a copy step referencing the previous one.
        let pos = copy_at.index(calls.len()) + 1;
        if pos > 1 {
            calls.insert(pos - 1, PrimitiveCall {
                primitive: PrimitiveId::Copy,
                predicate: None,
                args: vec![Arg::Step(pos - 1)],
                step_index: pos,
            });
            for (i, c) in calls.iter_mut().enumerate() {
                c.step_index = i + 1;
                // Keep references pointing at earlier steps after the splice.
                for a in c.args.iter_mut() {
                    if let Arg::Step(r) = a {
                        if *r >= c.step_index {
                            *r = c.step_index - 1;
                        }
                    }
                }
            }
        }
        let program = synthqa_core::Program { calls };
        if let Ok(once) = normalize(program) {
            let twice = normalize(once.clone()).expect("normalized program re-normalizes");
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn set_operation_laws(names in prop::collection::vec("[A-Z]{3}", 0..6)) {
        let xs: Vec<Value> = {
            let mut out = vec![];
            for n in names {
                let v = Value::entity(n).unwrap();
                if !out.contains(&v) { out.push(v); }
            }
            out
        };
        let x = Value::List(xs.clone());
        let empty = Value::List(vec![]);
        let ty = ValueType::list(BaseType::NamedEntity);
        let store = FactStore::new();
        let run = |p: PrimitiveId, a: &Value, b: &Value| {
            let call = PrimitiveCall {
                primitive: p,
                predicate: None,
                args: vec![Arg::Step(1), Arg::Step(2)],
                step_index: 3,
            };
            eval_primitive(&call, &ty, &[a.clone(), b.clone()], &store).unwrap()
        };
        prop_assert_eq!(run(PrimitiveId::Union, &x, &empty), x.clone());
        prop_assert_eq!(run(PrimitiveId::Intersection, &x, &x), x.clone());
        prop_assert_eq!(run(PrimitiveId::Discard, &x, &empty), x.clone());
    }

    #[test]
    fn comparator_duality(values in prop::collection::vec(0u32..1000, 1..8), threshold in 0u32..1000) {
        // filter with ">" equals the complement (within the input) of "<=".
        let keys: Vec<Value> = (0..values.len())
            .map(|i| {
                let name: String = (0..3)
                    .map(|j| (b'A' + ((i * 7 + j * 3) % 26) as u8) as char)
                    .collect();
                Value::entity(name).unwrap()
            })
            .collect();
        let mut dict = vec![];
        for (k, v) in keys.iter().zip(values.iter()) {
            if !dict.iter().any(|(dk, _)| dk == k) {
                dict.push((k.clone(), Value::Number(Num::new(*v as f64).unwrap())));
            }
        }
        let input = Value::Dict(dict.clone());
        let ty = ValueType::list(BaseType::NamedEntity);
        let store = FactStore::new();
        let run = |cmp: Cmp| {
            let call = PrimitiveCall {
                primitive: PrimitiveId::FilterComparedTo,
                predicate: None,
                args: vec![
                    Arg::Step(1),
                    Arg::Lit(Literal::Cmp(cmp)),
                    Arg::Lit(Literal::Number(Num::new(threshold as f64).unwrap())),
                ],
                step_index: 2,
            };
            match eval_primitive(&call, &ty, &[input.clone()], &store).unwrap() {
                Value::List(xs) => xs,
                _ => unreachable!(),
            }
        };
        let gt = run(Cmp::Gt);
        let le = run(Cmp::Le);
        prop_assert_eq!(gt.len() + le.len(), dict.len());
        for (k, _) in &dict {
            prop_assert!(gt.contains(k) != le.contains(k));
        }
    }
}
