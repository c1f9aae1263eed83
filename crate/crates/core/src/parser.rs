//! Rule-based conversion of decomposition steps into primitive calls.
//!
//! The rule table is data-driven (see `rules/default.rules`): each line maps
//! a step-surface pattern to a primitive with an extractor spec describing how
//! capture groups become arguments and predicates. Parsing is deterministic:
//! rules are tried in descending priority and the first match wins.

use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use thiserror::Error;

use crate::decomp::Decomposition;
use crate::predicate::{Predicate, BLANK};
use crate::program::{Arg, Literal, PrimitiveCall, Program, ProgramError};
use crate::registry::{Cmp, PrimitiveId};
use crate::value::{Date, Num};

pub const DEFAULT_RULES: &str = include_str!("../rules/default.rules");

#[derive(Debug, Error)]
pub enum RuleTableError {
    #[error("cannot read rule table: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected 4 tab-separated columns")]
    Columns { line: usize },
    #[error("line {line}: bad priority {text:?}")]
    Priority { line: usize, text: String },
    #[error("line {line}: bad pattern: {source}")]
    Pattern { line: usize, source: regex::Error },
    #[error("line {line}: unknown primitive {name:?}")]
    Primitive { line: usize, name: String },
    #[error("line {line}: bad extractor token {token:?}")]
    Extractor { line: usize, token: String },
    #[error("rule table is empty")]
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("step {step_index}: no rule matches {raw:?}")]
    NoRule { step_index: usize, raw: String },
    #[error("step {step_index}: reference #{reference} does not resolve to an earlier step")]
    Reference { step_index: usize, reference: usize },
    #[error("step {step_index}: {message}")]
    Extract { step_index: usize, message: String },
    #[error(transparent)]
    Program(#[from] ProgramError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormalizationError {
    #[error("copy step {step} does not reference a step")]
    BadCopy { step: usize },
    #[error("program is empty after normalization")]
    EmptyResult,
    #[error(transparent)]
    Program(#[from] ProgramError),
}

/// One extractor operation; the sequence order defines the argument order.
#[derive(Debug, Clone, PartialEq, Eq)]
enum ExtractOp {
    /// Group must be a `#k` reference.
    Ref(usize),
    /// Group is a `#k` reference or a number literal.
    Val(usize),
    /// Group is a `#k` reference or a date literal.
    DateVal(usize),
    /// Group is an ordinal ("2nd", "third") -> number literal.
    Ord(usize),
    /// Group is a comparison word -> comparator literal.
    CmpWord(usize),
    /// Fixed comparator literal.
    CmpFixed(Cmp),
    /// Group is the predicate text; the first `#k` inside becomes the blank.
    Pred(usize),
}

#[derive(Debug)]
pub struct ParseRule {
    pub priority: i32,
    pub primitive: PrimitiveId,
    pattern: Regex,
    ops: Vec<ExtractOp>,
}

/// An ordered rule table; highest priority first, line order breaks ties.
#[derive(Debug)]
pub struct RuleTable {
    rules: Vec<ParseRule>,
}

impl RuleTable {
    pub fn from_str(text: &str) -> Result<Self, RuleTableError> {
        let mut rules = vec![];
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw_line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw_line.split('\t').collect();
            if cols.len() != 4 {
                return Err(RuleTableError::Columns { line });
            }
            let priority: i32 = cols[0]
                .trim()
                .parse()
                .map_err(|_| RuleTableError::Priority { line, text: cols[0].to_string() })?;
            let pattern =
                Regex::new(cols[1].trim()).map_err(|source| RuleTableError::Pattern { line, source })?;
            let primitive = PrimitiveId::from_name(cols[2].trim())
                .ok_or_else(|| RuleTableError::Primitive { line, name: cols[2].to_string() })?;
            let ops = parse_extractor(cols[3].trim(), line)?;
            rules.push(ParseRule { priority, pattern, primitive, ops });
        }
        if rules.is_empty() {
            return Err(RuleTableError::Empty);
        }
        // Stable sort keeps line order among equal priorities.
        rules.sort_by_key(|r| std::cmp::Reverse(r.priority));
        Ok(RuleTable { rules })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, RuleTableError> {
        let text = std::fs::read_to_string(path)?;
        RuleTable::from_str(&text)
    }

    /// The built-in rule table, shared by both QDMR levels.
    pub fn default_table() -> &'static RuleTable {
        static TABLE: LazyLock<RuleTable> = LazyLock::new(|| {
            RuleTable::from_str(DEFAULT_RULES).expect("embedded rule table is valid")
        });
        &TABLE
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

fn parse_extractor(spec: &str, line: usize) -> Result<Vec<ExtractOp>, RuleTableError> {
    let mut ops = vec![];
    for token in spec.split(',') {
        let token = token.trim();
        let err = || RuleTableError::Extractor { line, token: token.to_string() };
        let (key, value) = token.split_once('=').ok_or_else(err)?;
        let group = |v: &str| -> Result<usize, RuleTableError> {
            v.strip_prefix('g').and_then(|n| n.parse().ok()).ok_or_else(err)
        };
        let op = match key {
            "ref" => ExtractOp::Ref(group(value)?),
            "val" => ExtractOp::Val(group(value)?),
            "dval" => ExtractOp::DateVal(group(value)?),
            "ord" => ExtractOp::Ord(group(value)?),
            "pred" => ExtractOp::Pred(group(value)?),
            "cmp" => {
                if let Some(c) = Cmp::from_symbol(value) {
                    ExtractOp::CmpFixed(c)
                } else {
                    ExtractOp::CmpWord(group(value)?)
                }
            }
            _ => return Err(err()),
        };
        ops.push(op);
    }
    Ok(ops)
}

const WORD_NUMBERS: &[(&str, f64)] = &[
    ("zero", 0.0),
    ("one", 1.0),
    ("two", 2.0),
    ("three", 3.0),
    ("four", 4.0),
    ("five", 5.0),
    ("six", 6.0),
    ("seven", 7.0),
    ("eight", 8.0),
    ("nine", 9.0),
    ("ten", 10.0),
];

const WORD_ORDINALS: &[(&str, f64)] = &[
    ("first", 1.0),
    ("second", 2.0),
    ("third", 3.0),
    ("fourth", 4.0),
    ("fifth", 5.0),
    ("sixth", 6.0),
    ("seventh", 7.0),
    ("eighth", 8.0),
    ("ninth", 9.0),
    ("tenth", 10.0),
];

fn parse_number_word(text: &str) -> Option<f64> {
    let lower = text.to_lowercase();
    WORD_NUMBERS.iter().find(|(w, _)| *w == lower).map(|(_, v)| *v).or_else(|| Num::parse(text).ok().map(|n| n.get()))
}

fn parse_ordinal(text: &str) -> Option<f64> {
    let lower = text.to_lowercase();
    if let Some((_, v)) = WORD_ORDINALS.iter().find(|(w, _)| *w == lower) {
        return Some(*v);
    }
    let digits: String = lower.chars().take_while(|c| c.is_ascii_digit()).collect();
    if !digits.is_empty() && (lower.ends_with("st") || lower.ends_with("nd") || lower.ends_with("rd") || lower.ends_with("th")) {
        return digits.parse().ok();
    }
    None
}

fn parse_ref(text: &str) -> Option<usize> {
    text.strip_prefix('#').and_then(|n| n.parse().ok())
}

static STEP_REF_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"#\d+").unwrap());

/// Normalizes a raw step: strips the "return " prefix, squeezes whitespace,
/// drops trailing sentence punctuation.
fn preprocess_step(raw: &str) -> String {
    let squeezed = raw.split_whitespace().collect::<Vec<_>>().join(" ");
    let no_prefix = squeezed
        .strip_prefix("return ")
        .or_else(|| squeezed.strip_prefix("Return "))
        .unwrap_or(&squeezed);
    no_prefix.trim_end_matches(['.', '?', ' ']).to_string()
}

/// Builds a predicate from captured text: the first `#k` becomes the blank;
/// if there is none, the blank goes to the primitive's canonical position
/// (trailing for select/project, leading for filter/boolean).
fn predicate_from_text(primitive: PrimitiveId, text: &str, step_index: usize) -> Result<Predicate, ParseError> {
    let with_blank = if let Some(m) = STEP_REF_RE.find(text) {
        let mut s = String::with_capacity(text.len());
        s.push_str(&text[..m.start()]);
        s.push_str(BLANK);
        s.push_str(&text[m.end()..]);
        s
    } else {
        match primitive {
            PrimitiveId::Filter | PrimitiveId::Boolean => format!("{BLANK} {text}"),
            _ => format!("{text} {BLANK}"),
        }
    };
    Predicate::new(with_blank)
        .map_err(|e| ParseError::Extract { step_index, message: e.to_string() })
}

fn apply_rule(
    rule: &ParseRule,
    caps: &regex::Captures<'_>,
    step_index: usize,
) -> Result<PrimitiveCall, ParseError> {
    let mut args = vec![];
    let mut predicate = None;
    let group_text = |g: usize| -> Result<&str, ParseError> {
        caps.get(g).map(|m| m.as_str()).ok_or_else(|| ParseError::Extract {
            step_index,
            message: format!("capture group {g} is empty"),
        })
    };
    for op in &rule.ops {
        match op {
            ExtractOp::Ref(g) => {
                let text = group_text(*g)?;
                let r = parse_ref(text).ok_or_else(|| ParseError::Extract {
                    step_index,
                    message: format!("expected a step reference, got {text:?}"),
                })?;
                if r == 0 || r >= step_index {
                    return Err(ParseError::Reference { step_index, reference: r });
                }
                args.push(Arg::Step(r));
            }
            ExtractOp::Val(g) => {
                let text = group_text(*g)?;
                if let Some(r) = parse_ref(text) {
                    if r == 0 || r >= step_index {
                        return Err(ParseError::Reference { step_index, reference: r });
                    }
                    args.push(Arg::Step(r));
                } else {
                    let v = parse_number_word(text).ok_or_else(|| ParseError::Extract {
                        step_index,
                        message: format!("expected a number, got {text:?}"),
                    })?;
                    let n = Num::new(v).map_err(|e| ParseError::Extract {
                        step_index,
                        message: e.to_string(),
                    })?;
                    args.push(Arg::Lit(Literal::Number(n)));
                }
            }
            ExtractOp::DateVal(g) => {
                let text = group_text(*g)?;
                if let Some(r) = parse_ref(text) {
                    if r == 0 || r >= step_index {
                        return Err(ParseError::Reference { step_index, reference: r });
                    }
                    args.push(Arg::Step(r));
                } else {
                    let d = Date::parse(text).map_err(|e| ParseError::Extract {
                        step_index,
                        message: e.to_string(),
                    })?;
                    args.push(Arg::Lit(Literal::Date(d)));
                }
            }
            ExtractOp::Ord(g) => {
                let text = group_text(*g)?;
                let v = parse_ordinal(text).ok_or_else(|| ParseError::Extract {
                    step_index,
                    message: format!("expected an ordinal, got {text:?}"),
                })?;
                args.push(Arg::Lit(Literal::Number(Num::new(v).expect("ordinal is finite"))));
            }
            ExtractOp::CmpWord(g) => {
                let text = group_text(*g)?;
                let c = Cmp::from_word(text).ok_or_else(|| ParseError::Extract {
                    step_index,
                    message: format!("unknown comparison word {text:?}"),
                })?;
                args.push(Arg::Lit(Literal::Cmp(c)));
            }
            ExtractOp::CmpFixed(c) => args.push(Arg::Lit(Literal::Cmp(*c))),
            ExtractOp::Pred(g) => {
                predicate = Some(predicate_from_text(rule.primitive, group_text(*g)?, step_index)?);
            }
        }
    }
    Ok(PrimitiveCall { primitive: rule.primitive, predicate, args, step_index })
}

/// Converts a decomposition into an untyped program, one call per step.
pub fn parse_decomposition(d: &Decomposition, table: &RuleTable) -> Result<Program, ParseError> {
    let mut calls = vec![];
    for (i, step) in d.steps().iter().enumerate() {
        let step_index = i + 1;
        let text = preprocess_step(step.raw());
        let mut matched = None;
        for rule in &table.rules {
            if let Some(caps) = rule.pattern.captures(&text) {
                matched = Some(apply_rule(rule, &caps, step_index)?);
                break;
            }
        }
        let call = matched.ok_or_else(|| ParseError::NoRule { step_index, raw: step.raw().to_string() })?;
        calls.push(call);
    }
    // Copy steps carry no predicate and are eliminated by normalize(); the
    // final program validation happens there.
    Ok(Program { calls })
}

/// Removes copy steps (rewiring references) and steps unreachable from the
/// final step, then reindexes.
pub fn normalize(p: Program) -> Result<Program, NormalizationError> {
    let n = p.calls.len();
    if n == 0 {
        return Err(NormalizationError::EmptyResult);
    }

    // Resolve copy redirects transitively (references only point backwards,
    // so a single forward pass suffices).
    let mut redirect: Vec<usize> = (0..=n).collect();
    for (i, call) in p.calls.iter().enumerate() {
        let step = i + 1;
        if call.primitive == PrimitiveId::Copy {
            let target = call
                .args
                .first()
                .and_then(Arg::as_step)
                .ok_or(NormalizationError::BadCopy { step })?;
            redirect[step] = redirect[target];
        }
    }

    let final_step = redirect[n];

    // Reachability from the final step over redirected references.
    let mut keep = vec![false; n + 1];
    let mut stack = vec![final_step];
    while let Some(s) = stack.pop() {
        if keep[s] {
            continue;
        }
        keep[s] = true;
        for r in p.calls[s - 1].step_refs() {
            stack.push(redirect[r]);
        }
    }

    // Old 1-based index -> new 1-based index for kept, non-copy steps.
    let mut new_index = vec![0usize; n + 1];
    let mut next = 0usize;
    for step in 1..=n {
        if keep[step] && p.calls[step - 1].primitive != PrimitiveId::Copy {
            next += 1;
            new_index[step] = next;
        }
    }
    if next == 0 {
        return Err(NormalizationError::EmptyResult);
    }

    let mut calls = vec![];
    for (i, call) in p.calls.into_iter().enumerate() {
        let step = i + 1;
        if !keep[step] || call.primitive == PrimitiveId::Copy {
            continue;
        }
        let args = call
            .args
            .into_iter()
            .map(|a| match a {
                Arg::Step(r) => Arg::Step(new_index[redirect[r]]),
                lit => lit,
            })
            .collect();
        calls.push(PrimitiveCall {
            primitive: call.primitive,
            predicate: call.predicate,
            args,
            step_index: new_index[step],
        });
    }

    Ok(Program::new(calls)?)
}

/// Parses and normalizes in one go.
pub fn parse_and_normalize(d: &Decomposition, table: &RuleTable) -> Result<Program, ParseError> {
    let p = parse_decomposition(d, table)?;
    normalize(p).map_err(|e| match e {
        NormalizationError::Program(pe) => ParseError::Program(pe),
        other => ParseError::Extract { step_index: 0, message: other.to_string() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::Level;
    use crate::program::render_calls;

    fn decomp(steps: &[&str]) -> Decomposition {
        Decomposition::new(
            "q1",
            "test question",
            steps.iter().map(|s| s.to_string()).collect(),
            Level::Low,
            "TEST",
        )
        .unwrap()
    }

    fn parse(steps: &[&str]) -> Program {
        parse_decomposition(&decomp(steps), RuleTable::default_table()).unwrap()
    }

    #[test]
    fn default_table_loads() {
        assert!(RuleTable::default_table().len() > 30);
    }

    #[test]
    fn fig3_decomposition_parses() {
        let p = parse(&[
            "return touchdowns by Edward",
            "return #1 from the 1st quarter",
            "return the number of #2",
        ]);
        assert_eq!(
            render_calls(&p.calls),
            r#"select("touchdowns by Edward") ; filter(#1, "from the 1st quarter") ; count(#2)"#
        );
    }

    #[test]
    fn superlative_step_parses_as_argmin() {
        let p = parse(&[
            "return field goals of Shayne Graham",
            "return yard lines of #1",
            "return the number of #2 for each #1",
            "return number #2 where #3 is least goals",
        ]);
        assert_eq!(p.calls[1].primitive, PrimitiveId::Project);
        assert_eq!(p.calls[2].primitive, PrimitiveId::GroupedCount);
        assert_eq!(p.calls[3].primitive, PrimitiveId::ArgMin);
        assert_eq!(p.calls[3].args, vec![Arg::Step(3)]);
    }

    #[test]
    fn given_value_filter_parses_word_numbers() {
        let p = parse(&[
            "return field goals",
            "return yard lines of #1",
            "return the number of #2 for each #1",
            "return #2 where #3 is two",
        ]);
        assert_eq!(p.calls[3].primitive, PrimitiveId::FilterGivenValue);
        assert_eq!(
            p.calls[3].args,
            vec![Arg::Step(3), Arg::Lit(Literal::Number(Num::new(2.0).unwrap()))]
        );
    }

    #[test]
    fn arithmetic_with_literal_parses() {
        let p = parse(&["return number of soldiers in USA", "return the difference of 100 and #1"]);
        assert_eq!(p.calls[1].primitive, PrimitiveId::ArithmeticDifference);
        assert_eq!(
            p.calls[1].args,
            vec![Arg::Lit(Literal::Number(Num::new(100.0).unwrap())), Arg::Step(1)]
        );
    }

    #[test]
    fn boolean_steps_parse() {
        let p = parse(&[
            "return number of goals by Mia",
            "return number of goals by Sam",
            "return if #1 is higher than #2",
        ]);
        assert_eq!(p.calls[2].primitive, PrimitiveId::BooleanComparison);
        assert_eq!(
            p.calls[2].args,
            vec![Arg::Step(1), Arg::Lit(Literal::Cmp(Cmp::Gt)), Arg::Step(2)]
        );

        let p = parse(&["return players who scored", "return if #1 are american"]);
        assert_eq!(p.calls[1].primitive, PrimitiveId::Boolean);
        assert_eq!(p.calls[1].predicate.as_ref().unwrap().template(), "___ are american");
    }

    #[test]
    fn no_rule_reported_with_step_and_raw() {
        let err = parse_decomposition(&decomp(&["return ###"]), RuleTable::default_table()).unwrap_err();
        assert!(matches!(err, ParseError::NoRule { step_index: 1, .. }));
    }

    #[test]
    fn copy_steps_eliminated() {
        let p = parse(&["return goals", "return #1", "return the number of #2"]);
        let n = normalize(p).unwrap();
        assert_eq!(n.calls.len(), 2);
        assert_eq!(render_calls(&n.calls), r#"select("goals") ; count(#1)"#);
    }

    #[test]
    fn dead_steps_removed() {
        let p = parse(&["return goals", "return assists", "return the number of #1"]);
        let n = normalize(p).unwrap();
        assert_eq!(n.calls.len(), 2);
        assert_eq!(render_calls(&n.calls), r#"select("goals") ; count(#1)"#);
    }

    #[test]
    fn normalize_is_idempotent_on_samples() {
        let cases: Vec<Vec<&str>> = vec![
            vec!["return goals", "return #1", "return the number of #2"],
            vec!["return players", "return assists", "return the number of #1"],
            vec![
                "return touchdowns by Edward",
                "return #1 from the 1st quarter",
                "return the number of #2",
            ],
        ];
        for steps in cases {
            let p = parse(&steps);
            let once = normalize(p).unwrap();
            let twice = normalize(once.clone()).unwrap();
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn project_mid_reference_gets_mid_blank() {
        let p = parse(&["return actors", "return movies of #1 that won"]);
        // Reference-first steps are filters, so craft a project shape.
        assert_eq!(p.calls[1].primitive, PrimitiveId::Project);
        assert_eq!(p.calls[1].predicate.as_ref().unwrap().template(), "movies of ___ that won");
    }

    #[test]
    fn set_operations_parse() {
        let p = parse(&["return cats", "return dogs", "return #1 or #2"]);
        assert_eq!(p.calls[2].primitive, PrimitiveId::Union);
        let p = parse(&["return cats", "return dogs", "return both #1 and #2"]);
        assert_eq!(p.calls[2].primitive, PrimitiveId::Intersection);
        let p = parse(&["return cats", "return dogs", "return #1 besides #2"]);
        assert_eq!(p.calls[2].primitive, PrimitiveId::Discard);
    }

    #[test]
    fn parser_is_deterministic() {
        let steps = &["return touchdowns by Edward", "return #1 from the 1st quarter"];
        let a = parse(steps);
        let b = parse(steps);
        assert_eq!(a, b);
    }
}
