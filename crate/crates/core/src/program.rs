//! Programs: DAGs of primitive calls, their canonical textual form, and
//! pattern signatures.
//!
//! The canonical program syntax is one call per step joined by `" ; "`:
//!
//! ```text
//! select("touchdowns by Edward") ; filter(#1, "from the 1st quarter") ; count(#2)
//! ```
//!
//! Step arguments render as `#k` references, plain numbers, `@`-prefixed date
//! literals (`@1944`, `@"6 June 1944"`), or bare comparator symbols. The
//! predicate, when present, is the final double-quoted argument. A blank slot
//! in canonical position (trailing for select/project, leading for
//! filter/boolean) is stripped on render and re-inserted on parse, so
//! `parse(render(p))` reproduces `p` exactly.

use std::fmt;

use thiserror::Error;

use crate::predicate::{Predicate, BLANK};
use crate::registry::{Cmp, PrimitiveId};
use crate::value::{Date, Num, ValueType};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error("step {step} references step {reference}, which is not an earlier step")]
    BadReference { step: usize, reference: usize },
    #[error("step {step} ({primitive}): grounding primitives require a predicate, others forbid one")]
    PredicateMismatch { step: usize, primitive: PrimitiveId },
    #[error("program has no steps")]
    Empty,
    #[error("cannot parse program text at step {step}: {message}")]
    Syntax { step: usize, message: String },
    #[error("unknown primitive name: {0:?}")]
    UnknownPrimitive(String),
}

/// A scalar literal argument.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Literal {
    Number(Num),
    Date(Date),
    Cmp(Cmp),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(n) => write!(f, "{n}"),
            Literal::Date(d) => {
                if d.is_full() {
                    write!(f, "@\"{d}\"")
                } else {
                    write!(f, "@{d}")
                }
            }
            Literal::Cmp(c) => write!(f, "{c}"),
        }
    }
}

/// A step argument: a back-reference to an earlier step or a literal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Arg {
    /// 1-based index of an earlier step.
    Step(usize),
    Lit(Literal),
}

impl Arg {
    pub fn as_step(&self) -> Option<usize> {
        match self {
            Arg::Step(k) => Some(*k),
            Arg::Lit(_) => None,
        }
    }
}

/// One program step: a primitive, its optional grounding predicate, and its
/// arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveCall {
    pub primitive: PrimitiveId,
    pub predicate: Option<Predicate>,
    pub args: Vec<Arg>,
    /// 1-based position within the program.
    pub step_index: usize,
}

impl PrimitiveCall {
    pub fn step_refs(&self) -> impl Iterator<Item = usize> + '_ {
        self.args.iter().filter_map(Arg::as_step)
    }
}

/// An untyped program: the direct output of parsing a decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub calls: Vec<PrimitiveCall>,
}

impl Program {
    pub fn new(calls: Vec<PrimitiveCall>) -> Result<Self, ProgramError> {
        let p = Program { calls };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ProgramError> {
        if self.calls.is_empty() {
            return Err(ProgramError::Empty);
        }
        for (i, call) in self.calls.iter().enumerate() {
            let step = i + 1;
            for r in call.step_refs() {
                if r == 0 || r >= step {
                    return Err(ProgramError::BadReference { step, reference: r });
                }
            }
            let grounding = call.primitive.is_grounding();
            if grounding != call.predicate.is_some() {
                return Err(ProgramError::PredicateMismatch { step, primitive: call.primitive });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }
}

/// A fully typed program: every step carries a resolved value type, and the
/// pattern signature is derived from the (normalized) primitive sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedProgram {
    pub calls: Vec<PrimitiveCall>,
    pub types: Vec<ValueType>,
    pub pattern: String,
}

impl TypedProgram {
    pub fn new(calls: Vec<PrimitiveCall>, types: Vec<ValueType>) -> Self {
        let pattern = signature_of(&calls);
        TypedProgram { calls, types, pattern }
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }

    /// Type of the final (answer) step.
    pub fn final_type(&self) -> ValueType {
        *self.types.last().expect("typed program is non-empty")
    }

    /// Steps that reference step `k` (1-based).
    pub fn consumers_of(&self, k: usize) -> impl Iterator<Item = &PrimitiveCall> {
        self.calls.iter().filter(move |c| c.step_refs().any(|r| r == k))
    }

    /// Replaces per-step predicates, keeping everything else; used to build
    /// the contrastive (perturbed) program.
    pub fn with_predicates(&self, predicates: Vec<Option<Predicate>>) -> TypedProgram {
        let mut calls = self.calls.clone();
        for (call, pred) in calls.iter_mut().zip(predicates) {
            if let Some(p) = pred {
                call.predicate = Some(p);
            }
        }
        TypedProgram { calls, types: self.types.clone(), pattern: self.pattern.clone() }
    }
}

fn signature_of(calls: &[PrimitiveCall]) -> String {
    calls.iter().map(|c| c.primitive.name()).collect::<Vec<_>>().join(" ")
}

/// The reasoning pattern: space-joined primitive names in step order.
pub fn pattern_signature(program: &TypedProgram) -> String {
    signature_of(&program.calls)
}

/// Where the blank slot sits when a predicate is written without it.
fn canonical_blank_leading(primitive: PrimitiveId) -> bool {
    matches!(primitive, PrimitiveId::Filter | PrimitiveId::Boolean)
}

fn strip_canonical_blank(primitive: PrimitiveId, template: &str) -> Option<String> {
    if template == BLANK {
        return Some(String::new());
    }
    if canonical_blank_leading(primitive) {
        template.strip_prefix("___ ").map(|s| s.to_string())
    } else {
        template.strip_suffix(" ___").map(|s| s.to_string())
    }
}

fn insert_canonical_blank(primitive: PrimitiveId, text: &str) -> String {
    if text.is_empty() {
        return BLANK.to_string();
    }
    if canonical_blank_leading(primitive) {
        format!("{BLANK} {text}")
    } else {
        format!("{text} {BLANK}")
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn render_call(call: &PrimitiveCall) -> String {
    let mut parts: Vec<String> = call
        .args
        .iter()
        .map(|a| match a {
            Arg::Step(k) => format!("#{k}"),
            Arg::Lit(l) => l.to_string(),
        })
        .collect();
    if let Some(pred) = &call.predicate {
        let text = match strip_canonical_blank(call.primitive, pred.template()) {
            Some(stripped) => stripped,
            None => pred.template().to_string(),
        };
        parts.push(quote(&text));
    }
    format!("{}({})", call.primitive.name(), parts.join(", "))
}

/// Deterministic canonical text for a program; `parse_program` inverts it.
pub fn render_program(program: &TypedProgram) -> String {
    render_calls(&program.calls)
}

pub fn render_calls(calls: &[PrimitiveCall]) -> String {
    calls.iter().map(render_call).collect::<Vec<_>>().join(" ; ")
}

/// Splits on top-level `" ; "` separators (quotes respected).
fn split_steps(text: &str) -> Vec<String> {
    let mut steps = vec![];
    let mut current = String::new();
    let mut in_quotes = false;
    let mut escaped = false;
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if in_quotes {
            current.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_quotes = false;
            }
            i += 1;
            continue;
        }
        if c == '"' {
            in_quotes = true;
            current.push(c);
            i += 1;
            continue;
        }
        if c == ';' {
            steps.push(current.trim().to_string());
            current.clear();
            i += 1;
            continue;
        }
        current.push(c);
        i += 1;
    }
    let last = current.trim().to_string();
    if !last.is_empty() {
        steps.push(last);
    }
    steps
}

struct ArgToken {
    text: String,
    quoted: bool,
}

fn split_args(inner: &str, step: usize) -> Result<Vec<ArgToken>, ProgramError> {
    let mut out = vec![];
    let mut current = String::new();
    let mut quoted_current = false;
    let mut in_quotes = false;
    let mut in_date_quote = false;
    let mut escaped = false;
    for c in inner.chars() {
        if in_date_quote {
            current.push(c);
            if c == '"' {
                in_date_quote = false;
            }
            continue;
        }
        if in_quotes {
            if escaped {
                current.push(c);
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_quotes = false;
            } else {
                current.push(c);
            }
            continue;
        }
        match c {
            '"' => {
                // `@"6 June 1944"` is a date literal, not a predicate.
                if current.trim() == "@" {
                    current = current.trim().to_string();
                    current.push(c);
                    in_date_quote = true;
                    continue;
                }
                if !current.trim().is_empty() {
                    return Err(ProgramError::Syntax {
                        step,
                        message: "unexpected text before quote".into(),
                    });
                }
                current.clear();
                in_quotes = true;
                quoted_current = true;
            }
            ',' => {
                let text = current.trim().to_string();
                if text.is_empty() && !quoted_current {
                    return Err(ProgramError::Syntax { step, message: "empty argument".into() });
                }
                out.push(ArgToken { text: if quoted_current { current.clone() } else { text }, quoted: quoted_current });
                current.clear();
                quoted_current = false;
            }
            c => current.push(c),
        }
    }
    if in_quotes {
        return Err(ProgramError::Syntax { step, message: "unterminated quote".into() });
    }
    let text = current.trim().to_string();
    if !text.is_empty() || quoted_current {
        out.push(ArgToken { text: if quoted_current { current } else { text }, quoted: quoted_current });
    }
    Ok(out)
}

fn parse_plain_arg(text: &str, step: usize) -> Result<Arg, ProgramError> {
    if let Some(rest) = text.strip_prefix('#') {
        let k: usize = rest
            .parse()
            .map_err(|_| ProgramError::Syntax { step, message: format!("bad step reference {text:?}") })?;
        return Ok(Arg::Step(k));
    }
    if let Some(cmp) = Cmp::from_symbol(text) {
        return Ok(Arg::Lit(Literal::Cmp(cmp)));
    }
    if let Some(rest) = text.strip_prefix('@') {
        let inner = rest.trim_matches('"');
        let d = Date::parse(inner)
            .map_err(|e| ProgramError::Syntax { step, message: format!("bad date literal {text:?}: {e}") })?;
        return Ok(Arg::Lit(Literal::Date(d)));
    }
    let n = Num::parse(text)
        .map_err(|_| ProgramError::Syntax { step, message: format!("bad literal {text:?}") })?;
    Ok(Arg::Lit(Literal::Number(n)))
}

/// Parses the canonical program syntax back into an untyped program.
pub fn parse_program(text: &str) -> Result<Program, ProgramError> {
    let steps = split_steps(text);
    if steps.is_empty() {
        return Err(ProgramError::Empty);
    }
    let mut calls = vec![];
    for (i, step_text) in steps.iter().enumerate() {
        let step = i + 1;
        let open = step_text
            .find('(')
            .ok_or_else(|| ProgramError::Syntax { step, message: "missing '('".into() })?;
        if !step_text.ends_with(')') {
            return Err(ProgramError::Syntax { step, message: "missing ')'".into() });
        }
        let name = step_text[..open].trim();
        let primitive = PrimitiveId::from_name(name)
            .ok_or_else(|| ProgramError::UnknownPrimitive(name.to_string()))?;
        let inner = &step_text[open + 1..step_text.len() - 1];
        let tokens = split_args(inner, step)?;

        let mut args = vec![];
        let mut predicate = None;
        for (j, tok) in tokens.iter().enumerate() {
            if tok.quoted {
                if j + 1 != tokens.len() {
                    return Err(ProgramError::Syntax {
                        step,
                        message: "predicate must be the final argument".into(),
                    });
                }
                let template = if tok.text.contains(BLANK) {
                    tok.text.clone()
                } else {
                    insert_canonical_blank(primitive, &tok.text)
                };
                predicate = Some(Predicate::new(template).map_err(|e| ProgramError::Syntax {
                    step,
                    message: e.to_string(),
                })?);
            } else {
                args.push(parse_plain_arg(&tok.text, step)?);
            }
        }

        calls.push(PrimitiveCall { primitive, predicate, args, step_index: step });
    }
    Program::new(calls)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::value::BaseType;

    fn pred(t: &str) -> Option<Predicate> {
        Some(Predicate::new(t).unwrap())
    }

    fn fig3_calls() -> Vec<PrimitiveCall> {
        vec![
            PrimitiveCall {
                primitive: PrimitiveId::Select,
                predicate: pred("touchdowns by Edward ___"),
                args: vec![],
                step_index: 1,
            },
            PrimitiveCall {
                primitive: PrimitiveId::Filter,
                predicate: pred("___ from the 1st quarter"),
                args: vec![Arg::Step(1)],
                step_index: 2,
            },
            PrimitiveCall {
                primitive: PrimitiveId::Count,
                predicate: None,
                args: vec![Arg::Step(2)],
                step_index: 3,
            },
        ]
    }

    fn fig3_program() -> TypedProgram {
        TypedProgram::new(
            fig3_calls(),
            vec![
                ValueType::list(BaseType::NamedEntity),
                ValueType::list(BaseType::NamedEntity),
                ValueType::scalar(BaseType::Number),
            ],
        )
    }

    #[test]
    fn pattern_signature_is_space_joined_names() {
        assert_eq!(pattern_signature(&fig3_program()), "select filter count");
    }

    #[test]
    fn single_step_signature() {
        let p = TypedProgram::new(
            vec![PrimitiveCall {
                primitive: PrimitiveId::Select,
                predicate: pred("countries ___"),
                args: vec![],
                step_index: 1,
            }],
            vec![ValueType::list(BaseType::NamedEntity)],
        );
        assert_eq!(pattern_signature(&p), "select");
    }

    #[test]
    fn signature_ignores_predicates() {
        let a = fig3_program();
        let mut calls = fig3_calls();
        calls[0].predicate = pred("touchdowns by Tom ___");
        calls[1].predicate = pred("___ from the 2nd quarter");
        let b = TypedProgram::new(calls, a.types.clone());
        assert_eq!(pattern_signature(&a), pattern_signature(&b));
    }

    #[test]
    fn fig3_renders_canonically() {
        assert_eq!(
            render_program(&fig3_program()),
            r#"select("touchdowns by Edward") ; filter(#1, "from the 1st quarter") ; count(#2)"#
        );
    }

    #[test]
    fn render_without_predicate_slot() {
        let p = TypedProgram::new(
            vec![
                PrimitiveCall {
                    primitive: PrimitiveId::Select,
                    predicate: pred("goals ___"),
                    args: vec![],
                    step_index: 1,
                },
                PrimitiveCall {
                    primitive: PrimitiveId::Count,
                    predicate: None,
                    args: vec![Arg::Step(1)],
                    step_index: 2,
                },
            ],
            vec![ValueType::list(BaseType::NamedEntity), ValueType::scalar(BaseType::Number)],
        );
        assert!(render_program(&p).ends_with("count(#1)"));
    }

    #[test]
    fn parse_inverts_render_for_fig3() {
        let p = fig3_program();
        let parsed = parse_program(&render_program(&p)).unwrap();
        assert_eq!(parsed.calls, p.calls);
    }

    #[test]
    fn parse_handles_literals() {
        let text = r#"select("values ___") ; project(#1, "score of") ; filter_a_where_b_is_compared_to(#2, >, 948768.92)"#;
        let p = parse_program(text).unwrap();
        assert_eq!(p.calls[2].primitive, PrimitiveId::FilterComparedTo);
        assert_eq!(
            p.calls[2].args,
            vec![
                Arg::Step(2),
                Arg::Lit(Literal::Cmp(Cmp::Gt)),
                Arg::Lit(Literal::Number(Num::new(948768.92).unwrap()))
            ]
        );
        assert_eq!(p.calls[1].predicate.as_ref().unwrap().template(), "score of ___");
    }

    #[test]
    fn parse_handles_date_literals() {
        let text = r#"select("when the war ended ___") ; date_difference_in_years(@1939, #1)"#;
        let p = parse_program(text).unwrap();
        assert_eq!(
            p.calls[1].args[0],
            Arg::Lit(Literal::Date(Date::year_only(1939).unwrap()))
        );
        let full = r#"select("when it started ___") ; date_difference_in_days(@"6 June 1944", #1)"#;
        let p = parse_program(full).unwrap();
        assert_eq!(
            p.calls[1].args[0],
            Arg::Lit(Literal::Date(Date::ymd(1944, 6, 6).unwrap()))
        );
    }

    #[test]
    fn mid_template_blank_survives_round_trip() {
        let calls = vec![
            PrimitiveCall {
                primitive: PrimitiveId::Select,
                predicate: pred("players ___"),
                args: vec![],
                step_index: 1,
            },
            PrimitiveCall {
                primitive: PrimitiveId::Project,
                predicate: pred("wives of ___ who are listed"),
                args: vec![Arg::Step(1)],
                step_index: 2,
            },
        ];
        let rendered = render_calls(&calls);
        assert!(rendered.contains("___"));
        let parsed = parse_program(&rendered).unwrap();
        assert_eq!(parsed.calls, calls);
    }

    #[test]
    fn forward_reference_rejected() {
        assert!(matches!(
            parse_program(r#"count(#1)"#),
            Err(ProgramError::BadReference { step: 1, reference: 1 })
        ));
    }

    #[test]
    fn predicate_quotes_escape_round_trip() {
        let calls = vec![PrimitiveCall {
            primitive: PrimitiveId::Select,
            predicate: pred(r#"things "quoted" and \slashed ___"#),
            args: vec![],
            step_index: 1,
        }];
        let parsed = parse_program(&render_calls(&calls)).unwrap();
        assert_eq!(parsed.calls, calls);
    }
}
