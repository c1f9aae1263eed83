//! Type inference: assigns a `ValueType` to every program step.
//!
//! Types come from three sources, strongest first: primitive signatures
//! (consumers constrain producers — an arithmetic consumer forces a
//! number-typed select), keyword heuristics over grounding predicates
//! ("number of" is a scalar number, "when" a date, a plural head noun a
//! list), and defaults (an otherwise unconstrained grounding step is a list
//! of named entities). A signature/keyword clash is an error carrying both
//! origins, never silently resolved. Propagation is a monotone fixed point:
//! fields only move from unknown to known, so it terminates.

use std::fmt;

use thiserror::Error;

use crate::predicate::Predicate;
use crate::program::{Arg, Literal, PrimitiveCall, Program, TypedProgram};
use crate::registry::{ArgSpec, BasePat, OutSpec, PrimitiveId, TyPat};
use crate::value::{BaseType, Structure, ValueType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Signature,
    KeywordHeuristic,
    Default,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Origin::Signature => "signature",
            Origin::KeywordHeuristic => "keyword heuristic",
            Origin::Default => "default",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeError {
    #[error("step {step}: {field} is {have} (from {have_origin}) but {want} is required (from {want_origin})")]
    Conflict {
        step: usize,
        field: &'static str,
        have: String,
        have_origin: Origin,
        want: String,
        want_origin: Origin,
    },
    #[error("step {step} ({primitive}): expected {expected} arguments, got {got}")]
    Arity { step: usize, primitive: PrimitiveId, expected: usize, got: usize },
    #[error("step {step}: argument {position} must be {expected}")]
    ArgKind { step: usize, position: usize, expected: &'static str },
    #[error("step {step}: type could not be resolved")]
    Unresolved { step: usize },
    #[error("step {step}: copy steps must be normalized away before type inference")]
    CopyPresent { step: usize },
}

/// Which field of a step's type a constraint touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Base,
    Key,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Site {
    step: usize,
    field: Field,
}

/// Allowed base kinds for a site, used both as a check and to bias defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BaseDomain {
    /// number or date
    Ordered,
    /// named entity, number, or date
    Groupable,
}

impl BaseDomain {
    fn allows(&self, b: BaseType) -> bool {
        match self {
            BaseDomain::Ordered => matches!(b, BaseType::Number | BaseType::Date),
            BaseDomain::Groupable => {
                matches!(b, BaseType::Number | BaseType::Date | BaseType::NamedEntity)
            }
        }
    }
}

#[derive(Debug, Default, Clone)]
struct Cell {
    base: Option<(BaseType, Origin)>,
    structure: Option<(Structure, Origin)>,
    key: Option<(BaseType, Origin)>,
}

struct Solver {
    cells: Vec<Cell>,
    /// Pairs of sites whose base kinds must agree.
    equalities: Vec<(Site, Site)>,
    base_domains: Vec<(Site, BaseDomain)>,
    /// Allowed structures per step (e.g. scalar-or-list grounding inputs).
    struct_domains: Vec<(usize, &'static [Structure])>,
}

impl Solver {
    fn new(n: usize) -> Self {
        Solver {
            cells: vec![Cell::default(); n],
            equalities: vec![],
            base_domains: vec![],
            struct_domains: vec![],
        }
    }

    fn get(&self, site: Site) -> Option<(BaseType, Origin)> {
        let cell = &self.cells[site.step - 1];
        match site.field {
            Field::Base => cell.base,
            Field::Key => cell.key,
        }
    }

    fn field_name(site: Site) -> &'static str {
        match site.field {
            Field::Base => "base type",
            Field::Key => "key type",
        }
    }

    fn assign_base(&mut self, site: Site, value: BaseType, origin: Origin) -> Result<bool, TypeError> {
        match self.get(site) {
            Some((have, have_origin)) => {
                if have == value {
                    Ok(false)
                } else {
                    Err(TypeError::Conflict {
                        step: site.step,
                        field: Self::field_name(site),
                        have: have.to_string(),
                        have_origin,
                        want: value.to_string(),
                        want_origin: origin,
                    })
                }
            }
            None => {
                let cell = &mut self.cells[site.step - 1];
                match site.field {
                    Field::Base => cell.base = Some((value, origin)),
                    Field::Key => cell.key = Some((value, origin)),
                }
                Ok(true)
            }
        }
    }

    fn assign_struct(&mut self, step: usize, value: Structure, origin: Origin) -> Result<bool, TypeError> {
        let cell = &mut self.cells[step - 1];
        match cell.structure {
            Some((have, have_origin)) => {
                if have == value {
                    Ok(false)
                } else {
                    Err(TypeError::Conflict {
                        step,
                        field: "structure",
                        have: have.to_string(),
                        have_origin,
                        want: value.to_string(),
                        want_origin: origin,
                    })
                }
            }
            None => {
                cell.structure = Some((value, origin));
                Ok(true)
            }
        }
    }

    /// Propagates equalities until nothing changes. Monotone: fields only go
    /// from unknown to known, so at most 2n assignments happen overall.
    fn propagate(&mut self) -> Result<(), TypeError> {
        loop {
            let mut changed = false;
            for i in 0..self.equalities.len() {
                let (a, b) = self.equalities[i];
                match (self.get(a), self.get(b)) {
                    (Some((va, oa)), None) => {
                        self.assign_base(b, va, oa)?;
                        changed = true;
                    }
                    (None, Some((vb, ob))) => {
                        self.assign_base(a, vb, ob)?;
                        changed = true;
                    }
                    (Some((va, oa)), Some((vb, _))) if va != vb => {
                        // Surface via assign for a consistent error shape.
                        self.assign_base(b, va, oa)?;
                    }
                    _ => {}
                }
            }
            if !changed {
                return Ok(());
            }
        }
    }
}

/// Lexical type cues over a grounding predicate.
///
/// Returns `(base, structure)` when the surface form is informative: numeric
/// or temporal prefixes give scalar number/date; the head noun decides the
/// base otherwise, with a plural head giving a list.
pub fn keyword_type_hint(predicate: &Predicate) -> Option<(BaseType, Structure)> {
    let text = predicate.text_without_blank();
    let lower = text.to_lowercase();
    if lower.is_empty() {
        return None;
    }

    const NUMBER_PREFIXES: &[&str] =
        &["number of ", "how many ", "how much ", "amount of ", "count of ", "total of ", "percentage of "];
    const DATE_PREFIXES: &[&str] =
        &["when ", "what year ", "what date ", "what day ", "date of ", "year of ", "day of ", "month of "];
    for p in NUMBER_PREFIXES {
        if lower.starts_with(p) {
            return Some((BaseType::Number, Structure::Scalar));
        }
    }
    for p in DATE_PREFIXES {
        if lower.starts_with(p) {
            return Some((BaseType::Date, Structure::Scalar));
        }
    }

    // Head noun phrase: the segment before the first relational word. The
    // padding catches break words sitting at the end of the text.
    const SEGMENT_BREAKS: &[&str] =
        &[" of ", " in ", " by ", " from ", " for ", " that ", " who ", " which ", " with ", " on ", " at "];
    let padded = format!("{lower} ");
    let mut head_end = padded.len();
    for brk in SEGMENT_BREAKS {
        if let Some(pos) = padded.find(brk) {
            head_end = head_end.min(pos);
        }
    }
    let head = padded[..head_end].trim_start_matches("the ").trim();
    if head.is_empty() {
        return None;
    }

    const NUMERIC_NOUNS: &[&str] = &[
        "number", "numbers", "yard", "yards", "yard line", "yard lines", "point", "points",
        "score", "scores", "total", "totals", "amount", "amounts", "age", "ages", "value",
        "values", "price", "prices", "cost", "costs", "size", "sizes", "height", "heights",
        "length", "lengths", "population", "populations", "percent", "percentage", "percentages",
        "count", "counts", "rating", "ratings", "speed", "speeds", "weight", "weights",
        "temperature", "temperatures", "distance", "distances", "tally", "tallies",
    ];
    const DATE_NOUNS: &[&str] = &[
        "year", "years", "date", "dates", "day", "days", "month", "months", "birthday",
        "birthdays", "anniversary", "anniversaries",
    ];
    // Singular nouns that end in 's'.
    const PLURAL_EXCEPTIONS: &[&str] =
        &["status", "atlas", "bus", "gas", "lens", "series", "species", "news"];

    let first_word = head.split(' ').next().unwrap_or(head);
    let last_word = head.rsplit(' ').next().unwrap_or(head);
    let known = |lex: &[&str]| {
        lex.contains(&head) || lex.contains(&last_word) || lex.contains(&first_word)
    };
    let plural_word = |w: &str| w.ends_with('s') && w.len() > 2 && !PLURAL_EXCEPTIONS.contains(&w);
    let structure = if plural_word(first_word) || plural_word(last_word) {
        Structure::List
    } else {
        Structure::Scalar
    };

    if known(NUMERIC_NOUNS) {
        Some((BaseType::Number, structure))
    } else if known(DATE_NOUNS) {
        Some((BaseType::Date, structure))
    } else if structure == Structure::List {
        // Entity-denoting plural with no numeric or temporal cue.
        Some((BaseType::NamedEntity, Structure::List))
    } else {
        // A bare singular head is uninformative; leave it to propagation.
        None
    }
}

fn lit_base(lit: &Literal) -> BaseType {
    match lit {
        Literal::Number(_) => BaseType::Number,
        Literal::Date(_) => BaseType::Date,
        Literal::Cmp(_) => unreachable!("comparators carry no base type"),
    }
}

struct CallPlan<'a> {
    call: &'a PrimitiveCall,
    step: usize,
}

/// Collects signature-derived constraints for one call into the solver.
fn apply_signature(solver: &mut Solver, plan: &CallPlan<'_>) -> Result<(), TypeError> {
    let step = plan.step;
    let call = plan.call;
    let sig = call.primitive.signature();

    if call.args.len() != sig.args.len() {
        return Err(TypeError::Arity {
            step,
            primitive: call.primitive,
            expected: sig.args.len(),
            got: call.args.len(),
        });
    }

    // Per-call type-variable sites; vars unify base kinds across sites.
    let mut var_sites: Vec<(u8, Site)> = vec![];
    let mut var_known: Vec<(u8, BaseType)> = vec![];

    let bind = |solver: &mut Solver,
                    var_sites: &mut Vec<(u8, Site)>,
                    site: Site,
                    pat: BasePat|
     -> Result<(), TypeError> {
        match pat {
            BasePat::Any => Ok(()),
            BasePat::Exact(b) => solver.assign_base(site, b, Origin::Signature).map(|_| ()),
            BasePat::Ordered => {
                solver.base_domains.push((site, BaseDomain::Ordered));
                Ok(())
            }
            BasePat::Groupable => {
                solver.base_domains.push((site, BaseDomain::Groupable));
                Ok(())
            }
            BasePat::Var(v) => {
                var_sites.push((v, site));
                Ok(())
            }
        }
    };

    for (pos, (arg, spec)) in call.args.iter().zip(sig.args.iter()).enumerate() {
        match (arg, spec) {
            (Arg::Step(r), ArgSpec::Step(pat)) => {
                let r = *r;
                match pat {
                    TyPat::Scalar(bp) => {
                        solver.assign_struct(r, Structure::Scalar, Origin::Signature)?;
                        bind(solver, &mut var_sites, Site { step: r, field: Field::Base }, *bp)?;
                    }
                    TyPat::List(bp) => {
                        solver.assign_struct(r, Structure::List, Origin::Signature)?;
                        bind(solver, &mut var_sites, Site { step: r, field: Field::Base }, *bp)?;
                    }
                    TyPat::Dict(kp, vp) => {
                        solver.assign_struct(r, Structure::Dictionary, Origin::Signature)?;
                        bind(solver, &mut var_sites, Site { step: r, field: Field::Key }, *kp)?;
                        bind(solver, &mut var_sites, Site { step: r, field: Field::Base }, *vp)?;
                    }
                    TyPat::AnyCollection => {
                        solver.struct_domains.push((r, &[Structure::List, Structure::Dictionary]));
                    }
                    TyPat::ScalarOrList(bp) => {
                        solver.struct_domains.push((r, &[Structure::Scalar, Structure::List]));
                        bind(solver, &mut var_sites, Site { step: r, field: Field::Base }, *bp)?;
                    }
                }
            }
            (Arg::Step(r), ArgSpec::StepOrLit(bp)) => {
                solver.assign_struct(*r, Structure::Scalar, Origin::Signature)?;
                bind(solver, &mut var_sites, Site { step: *r, field: Field::Base }, *bp)?;
            }
            (Arg::Lit(lit), ArgSpec::StepOrLit(bp)) => {
                if matches!(lit, Literal::Cmp(_)) {
                    return Err(TypeError::ArgKind { step, position: pos + 1, expected: "a value" });
                }
                match bp {
                    BasePat::Var(v) => var_known.push((*v, lit_base(lit))),
                    BasePat::Exact(b) if *b != lit_base(lit) => {
                        return Err(TypeError::ArgKind {
                            step,
                            position: pos + 1,
                            expected: match b {
                                BaseType::Number => "a number literal",
                                BaseType::Date => "a date literal",
                                _ => "a literal",
                            },
                        })
                    }
                    _ => {}
                }
            }
            (Arg::Lit(Literal::Number(_)), ArgSpec::NumberLit) => {}
            (Arg::Lit(Literal::Cmp(_)), ArgSpec::CmpLit) => {}
            (Arg::Step(_), ArgSpec::NumberLit) | (Arg::Lit(_), ArgSpec::NumberLit) => {
                return Err(TypeError::ArgKind { step, position: pos + 1, expected: "a number literal" })
            }
            (_, ArgSpec::CmpLit) => {
                return Err(TypeError::ArgKind { step, position: pos + 1, expected: "a comparator" })
            }
            (Arg::Lit(_), ArgSpec::Step(_)) => {
                return Err(TypeError::ArgKind { step, position: pos + 1, expected: "a step reference" })
            }
        }
    }

    match sig.output {
        OutSpec::Scalar(bp) => {
            solver.assign_struct(step, Structure::Scalar, Origin::Signature)?;
            bind(solver, &mut var_sites, Site { step, field: Field::Base }, bp)?;
        }
        OutSpec::List(bp) => {
            solver.assign_struct(step, Structure::List, Origin::Signature)?;
            bind(solver, &mut var_sites, Site { step, field: Field::Base }, bp)?;
        }
        OutSpec::Dict(kp, vp) => {
            solver.assign_struct(step, Structure::Dictionary, Origin::Signature)?;
            bind(solver, &mut var_sites, Site { step, field: Field::Key }, kp)?;
            bind(solver, &mut var_sites, Site { step, field: Field::Base }, vp)?;
        }
        OutSpec::Grounded => {}
    }

    // Chain equalities between sites of the same variable; seed known bases.
    for v in 0..4u8 {
        let sites: Vec<Site> = var_sites.iter().filter(|(w, _)| *w == v).map(|(_, s)| *s).collect();
        for pair in sites.windows(2) {
            solver.equalities.push((pair[0], pair[1]));
        }
        for (w, b) in &var_known {
            if *w == v {
                if let Some(first) = sites.first() {
                    solver.assign_base(*first, *b, Origin::Signature)?;
                }
            }
        }
    }

    Ok(())
}

/// Infers a type for every step of a normalized program.
///
/// The question text contributes a prefix cue for the final step when that
/// step is itself a grounding step (e.g. a "how many ..." question forces a
/// numeric final selection).
pub fn infer_types(program: &Program, question_text: &str) -> Result<TypedProgram, TypeError> {
    program.validate().map_err(|e| match &e {
        crate::program::ProgramError::BadReference { step, .. } => TypeError::Unresolved { step: *step },
        _ => TypeError::Unresolved { step: 0 },
    })?;
    for call in &program.calls {
        if call.primitive == PrimitiveId::Copy {
            return Err(TypeError::CopyPresent { step: call.step_index });
        }
    }

    let n = program.calls.len();
    let mut solver = Solver::new(n);

    // Phase 1: signature constraints, then propagate.
    for (i, call) in program.calls.iter().enumerate() {
        apply_signature(&mut solver, &CallPlan { call, step: i + 1 })?;
    }
    solver.propagate()?;

    // Phase 2: keyword heuristics on grounding predicates.
    for (i, call) in program.calls.iter().enumerate() {
        let step = i + 1;
        match call.primitive {
            PrimitiveId::Select => {
                if let Some(pred) = &call.predicate {
                    if let Some((base, structure)) = keyword_type_hint(pred) {
                        solver.assign_base(
                            Site { step, field: Field::Base },
                            base,
                            Origin::KeywordHeuristic,
                        )?;
                        solver.assign_struct(step, structure, Origin::KeywordHeuristic)?;
                    }
                }
            }
            PrimitiveId::Project => {
                // Structure comes from consumer demand or the input; only the
                // base kind is taken from the surface form.
                if let Some(pred) = &call.predicate {
                    if let Some((base, _)) = keyword_type_hint(pred) {
                        solver.assign_base(
                            Site { step, field: Field::Base },
                            base,
                            Origin::KeywordHeuristic,
                        )?;
                    }
                }
            }
            _ => {}
        }
    }
    // Question-level cue for a grounding final step.
    if let Some(last) = program.calls.last() {
        if matches!(last.primitive, PrimitiveId::Select | PrimitiveId::Project) {
            let lower = question_text.to_lowercase();
            if (lower.starts_with("how many") || lower.starts_with("how much"))
                && solver.cells[n - 1].base.is_none()
            {
                solver.assign_base(
                    Site { step: n, field: Field::Base },
                    BaseType::Number,
                    Origin::KeywordHeuristic,
                )?;
            }
        }
    }
    solver.propagate()?;

    // Phase 3: defaults, in step order so producers resolve before consumers.
    for (i, call) in program.calls.iter().enumerate() {
        let step = i + 1;
        match call.primitive {
            PrimitiveId::Select => {
                if solver.cells[i].base.is_none() {
                    let ordered = solver
                        .base_domains
                        .iter()
                        .any(|(s, d)| s.step == step && *d == BaseDomain::Ordered);
                    let base = if ordered { BaseType::Number } else { BaseType::NamedEntity };
                    solver.assign_base(Site { step, field: Field::Base }, base, Origin::Default)?;
                }
                if solver.cells[i].structure.is_none() {
                    solver.assign_struct(step, Structure::List, Origin::Default)?;
                }
            }
            PrimitiveId::Project => {
                let input = call.args.first().and_then(Arg::as_step).unwrap_or(0);
                if solver.cells[i].structure.is_none() {
                    let input_structure =
                        solver.cells[input - 1].structure.map(|(s, _)| s).unwrap_or(Structure::List);
                    let structure = match input_structure {
                        Structure::Scalar => Structure::Scalar,
                        _ => Structure::List,
                    };
                    solver.assign_struct(step, structure, Origin::Default)?;
                }
                if solver.cells[i].base.is_none() {
                    let ordered = solver
                        .base_domains
                        .iter()
                        .any(|(s, d)| s.step == step && s.field == Field::Base && *d == BaseDomain::Ordered);
                    let base = if ordered { BaseType::Number } else { BaseType::NamedEntity };
                    solver.assign_base(Site { step, field: Field::Base }, base, Origin::Default)?;
                }
                // A dictionary projection is keyed by its input entities.
                if solver.cells[i].structure == Some((Structure::Dictionary, Origin::Signature))
                    || matches!(solver.cells[i].structure, Some((Structure::Dictionary, _)))
                {
                    if solver.cells[i].key.is_none() {
                        let key = solver.cells[input - 1].base.map(|(b, _)| b).unwrap_or(BaseType::NamedEntity);
                        solver.assign_base(Site { step, field: Field::Key }, key, Origin::Default)?;
                    }
                }
            }
            PrimitiveId::Filter => {
                // filter output mirrors its (entity list) input.
                if solver.cells[i].base.is_none() {
                    solver.assign_base(
                        Site { step, field: Field::Base },
                        BaseType::NamedEntity,
                        Origin::Default,
                    )?;
                }
                if solver.cells[i].structure.is_none() {
                    solver.assign_struct(step, Structure::List, Origin::Default)?;
                }
                if let Some(input) = call.args.first().and_then(Arg::as_step) {
                    if solver.cells[input - 1].base.is_none() {
                        solver.assign_base(
                            Site { step: input, field: Field::Base },
                            BaseType::NamedEntity,
                            Origin::Default,
                        )?;
                    }
                    if solver.cells[input - 1].structure.is_none() {
                        solver.assign_struct(input, Structure::List, Origin::Default)?;
                    }
                }
            }
            _ => {}
        }
        solver.propagate()?;
    }
    // Grounding inputs that are still structurally open (boolean/project over
    // an unconstrained select) default to lists of named entities.
    for i in 0..n {
        let step = i + 1;
        if solver.cells[i].base.is_none() {
            solver.assign_base(Site { step, field: Field::Base }, BaseType::NamedEntity, Origin::Default)?;
        }
        if solver.cells[i].structure.is_none() {
            solver.assign_struct(step, Structure::List, Origin::Default)?;
        }
    }
    solver.propagate()?;

    // Domain checks.
    for (site, domain) in &solver.base_domains {
        if let Some((b, origin)) = solver.get(*site) {
            if !domain.allows(b) {
                return Err(TypeError::Conflict {
                    step: site.step,
                    field: Solver::field_name(*site),
                    have: b.to_string(),
                    have_origin: origin,
                    want: match domain {
                        BaseDomain::Ordered => "number or date".to_string(),
                        BaseDomain::Groupable => "entity, number, or date".to_string(),
                    },
                    want_origin: Origin::Signature,
                });
            }
        }
    }
    for (step, allowed) in &solver.struct_domains {
        if let Some((s, origin)) = solver.cells[step - 1].structure {
            if !allowed.contains(&s) {
                return Err(TypeError::Conflict {
                    step: *step,
                    field: "structure",
                    have: s.to_string(),
                    have_origin: origin,
                    want: allowed.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" or "),
                    want_origin: Origin::Signature,
                });
            }
        }
    }

    // Assemble.
    let mut types = vec![];
    for (i, cell) in solver.cells.iter().enumerate() {
        let step = i + 1;
        let (base, _) = cell.base.ok_or(TypeError::Unresolved { step })?;
        let (structure, _) = cell.structure.ok_or(TypeError::Unresolved { step })?;
        let key = match structure {
            Structure::Dictionary => {
                Some(cell.key.map(|(k, _)| k).unwrap_or(BaseType::NamedEntity))
            }
            _ => None,
        };
        types.push(ValueType { base, structure, key });
    }

    Ok(TypedProgram::new(program.calls.clone(), types))
}

/// One line per step: `step<TAB>primitive<TAB>base/structure`.
pub fn type_dump(program: &TypedProgram) -> String {
    program
        .calls
        .iter()
        .zip(program.types.iter())
        .map(|(call, ty)| format!("{}\t{}\t{}", call.step_index, call.primitive.name(), ty))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{Decomposition, Level};
    use crate::parser::{parse_and_normalize, RuleTable};

    fn typed(question: &str, steps: &[&str]) -> TypedProgram {
        let d = Decomposition::new(
            "q1",
            question,
            steps.iter().map(|s| s.to_string()).collect(),
            Level::Low,
            "TEST",
        )
        .unwrap();
        let p = parse_and_normalize(&d, RuleTable::default_table()).unwrap();
        infer_types(&p, question).unwrap()
    }

    #[test]
    fn numeric_select_is_scalar_number() {
        let tp = typed(
            "By how much is the army short of 100 soldiers?",
            &["return number of soldiers in USA", "return the difference of 100 and #1"],
        );
        assert_eq!(tp.types[0], ValueType::scalar(BaseType::Number));
        assert_eq!(tp.types[1], ValueType::scalar(BaseType::Number));
    }

    #[test]
    fn temporal_select_is_scalar_date() {
        let tp = typed(
            "How many years ago did India get independence?",
            &[
                "return when did India get independence",
                "return the difference in years between 2022 and #1",
            ],
        );
        assert_eq!(tp.types[0], ValueType::scalar(BaseType::Date));
        assert_eq!(tp.types[1], ValueType::scalar(BaseType::Number));
    }

    #[test]
    fn plural_entity_select_is_entity_list() {
        let tp = typed(
            "How many countries surround India?",
            &["return countries surrounding India", "return the number of #1"],
        );
        assert_eq!(tp.types[0], ValueType::list(BaseType::NamedEntity));
        assert_eq!(tp.types[1], ValueType::scalar(BaseType::Number));
    }

    #[test]
    fn keyword_hint_examples() {
        let p = |t: &str| Predicate::new(t).unwrap();
        assert_eq!(
            keyword_type_hint(&p("number of soldiers in USA ___")),
            Some((BaseType::Number, Structure::Scalar))
        );
        assert_eq!(
            keyword_type_hint(&p("yard lines of ___")),
            Some((BaseType::Number, Structure::List))
        );
        assert_eq!(
            keyword_type_hint(&p("touchdowns by Edward ___")),
            Some((BaseType::NamedEntity, Structure::List))
        );
        assert_eq!(
            keyword_type_hint(&p("when did India get independence ___")),
            Some((BaseType::Date, Structure::Scalar))
        );
    }

    #[test]
    fn grouped_count_chain_types_resolve() {
        let tp = typed(
            "From what yard line did Shayne kick two field goals?",
            &[
                "return field goals of Shayne Graham",
                "return yard lines of #1",
                "return the number of #2 for each #1",
                "return #2 where #3 is two",
            ],
        );
        // select: entity list; project: dict entity -> number (demanded by
        // grouped_count); grouped_count: dict number -> number; filter by
        // given value returns the keys of its dict input.
        assert_eq!(tp.types[0], ValueType::list(BaseType::NamedEntity));
        assert_eq!(tp.types[1], ValueType::dictionary(BaseType::NamedEntity, BaseType::Number));
        assert_eq!(tp.types[2], ValueType::dictionary(BaseType::Number, BaseType::Number));
        assert_eq!(tp.types[3], ValueType::list(BaseType::Number));
    }

    #[test]
    fn consumer_forces_producer_scalar_number() {
        // The arithmetic consumer forces both selects scalar-number even
        // without numeric keywords.
        let tp = typed(
            "What is the sum of the home tally and the away tally?",
            &["return home tally", "return away tally", "return the sum of #1 and #2"],
        );
        assert_eq!(tp.types[0], ValueType::scalar(BaseType::Number));
        assert_eq!(tp.types[1], ValueType::scalar(BaseType::Number));
    }

    #[test]
    fn boolean_final_step_types() {
        let tp = typed(
            "Were there more goals by Mia than by Sam?",
            &[
                "return number of goals by Mia",
                "return number of goals by Sam",
                "return if #1 is higher than #2",
            ],
        );
        assert_eq!(tp.types[2], ValueType::scalar(BaseType::Boolean));
    }

    #[test]
    fn keyword_signature_clash_is_error() {
        // "number of X" hints scalar, but count requires a collection.
        let d = Decomposition::new(
            "q1",
            "q",
            vec!["return number of soldiers in USA".into(), "return the number of #1".into()],
            Level::Low,
            "TEST",
        )
        .unwrap();
        let p = parse_and_normalize(&d, RuleTable::default_table()).unwrap();
        let err = infer_types(&p, "q").unwrap_err();
        assert!(matches!(err, TypeError::Conflict { .. }), "got {err:?}");
    }

    #[test]
    fn determinism() {
        let steps =
            &["return field goals of Shayne", "return yard lines of #1", "return the sum of #2"];
        let a = typed("q", steps);
        let b = typed("q", steps);
        assert_eq!(a.types, b.types);
    }

    #[test]
    fn type_dump_format() {
        let tp = typed("q", &["return countries", "return the number of #1"]);
        let dump = type_dump(&tp);
        assert_eq!(dump, "1\tselect\tnamed_entity/list\n2\tcount\tnumber/scalar");
    }
}
