//! The closed registry of executable primitives.
//!
//! Every program step calls one of these primitives. The registry declares,
//! per primitive: the argument shapes (step references vs. literals and their
//! type patterns), the output type pattern, whether the step grounds a
//! predicate into facts, and how the no-op property is checked for it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::value::BaseType;

/// Comparison operator used by comparative filters and boolean comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cmp {
    Gt,
    Lt,
    Ge,
    Le,
    Eq,
}

impl Cmp {
    pub fn symbol(&self) -> &'static str {
        match self {
            Cmp::Gt => ">",
            Cmp::Lt => "<",
            Cmp::Ge => ">=",
            Cmp::Le => "<=",
            Cmp::Eq => "=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Cmp> {
        match s {
            ">" => Some(Cmp::Gt),
            "<" => Some(Cmp::Lt),
            ">=" => Some(Cmp::Ge),
            "<=" => Some(Cmp::Le),
            "=" => Some(Cmp::Eq),
            _ => None,
        }
    }

    /// Maps a comparison word ("higher", "fewer", "later", ...) to an operator.
    pub fn from_word(word: &str) -> Option<Cmp> {
        match word.to_lowercase().as_str() {
            "higher" | "larger" | "greater" | "more" | "bigger" | "later" | "longer" | "older"
            | "above" => Some(Cmp::Gt),
            "lower" | "smaller" | "less" | "fewer" | "earlier" | "shorter" | "younger" | "below" => {
                Some(Cmp::Lt)
            }
            "same" | "equal" => Some(Cmp::Eq),
            _ => None,
        }
    }

    pub fn holds(&self, ord: std::cmp::Ordering) -> bool {
        match self {
            Cmp::Gt => ord.is_gt(),
            Cmp::Lt => ord.is_lt(),
            Cmp::Ge => ord.is_ge(),
            Cmp::Le => ord.is_le(),
            Cmp::Eq => ord.is_eq(),
        }
    }
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveId {
    Select,
    Project,
    Filter,
    Boolean,
    Count,
    CountUnique,
    GroupedCount,
    GroupedSum,
    GroupedMean,
    ListSum,
    ListAverage,
    ListMax,
    ListMin,
    ArithmeticSum,
    ArithmeticDifference,
    ArithmeticMultiplication,
    ArithmeticDivision,
    FilterComparedTo,
    FilterGivenValue,
    FilterLarger,
    FilterSmaller,
    FilterAtLeast,
    FilterAtMost,
    ArgMax,
    ArgMin,
    KthHighest,
    KthLowest,
    Union,
    Intersection,
    Discard,
    SortAscending,
    SortDescending,
    DateDifferenceInYears,
    DateDifferenceInMonths,
    DateDifferenceInDays,
    LogicalAnd,
    LogicalOr,
    BooleanNegation,
    BooleanComparison,
    Exists,
    TakeKth,
    TakeLast,
    SelectLarger,
    SelectSmaller,
    /// Parse-time identity step; removed by normalization, never registered.
    Copy,
}

impl PrimitiveId {
    pub fn name(&self) -> &'static str {
        use PrimitiveId::*;
        match self {
            Select => "select",
            Project => "project",
            Filter => "filter",
            Boolean => "boolean",
            Count => "count",
            CountUnique => "count_unique",
            GroupedCount => "grouped_count",
            GroupedSum => "grouped_sum",
            GroupedMean => "grouped_mean",
            ListSum => "list_sum",
            ListAverage => "list_average",
            ListMax => "list_max",
            ListMin => "list_min",
            ArithmeticSum => "arithmetic_sum",
            ArithmeticDifference => "arithmetic_difference",
            ArithmeticMultiplication => "arithmetic_multiplication",
            ArithmeticDivision => "arithmetic_division",
            FilterComparedTo => "filter_a_where_b_is_compared_to",
            FilterGivenValue => "filter_a_where_b_is_given_value",
            FilterLarger => "filter_a_where_b_is_larger",
            FilterSmaller => "filter_a_where_b_is_smaller",
            FilterAtLeast => "filter_a_where_b_is_at_least",
            FilterAtMost => "filter_a_where_b_is_at_most",
            ArgMax => "argmax",
            ArgMin => "argmin",
            KthHighest => "kth_highest",
            KthLowest => "kth_lowest",
            Union => "union",
            Intersection => "intersection",
            Discard => "discard",
            SortAscending => "sort_ascending",
            SortDescending => "sort_descending",
            DateDifferenceInYears => "date_difference_in_years",
            DateDifferenceInMonths => "date_difference_in_months",
            DateDifferenceInDays => "date_difference_in_days",
            LogicalAnd => "logical_and",
            LogicalOr => "logical_or",
            BooleanNegation => "boolean_negation",
            BooleanComparison => "boolean_comparison",
            Exists => "exists",
            TakeKth => "take_kth",
            TakeLast => "take_last",
            SelectLarger => "select_larger",
            SelectSmaller => "select_smaller",
            Copy => "copy",
        }
    }

    pub fn from_name(name: &str) -> Option<PrimitiveId> {
        ALL_WITH_COPY.iter().copied().find(|p| p.name() == name)
    }

    pub fn is_grounding(&self) -> bool {
        matches!(self, PrimitiveId::Select | PrimitiveId::Project | PrimitiveId::Filter | PrimitiveId::Boolean)
    }

    pub fn signature(&self) -> &'static PrimitiveSignature {
        REGISTRY
            .iter()
            .find(|s| s.id == *self)
            .unwrap_or_else(|| panic!("unregistered primitive: {}", self.name()))
    }
}

impl fmt::Display for PrimitiveId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Functional family of a primitive; also keys the fact-sentence templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Grounding,
    Counting,
    GroupedAggregation,
    ListAggregation,
    Arithmetic,
    ComparativeFilter,
    Superlative,
    SetOperation,
    Sorting,
    DateArithmetic,
    BooleanLogic,
    Selection,
}

/// Base-type pattern for signature matching. `Var(n)` unifies occurrences of
/// the same variable within one signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasePat {
    Any,
    Exact(BaseType),
    /// number or date
    Ordered,
    /// named entity, number, or date (anything groupable/hashable)
    Groupable,
    Var(u8),
}

/// Type pattern for a step argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TyPat {
    Scalar(BasePat),
    List(BasePat),
    Dict(BasePat, BasePat),
    /// list or dictionary of anything
    AnyCollection,
    /// scalar or list (grounding inputs: a single entity or a list of them)
    ScalarOrList(BasePat),
}

/// Shape of one declared argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgSpec {
    /// Must be a step reference matching the pattern.
    Step(TyPat),
    /// Must be a number literal (also used for ordinal `k`).
    NumberLit,
    /// Must be a comparator literal.
    CmpLit,
    /// A step reference or a scalar literal; pattern gives the scalar type.
    StepOrLit(BasePat),
}

/// Output type pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutSpec {
    Scalar(BasePat),
    List(BasePat),
    Dict(BasePat, BasePat),
    /// Resolved by type inference (grounding primitives).
    Grounded,
}

/// How the "steps can't be no-op" property applies to this primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoOpRule {
    /// Output must differ from every dependency's value.
    Standard,
    /// Output must be a proper subset of the dependent step's value (filter).
    ProperSubset,
    /// Output coincides with an input by definition (two-valued logic /
    /// pick-one-of-two selection); the check does not apply.
    Exempt,
}

pub struct PrimitiveSignature {
    pub id: PrimitiveId,
    pub family: Family,
    pub needs_grounding: bool,
    pub args: &'static [ArgSpec],
    pub output: OutSpec,
    pub no_op: NoOpRule,
}

use ArgSpec::*;
use BasePat as B;
use TyPat::*;

/// The closed, enumerable primitive registry.
pub static REGISTRY: &[PrimitiveSignature] = &[
    PrimitiveSignature {
        id: PrimitiveId::Select,
        family: Family::Grounding,
        needs_grounding: true,
        args: &[],
        output: OutSpec::Grounded,
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::Project,
        family: Family::Grounding,
        needs_grounding: true,
        args: &[Step(ScalarOrList(B::Exact(BaseType::NamedEntity)))],
        output: OutSpec::Grounded,
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::Filter,
        family: Family::Grounding,
        needs_grounding: true,
        args: &[Step(List(B::Exact(BaseType::NamedEntity)))],
        output: OutSpec::Grounded,
        no_op: NoOpRule::ProperSubset,
    },
    PrimitiveSignature {
        id: PrimitiveId::Boolean,
        family: Family::Grounding,
        needs_grounding: true,
        args: &[Step(ScalarOrList(B::Exact(BaseType::NamedEntity)))],
        output: OutSpec::Scalar(B::Exact(BaseType::Boolean)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::Count,
        family: Family::Counting,
        needs_grounding: false,
        args: &[Step(AnyCollection)],
        output: OutSpec::Scalar(B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::CountUnique,
        family: Family::Counting,
        needs_grounding: false,
        args: &[Step(List(B::Any))],
        output: OutSpec::Scalar(B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::GroupedCount,
        family: Family::Counting,
        needs_grounding: false,
        args: &[Step(Dict(B::Var(0), B::Var(1)))],
        output: OutSpec::Dict(B::Var(1), B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::GroupedSum,
        family: Family::GroupedAggregation,
        needs_grounding: false,
        args: &[
            Step(Dict(B::Var(0), B::Exact(BaseType::Number))),
            Step(Dict(B::Var(0), B::Var(1))),
        ],
        output: OutSpec::Dict(B::Var(1), B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::GroupedMean,
        family: Family::GroupedAggregation,
        needs_grounding: false,
        args: &[
            Step(Dict(B::Var(0), B::Exact(BaseType::Number))),
            Step(Dict(B::Var(0), B::Var(1))),
        ],
        output: OutSpec::Dict(B::Var(1), B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::ListSum,
        family: Family::ListAggregation,
        needs_grounding: false,
        args: &[Step(List(B::Exact(BaseType::Number)))],
        output: OutSpec::Scalar(B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::ListAverage,
        family: Family::ListAggregation,
        needs_grounding: false,
        args: &[Step(List(B::Exact(BaseType::Number)))],
        output: OutSpec::Scalar(B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::ListMax,
        family: Family::ListAggregation,
        needs_grounding: false,
        args: &[Step(List(B::Var(0)))],
        output: OutSpec::Scalar(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::ListMin,
        family: Family::ListAggregation,
        needs_grounding: false,
        args: &[Step(List(B::Var(0)))],
        output: OutSpec::Scalar(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::ArithmeticSum,
        family: Family::Arithmetic,
        needs_grounding: false,
        args: &[StepOrLit(B::Exact(BaseType::Number)), StepOrLit(B::Exact(BaseType::Number))],
        output: OutSpec::Scalar(B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::ArithmeticDifference,
        family: Family::Arithmetic,
        needs_grounding: false,
        args: &[StepOrLit(B::Exact(BaseType::Number)), StepOrLit(B::Exact(BaseType::Number))],
        output: OutSpec::Scalar(B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::ArithmeticMultiplication,
        family: Family::Arithmetic,
        needs_grounding: false,
        args: &[StepOrLit(B::Exact(BaseType::Number)), StepOrLit(B::Exact(BaseType::Number))],
        output: OutSpec::Scalar(B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::ArithmeticDivision,
        family: Family::Arithmetic,
        needs_grounding: false,
        args: &[StepOrLit(B::Exact(BaseType::Number)), StepOrLit(B::Exact(BaseType::Number))],
        output: OutSpec::Scalar(B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::FilterComparedTo,
        family: Family::ComparativeFilter,
        needs_grounding: false,
        args: &[Step(Dict(B::Var(0), B::Var(1))), CmpLit, StepOrLit(B::Var(1))],
        output: OutSpec::List(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::FilterGivenValue,
        family: Family::ComparativeFilter,
        needs_grounding: false,
        args: &[Step(Dict(B::Var(0), B::Var(1))), StepOrLit(B::Var(1))],
        output: OutSpec::List(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::FilterLarger,
        family: Family::ComparativeFilter,
        needs_grounding: false,
        args: &[Step(Dict(B::Var(0), B::Var(1))), StepOrLit(B::Var(1))],
        output: OutSpec::List(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::FilterSmaller,
        family: Family::ComparativeFilter,
        needs_grounding: false,
        args: &[Step(Dict(B::Var(0), B::Var(1))), StepOrLit(B::Var(1))],
        output: OutSpec::List(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::FilterAtLeast,
        family: Family::ComparativeFilter,
        needs_grounding: false,
        args: &[Step(Dict(B::Var(0), B::Var(1))), StepOrLit(B::Var(1))],
        output: OutSpec::List(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::FilterAtMost,
        family: Family::ComparativeFilter,
        needs_grounding: false,
        args: &[Step(Dict(B::Var(0), B::Var(1))), StepOrLit(B::Var(1))],
        output: OutSpec::List(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::ArgMax,
        family: Family::Superlative,
        needs_grounding: false,
        args: &[Step(Dict(B::Var(0), B::Ordered))],
        output: OutSpec::List(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::ArgMin,
        family: Family::Superlative,
        needs_grounding: false,
        args: &[Step(Dict(B::Var(0), B::Ordered))],
        output: OutSpec::List(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::KthHighest,
        family: Family::Superlative,
        needs_grounding: false,
        args: &[Step(List(B::Var(0))), NumberLit],
        output: OutSpec::Scalar(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::KthLowest,
        family: Family::Superlative,
        needs_grounding: false,
        args: &[Step(List(B::Var(0))), NumberLit],
        output: OutSpec::Scalar(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::Union,
        family: Family::SetOperation,
        needs_grounding: false,
        args: &[Step(List(B::Var(0))), Step(List(B::Var(0)))],
        output: OutSpec::List(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::Intersection,
        family: Family::SetOperation,
        needs_grounding: false,
        args: &[Step(List(B::Var(0))), Step(List(B::Var(0)))],
        output: OutSpec::List(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::Discard,
        family: Family::SetOperation,
        needs_grounding: false,
        args: &[Step(List(B::Var(0))), Step(List(B::Var(0)))],
        output: OutSpec::List(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::SortAscending,
        family: Family::Sorting,
        needs_grounding: false,
        args: &[Step(List(B::Var(0)))],
        output: OutSpec::List(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::SortDescending,
        family: Family::Sorting,
        needs_grounding: false,
        args: &[Step(List(B::Var(0)))],
        output: OutSpec::List(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::DateDifferenceInYears,
        family: Family::DateArithmetic,
        needs_grounding: false,
        args: &[StepOrLit(B::Exact(BaseType::Date)), StepOrLit(B::Exact(BaseType::Date))],
        output: OutSpec::Scalar(B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::DateDifferenceInMonths,
        family: Family::DateArithmetic,
        needs_grounding: false,
        args: &[StepOrLit(B::Exact(BaseType::Date)), StepOrLit(B::Exact(BaseType::Date))],
        output: OutSpec::Scalar(B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::DateDifferenceInDays,
        family: Family::DateArithmetic,
        needs_grounding: false,
        args: &[StepOrLit(B::Exact(BaseType::Date)), StepOrLit(B::Exact(BaseType::Date))],
        output: OutSpec::Scalar(B::Exact(BaseType::Number)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::LogicalAnd,
        family: Family::BooleanLogic,
        needs_grounding: false,
        args: &[
            Step(Scalar(B::Exact(BaseType::Boolean))),
            Step(Scalar(B::Exact(BaseType::Boolean))),
        ],
        output: OutSpec::Scalar(B::Exact(BaseType::Boolean)),
        no_op: NoOpRule::Exempt,
    },
    PrimitiveSignature {
        id: PrimitiveId::LogicalOr,
        family: Family::BooleanLogic,
        needs_grounding: false,
        args: &[
            Step(Scalar(B::Exact(BaseType::Boolean))),
            Step(Scalar(B::Exact(BaseType::Boolean))),
        ],
        output: OutSpec::Scalar(B::Exact(BaseType::Boolean)),
        no_op: NoOpRule::Exempt,
    },
    PrimitiveSignature {
        id: PrimitiveId::BooleanNegation,
        family: Family::BooleanLogic,
        needs_grounding: false,
        args: &[Step(Scalar(B::Exact(BaseType::Boolean)))],
        output: OutSpec::Scalar(B::Exact(BaseType::Boolean)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::BooleanComparison,
        family: Family::BooleanLogic,
        needs_grounding: false,
        args: &[StepOrLit(B::Var(0)), CmpLit, StepOrLit(B::Var(0))],
        output: OutSpec::Scalar(B::Exact(BaseType::Boolean)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::Exists,
        family: Family::BooleanLogic,
        needs_grounding: false,
        args: &[Step(AnyCollection)],
        output: OutSpec::Scalar(B::Exact(BaseType::Boolean)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::TakeKth,
        family: Family::Selection,
        needs_grounding: false,
        args: &[Step(List(B::Var(0))), NumberLit],
        output: OutSpec::Scalar(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::TakeLast,
        family: Family::Selection,
        needs_grounding: false,
        args: &[Step(List(B::Var(0)))],
        output: OutSpec::Scalar(B::Var(0)),
        no_op: NoOpRule::Standard,
    },
    PrimitiveSignature {
        id: PrimitiveId::SelectLarger,
        family: Family::Selection,
        needs_grounding: false,
        args: &[StepOrLit(B::Var(0)), StepOrLit(B::Var(0))],
        output: OutSpec::Scalar(B::Var(0)),
        no_op: NoOpRule::Exempt,
    },
    PrimitiveSignature {
        id: PrimitiveId::SelectSmaller,
        family: Family::Selection,
        needs_grounding: false,
        args: &[StepOrLit(B::Var(0)), StepOrLit(B::Var(0))],
        output: OutSpec::Scalar(B::Var(0)),
        no_op: NoOpRule::Exempt,
    },
];

/// All registered primitives (44 entries; `copy` is parse-time only).
pub fn registered_primitives() -> impl Iterator<Item = PrimitiveId> {
    REGISTRY.iter().map(|s| s.id)
}

const ALL_WITH_COPY: &[PrimitiveId] = &[
    PrimitiveId::Select,
    PrimitiveId::Project,
    PrimitiveId::Filter,
    PrimitiveId::Boolean,
    PrimitiveId::Count,
    PrimitiveId::CountUnique,
    PrimitiveId::GroupedCount,
    PrimitiveId::GroupedSum,
    PrimitiveId::GroupedMean,
    PrimitiveId::ListSum,
    PrimitiveId::ListAverage,
    PrimitiveId::ListMax,
    PrimitiveId::ListMin,
    PrimitiveId::ArithmeticSum,
    PrimitiveId::ArithmeticDifference,
    PrimitiveId::ArithmeticMultiplication,
    PrimitiveId::ArithmeticDivision,
    PrimitiveId::FilterComparedTo,
    PrimitiveId::FilterGivenValue,
    PrimitiveId::FilterLarger,
    PrimitiveId::FilterSmaller,
    PrimitiveId::FilterAtLeast,
    PrimitiveId::FilterAtMost,
    PrimitiveId::ArgMax,
    PrimitiveId::ArgMin,
    PrimitiveId::KthHighest,
    PrimitiveId::KthLowest,
    PrimitiveId::Union,
    PrimitiveId::Intersection,
    PrimitiveId::Discard,
    PrimitiveId::SortAscending,
    PrimitiveId::SortDescending,
    PrimitiveId::DateDifferenceInYears,
    PrimitiveId::DateDifferenceInMonths,
    PrimitiveId::DateDifferenceInDays,
    PrimitiveId::LogicalAnd,
    PrimitiveId::LogicalOr,
    PrimitiveId::BooleanNegation,
    PrimitiveId::BooleanComparison,
    PrimitiveId::Exists,
    PrimitiveId::TakeKth,
    PrimitiveId::TakeLast,
    PrimitiveId::SelectLarger,
    PrimitiveId::SelectSmaller,
    PrimitiveId::Copy,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_has_at_least_44_primitives() {
        assert!(REGISTRY.len() >= 44, "registry has {} entries", REGISTRY.len());
    }

    #[test]
    fn registry_ids_are_unique_and_named() {
        let mut names: Vec<&str> = REGISTRY.iter().map(|s| s.id.name()).collect();
        names.sort_unstable();
        let before = names.len();
        names.dedup();
        assert_eq!(before, names.len());
    }

    #[test]
    fn copy_is_not_registered() {
        assert!(REGISTRY.iter().all(|s| s.id != PrimitiveId::Copy));
        assert_eq!(PrimitiveId::from_name("copy"), Some(PrimitiveId::Copy));
    }

    #[test]
    fn names_round_trip() {
        for sig in REGISTRY {
            assert_eq!(PrimitiveId::from_name(sig.id.name()), Some(sig.id));
        }
    }

    #[test]
    fn grounding_flags_match_family() {
        for sig in REGISTRY {
            assert_eq!(sig.needs_grounding, sig.id.is_grounding());
            if sig.needs_grounding {
                assert_eq!(sig.family, Family::Grounding);
            }
        }
    }

    #[test]
    fn required_families_present() {
        use PrimitiveId::*;
        for p in [
            Select, Project, Filter, Boolean, Count, GroupedCount, ListSum, ListAverage, ListMax,
            ListMin, ArithmeticSum, ArithmeticDifference, ArithmeticMultiplication,
            ArithmeticDivision, FilterComparedTo, ArgMax, ArgMin, KthHighest, KthLowest, Union,
            Intersection, Discard, SortAscending, SortDescending, DateDifferenceInYears,
            DateDifferenceInDays, LogicalAnd, LogicalOr, BooleanComparison, Exists, TakeKth,
            SelectLarger, SelectSmaller,
        ] {
            assert!(REGISTRY.iter().any(|s| s.id == p), "missing {}", p.name());
        }
    }

    #[test]
    fn comparator_words_map_to_operators() {
        assert_eq!(Cmp::from_word("higher"), Some(Cmp::Gt));
        assert_eq!(Cmp::from_word("fewer"), Some(Cmp::Lt));
        assert_eq!(Cmp::from_word("same"), Some(Cmp::Eq));
        assert_eq!(Cmp::from_word("quickly"), None);
    }
}
