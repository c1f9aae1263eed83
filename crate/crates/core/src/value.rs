//! Runtime values and value types.
//!
//! Values come in four base kinds (number, date, named entity, boolean) and
//! three structures (scalar, list, dictionary). Generated values obey the
//! corpus ranges: numbers in `[0, 1_000_000]`, years in `[1100, 2022]`,
//! entity names matching `^[A-Z]{3}$`. Computed values (e.g. a difference of
//! two generated numbers) may leave the generation range; the range checks
//! live in the checked constructors used by the samplers.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUMBER_MIN: f64 = 0.0;
pub const NUMBER_MAX: f64 = 1_000_000.0;
pub const YEAR_MIN: i32 = 1100;
pub const YEAR_MAX: i32 = 2022;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValueError {
    #[error("number out of generation range [0, 1e6]: {0}")]
    NumberOutOfRange(String),
    #[error("number is not finite")]
    NotFinite,
    #[error("year out of range [1100, 2022]: {0}")]
    YearOutOfRange(i32),
    #[error("invalid calendar date: {0}-{1}-{2}")]
    BadCalendarDate(i32, u8, u8),
    #[error("entity name must be exactly 3 uppercase ASCII letters: {0:?}")]
    BadEntityName(String),
    #[error("cannot parse value: {0:?}")]
    Unparseable(String),
}

/// Base kind of a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseType {
    Number,
    Date,
    NamedEntity,
    Boolean,
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BaseType::Number => "number",
            BaseType::Date => "date",
            BaseType::NamedEntity => "named_entity",
            BaseType::Boolean => "boolean",
        };
        f.write_str(s)
    }
}

/// Structural kind of a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    Scalar,
    List,
    Dictionary,
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Structure::Scalar => "scalar",
            Structure::List => "list",
            Structure::Dictionary => "dictionary",
        };
        f.write_str(s)
    }
}

/// Resolved type of a program step.
///
/// For dictionaries `base` is the value base type and `key` carries the key
/// base type (named entities for projections; grouped counts key by the
/// grouped value's base).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ValueType {
    pub base: BaseType,
    pub structure: Structure,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub key: Option<BaseType>,
}

impl ValueType {
    pub fn scalar(base: BaseType) -> Self {
        ValueType { base, structure: Structure::Scalar, key: None }
    }

    pub fn list(base: BaseType) -> Self {
        ValueType { base, structure: Structure::List, key: None }
    }

    pub fn dictionary(key: BaseType, value: BaseType) -> Self {
        ValueType { base: value, structure: Structure::Dictionary, key: Some(key) }
    }

    pub fn is_valid(&self) -> bool {
        (self.structure == Structure::Dictionary) == self.key.is_some()
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.base, self.structure)
    }
}

/// Finite f64 with total ordering, usable as a set/map element.
#[derive(Debug, Clone, Copy)]
pub struct Num(f64);

impl Num {
    /// Wraps a computed value; only finiteness is required.
    pub fn new(v: f64) -> Result<Self, ValueError> {
        if v.is_finite() {
            Ok(Num(v))
        } else {
            Err(ValueError::NotFinite)
        }
    }

    /// Checked constructor for sampled values; enforces the generation range.
    pub fn generated(v: f64) -> Result<Self, ValueError> {
        let n = Num::new(v)?;
        if !(NUMBER_MIN..=NUMBER_MAX).contains(&v) {
            return Err(ValueError::NumberOutOfRange(n.to_string()));
        }
        Ok(n)
    }

    pub fn get(&self) -> f64 {
        self.0
    }

    pub fn in_generation_range(&self) -> bool {
        (NUMBER_MIN..=NUMBER_MAX).contains(&self.0)
    }

    /// Parses the serialized form; accepts comma thousand-separators.
    pub fn parse(s: &str) -> Result<Self, ValueError> {
        let cleaned = s.replace(',', "");
        cleaned
            .parse::<f64>()
            .ok()
            .and_then(|v| Num::new(v).ok())
            .ok_or_else(|| ValueError::Unparseable(s.to_string()))
    }
}

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Num {}

impl PartialOrd for Num {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Num {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Hash for Num {
    fn hash<H: Hasher>(&self, state: &mut H) {
        // Normalize -0.0 so it hashes like 0.0 (they compare unequal under
        // total_cmp, but we never generate -0.0; this keeps hashing sane).
        let bits = if self.0 == 0.0 { 0.0f64.to_bits() } else { self.0.to_bits() };
        bits.hash(state);
    }
}

impl fmt::Display for Num {
    /// Plain digits, at most two fractional digits, no thousand-separators.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cents = (self.0 * 100.0).round();
        // Values this large never occur; fall back to the default formatter.
        if cents.abs() >= 9e15 {
            return write!(f, "{}", self.0);
        }
        let cents = cents as i64;
        let sign = if cents < 0 { "-" } else { "" };
        let abs = cents.unsigned_abs();
        let int = abs / 100;
        let frac = abs % 100;
        if frac == 0 {
            write!(f, "{sign}{int}")
        } else if frac % 10 == 0 {
            write!(f, "{sign}{int}.{}", frac / 10)
        } else {
            write!(f, "{sign}{int}.{frac:02}")
        }
    }
}

const MONTH_NAMES: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September",
    "October", "November", "December",
];

fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if (year % 4 == 0 && year % 100 != 0) || year % 400 == 0 {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

/// A calendar date: either a bare year or a full day-month-year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Date {
    year: i32,
    /// Month and day are present together or not at all.
    month: Option<u8>,
    day: Option<u8>,
}

impl Date {
    pub fn year_only(year: i32) -> Result<Self, ValueError> {
        if !(YEAR_MIN..=YEAR_MAX).contains(&year) {
            return Err(ValueError::YearOutOfRange(year));
        }
        Ok(Date { year, month: None, day: None })
    }

    pub fn ymd(year: i32, month: u8, day: u8) -> Result<Self, ValueError> {
        if !(YEAR_MIN..=YEAR_MAX).contains(&year) {
            return Err(ValueError::YearOutOfRange(year));
        }
        if !(1..=12).contains(&month) || day == 0 || day > days_in_month(year, month) {
            return Err(ValueError::BadCalendarDate(year, month, day));
        }
        Ok(Date { year, month: Some(month), day: Some(day) })
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> Option<u8> {
        self.month
    }

    pub fn day(&self) -> Option<u8> {
        self.day
    }

    pub fn is_full(&self) -> bool {
        self.month.is_some()
    }

    /// Components used for comparison and arithmetic; a bare year counts as
    /// July 1 (mid-year default for mixed granularity).
    pub fn effective_ymd(&self) -> (i32, u8, u8) {
        (self.year, self.month.unwrap_or(7), self.day.unwrap_or(1))
    }

    /// Days since 1970-01-01 of the effective date (proleptic Gregorian).
    pub fn days_from_epoch(&self) -> i64 {
        let (y, m, d) = self.effective_ymd();
        let y = y as i64;
        let m = m as i64;
        let d = d as i64;
        let y = if m <= 2 { y - 1 } else { y };
        let era = if y >= 0 { y } else { y - 399 } / 400;
        let yoe = y - era * 400;
        let mp = (m + 9) % 12;
        let doy = (153 * mp + 2) / 5 + d - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        era * 146097 + doe - 719468
    }

    pub fn parse(s: &str) -> Result<Self, ValueError> {
        let s = s.trim();
        if let Ok(year) = s.parse::<i32>() {
            return Date::year_only(year);
        }
        let parts: Vec<&str> = s.split_whitespace().collect();
        if parts.len() == 3 {
            let day: u8 = parts[0].parse().map_err(|_| ValueError::Unparseable(s.to_string()))?;
            let month = MONTH_NAMES
                .iter()
                .position(|m| m.eq_ignore_ascii_case(parts[1]))
                .ok_or_else(|| ValueError::Unparseable(s.to_string()))?
                as u8
                + 1;
            let year: i32 = parts[2].parse().map_err(|_| ValueError::Unparseable(s.to_string()))?;
            return Date::ymd(year, month, day);
        }
        Err(ValueError::Unparseable(s.to_string()))
    }
}

impl PartialOrd for Date {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Date {
    fn cmp(&self, other: &Self) -> Ordering {
        self.effective_ymd().cmp(&other.effective_ymd())
    }
}

impl fmt::Display for Date {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.day, self.month) {
            (Some(d), Some(m)) => write!(f, "{} {} {}", d, MONTH_NAMES[m as usize - 1], self.year),
            _ => write!(f, "{}", self.year),
        }
    }
}

/// A generated named entity: exactly three uppercase ASCII letters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityName(String);

impl EntityName {
    pub fn new(s: impl Into<String>) -> Result<Self, ValueError> {
        let s = s.into();
        if s.len() == 3 && s.bytes().all(|b| b.is_ascii_uppercase()) {
            Ok(EntityName(s))
        } else {
            Err(ValueError::BadEntityName(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A runtime value flowing between program steps.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Number(Num),
    Date(Date),
    Entity(EntityName),
    Bool(bool),
    List(Vec<Value>),
    /// Ordered key-value pairs; keys are scalar and unique.
    Dict(Vec<(Value, Value)>),
}

impl Value {
    pub fn number(v: f64) -> Result<Self, ValueError> {
        Ok(Value::Number(Num::new(v)?))
    }

    pub fn generated_number(v: f64) -> Result<Self, ValueError> {
        Ok(Value::Number(Num::generated(v)?))
    }

    pub fn entity(s: impl Into<String>) -> Result<Self, ValueError> {
        Ok(Value::Entity(EntityName::new(s)?))
    }

    pub fn base_type(&self) -> Option<BaseType> {
        match self {
            Value::Number(_) => Some(BaseType::Number),
            Value::Date(_) => Some(BaseType::Date),
            Value::Entity(_) => Some(BaseType::NamedEntity),
            Value::Bool(_) => Some(BaseType::Boolean),
            Value::List(xs) => xs.first().and_then(Value::base_type),
            Value::Dict(xs) => xs.first().and_then(|(_, v)| v.base_type()),
        }
    }

    pub fn structure(&self) -> Structure {
        match self {
            Value::List(_) => Structure::List,
            Value::Dict(_) => Structure::Dictionary,
            _ => Structure::Scalar,
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.structure() == Structure::Scalar
    }

    /// Number of answer elements: 1 for scalars, length for collections.
    pub fn cardinality(&self) -> usize {
        match self {
            Value::List(xs) => xs.len(),
            Value::Dict(xs) => xs.len(),
            _ => 1,
        }
    }

    /// True when the runtime shape is compatible with `ty`. Empty collections
    /// match any base of the right structure.
    pub fn matches_type(&self, ty: &ValueType) -> bool {
        match self {
            Value::List(xs) => {
                ty.structure == Structure::List
                    && xs.iter().all(|x| x.is_scalar())
                    && xs.first().map_or(true, |x| x.base_type() == Some(ty.base))
            }
            Value::Dict(xs) => {
                ty.structure == Structure::Dictionary
                    && xs.first().map_or(true, |(k, v)| {
                        k.base_type() == ty.key && v.base_type() == Some(ty.base)
                    })
            }
            v => ty.structure == Structure::Scalar && v.base_type() == Some(ty.base),
        }
    }

    /// Serialized answer parts: one string per answer element.
    pub fn answer_parts(&self) -> Vec<String> {
        match self {
            Value::List(xs) => xs.iter().map(Value::to_display_string).collect(),
            Value::Dict(xs) => xs
                .iter()
                .map(|(k, v)| format!("{}: {}", k.to_display_string(), v.to_display_string()))
                .collect(),
            v => vec![v.to_display_string()],
        }
    }

    pub fn to_display_string(&self) -> String {
        match self {
            Value::Number(n) => n.to_string(),
            Value::Date(d) => d.to_string(),
            Value::Entity(e) => e.to_string(),
            Value::Bool(b) => if *b { "yes" } else { "no" }.to_string(),
            Value::List(xs) => {
                let parts: Vec<String> = xs.iter().map(Value::to_display_string).collect();
                format!("[{}]", parts.join(", "))
            }
            Value::Dict(xs) => {
                let parts: Vec<String> = xs
                    .iter()
                    .map(|(k, v)| format!("{}: {}", k.to_display_string(), v.to_display_string()))
                    .collect();
                format!("{{{}}}", parts.join(", "))
            }
        }
    }

    /// Parses a scalar from its display form, given the expected base.
    pub fn parse_scalar(s: &str, base: BaseType) -> Result<Self, ValueError> {
        match base {
            BaseType::Number => Ok(Value::Number(Num::parse(s)?)),
            BaseType::Date => Ok(Value::Date(Date::parse(s)?)),
            BaseType::NamedEntity => Value::entity(s),
            BaseType::Boolean => match s {
                "yes" | "true" => Ok(Value::Bool(true)),
                "no" | "false" => Ok(Value::Bool(false)),
                _ => Err(ValueError::Unparseable(s.to_string())),
            },
        }
    }
}

/// Total order over comparable scalars (numbers with numbers, dates with
/// dates). Entities and booleans are not ordered.
pub fn compare_scalars(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => Some(x.cmp(y)),
        (Value::Date(x), Value::Date(y)) => Some(x.cmp(y)),
        _ => None,
    }
}
