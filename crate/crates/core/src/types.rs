//! Data types, values, typed variables and substitutions.
//!
//! The built-in catalog has four pairwise-disjoint types. Every [`Value`]
//! carries its type as the enum tag, so value domains never overlap and a
//! predicate symbol belongs to exactly one type.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

pub type Name = Arc<str>;

/// One of the built-in data types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    String,
    Int,
    Real,
    Bool,
}

impl DataType {
    pub const ALL: [DataType; 4] = [DataType::String, DataType::Int, DataType::Real, DataType::Bool];

    pub fn name(self) -> &'static str {
        match self {
            DataType::String => "string",
            DataType::Int => "int",
            DataType::Real => "real",
            DataType::Bool => "bool",
        }
    }

    pub fn from_name(name: &str) -> Option<DataType> {
        DataType::ALL.into_iter().find(|t| t.name() == name)
    }

    /// Predicates defined over this type.
    pub fn predicates(self) -> &'static [Predicate] {
        match self {
            DataType::String => &[Predicate::StrEq],
            DataType::Int => &[Predicate::IntEq, Predicate::IntLt, Predicate::Succ],
            DataType::Real => &[Predicate::RealEq, Predicate::RealLt],
            DataType::Bool => &[Predicate::BoolEq],
        }
    }

    /// Whether the value domain is infinite, i.e. whether fresh values can be drawn from it.
    pub fn is_infinite(self) -> bool {
        !matches!(self, DataType::Bool)
    }

    pub fn equality(self) -> Predicate {
        match self {
            DataType::String => Predicate::StrEq,
            DataType::Int => Predicate::IntEq,
            DataType::Real => Predicate::RealEq,
            DataType::Bool => Predicate::BoolEq,
        }
    }

    pub fn less_than(self) -> Option<Predicate> {
        match self {
            DataType::Int => Some(Predicate::IntLt),
            DataType::Real => Some(Predicate::RealLt),
            _ => None,
        }
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A finite set of data types available to a net.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TypeDomain {
    types: BTreeSet<DataType>,
}

impl Default for TypeDomain {
    fn default() -> Self {
        TypeDomain { types: DataType::ALL.into_iter().collect() }
    }
}

impl TypeDomain {
    pub fn new(types: impl IntoIterator<Item = DataType>) -> Self {
        TypeDomain { types: types.into_iter().collect() }
    }

    pub fn contains(&self, ty: DataType) -> bool {
        self.types.contains(&ty)
    }

    pub fn types(&self) -> impl Iterator<Item = DataType> + '_ {
        self.types.iter().copied()
    }

    /// The unique type owning `pred`, if that type is part of the domain.
    pub fn type_of_predicate(&self, pred: Predicate) -> Option<DataType> {
        let ty = pred.data_type();
        self.contains(ty).then_some(ty)
    }

    pub fn predicate_by_symbol(&self, symbol: &str) -> Option<Predicate> {
        self.types
            .iter()
            .flat_map(|t| t.predicates().iter().copied())
            .find(|p| p.symbol() == symbol)
    }
}

/// A rigidly interpreted predicate symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Predicate {
    StrEq,
    IntEq,
    IntLt,
    Succ,
    RealEq,
    RealLt,
    BoolEq,
}

impl Predicate {
    pub fn symbol(self) -> &'static str {
        match self {
            Predicate::StrEq => "=_s",
            Predicate::IntEq => "=_int",
            Predicate::IntLt => "<_int",
            Predicate::Succ => "succ",
            Predicate::RealEq => "=_r",
            Predicate::RealLt => "<_r",
            Predicate::BoolEq => "=_bool",
        }
    }

    pub fn arity(self) -> usize {
        2
    }

    pub fn data_type(self) -> DataType {
        match self {
            Predicate::StrEq => DataType::String,
            Predicate::IntEq | Predicate::IntLt | Predicate::Succ => DataType::Int,
            Predicate::RealEq | Predicate::RealLt => DataType::Real,
            Predicate::BoolEq => DataType::Bool,
        }
    }

    pub fn is_equality(self) -> bool {
        matches!(self, Predicate::StrEq | Predicate::IntEq | Predicate::RealEq | Predicate::BoolEq)
    }

    pub fn is_less_than(self) -> bool {
        matches!(self, Predicate::IntLt | Predicate::RealLt)
    }

    /// Evaluates the predicate on well-typed arguments.
    pub fn eval(self, args: &[Value]) -> Result<bool, TypeError> {
        if args.len() != self.arity() {
            return Err(TypeError::Arity {
                what: self.symbol().to_string(),
                expected: self.arity(),
                found: args.len(),
            });
        }
        let ty = self.data_type();
        for arg in args {
            if arg.data_type() != ty {
                return Err(TypeError::Mismatch { expected: ty, found: arg.data_type() });
            }
        }
        let (a, b) = (&args[0], &args[1]);
        Ok(match self {
            Predicate::StrEq | Predicate::IntEq | Predicate::RealEq | Predicate::BoolEq => a == b,
            Predicate::IntLt | Predicate::RealLt => a < b,
            Predicate::Succ => match (a, b) {
                (Value::Int(x), Value::Int(y)) => &(x + BigInt::one()) == y,
                _ => unreachable!("checked above"),
            },
        })
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Looks up a predicate by symbol and evaluates it.
pub fn eval_predicate(domain: &TypeDomain, symbol: &str, args: &[Value]) -> Result<bool, TypeError> {
    let pred = domain
        .predicate_by_symbol(symbol)
        .ok_or_else(|| TypeError::UnknownPredicate(symbol.to_string()))?;
    pred.eval(args)
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("`{what}` expects {expected} argument(s), found {found}")]
    Arity { what: String, expected: usize, found: usize },
    #[error("expected a value of type {expected}, found {found}")]
    Mismatch { expected: DataType, found: DataType },
    #[error("variable `{0}` is not bound")]
    Unbound(String),
    #[error("type {0} has a finite value domain; fresh values cannot be drawn from it")]
    FiniteDomain(DataType),
}

/// Exact decimal number `mantissa * 10^-scale`, kept normalized so that
/// structural equality coincides with numeric equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Decimal {
    mantissa: BigInt,
    scale: u32,
}

impl Decimal {
    pub fn new(mantissa: BigInt, scale: u32) -> Self {
        let mut d = Decimal { mantissa, scale };
        d.normalize();
        d
    }

    pub fn from_int(value: BigInt) -> Self {
        Decimal::new(value, 0)
    }

    fn normalize(&mut self) {
        let ten = BigInt::from(10);
        while self.scale > 0 && (&self.mantissa % &ten).is_zero() {
            self.mantissa /= &ten;
            self.scale -= 1;
        }
        if self.mantissa.is_zero() {
            self.scale = 0;
        }
    }

    fn rescaled(&self, scale: u32) -> BigInt {
        &self.mantissa * BigInt::from(10).pow(scale - self.scale)
    }

    /// Smallest integer strictly greater than `self`.
    pub fn next_integer(&self) -> Decimal {
        let unit = BigInt::from(10).pow(self.scale);
        let floor = num_integer_floor(&self.mantissa, &unit);
        Decimal::from_int(floor + 1)
    }

    pub fn parse(text: &str) -> Option<Decimal> {
        let (neg, digits) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if !frac_part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let mut mantissa: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
        if neg {
            mantissa = -mantissa;
        }
        Some(Decimal::new(mantissa, frac_part.len() as u32))
    }
}

fn num_integer_floor(value: &BigInt, unit: &BigInt) -> BigInt {
    let q = value / unit;
    if value.is_negative() && !(value % unit).is_zero() {
        q - 1
    } else {
        q
    }
}

impl Ord for Decimal {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let scale = self.scale.max(other.scale);
        self.rescaled(scale).cmp(&other.rescaled(scale))
    }
}

impl PartialOrd for Decimal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let digits = self.mantissa.abs().to_string();
        let sign = if self.mantissa.is_negative() { "-" } else { "" };
        let scale = self.scale as usize;
        if scale == 0 {
            return write!(f, "{sign}{digits}.0");
        }
        let padded = format!("{digits:0>width$}", width = scale + 1);
        let (int_part, frac_part) = padded.split_at(padded.len() - scale);
        write!(f, "{sign}{int_part}.{frac_part}")
    }
}

/// A typed constant.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Value {
    Str(Arc<str>),
    Int(BigInt),
    Real(Decimal),
    Bool(bool),
}

impl Value {
    pub fn str(s: &str) -> Value {
        Value::Str(Arc::from(s))
    }

    pub fn int(i: i64) -> Value {
        Value::Int(BigInt::from(i))
    }

    pub fn data_type(&self) -> DataType {
        match self {
            Value::Str(_) => DataType::String,
            Value::Int(_) => DataType::Int,
            Value::Real(_) => DataType::Real,
            Value::Bool(_) => DataType::Bool,
        }
    }

    pub fn has_type(&self, ty: DataType) -> bool {
        self.data_type() == ty
    }

    /// Plain JSON rendering used by trace and instance exports.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Str(s) => serde_json::Value::String(s.to_string()),
            Value::Int(i) => match i64::try_from(i) {
                Ok(small) => serde_json::Value::from(small),
                Err(_) => serde_json::Value::String(i.to_string()),
            },
            Value::Real(d) => serde_json::Value::String(d.to_string()),
            Value::Bool(b) => serde_json::Value::Bool(*b),
        }
    }

    /// Reads a JSON value back at a known type.
    pub fn from_json(ty: DataType, json: &serde_json::Value) -> Option<Value> {
        match (ty, json) {
            (DataType::String, serde_json::Value::String(s)) => Some(Value::str(s)),
            (DataType::Int, serde_json::Value::Number(n)) => n.as_i64().map(Value::int),
            (DataType::Int, serde_json::Value::String(s)) => s.parse().ok().map(Value::Int),
            (DataType::Real, serde_json::Value::String(s)) => Decimal::parse(s).map(Value::Real),
            (DataType::Real, serde_json::Value::Number(n)) => {
                Decimal::parse(&n.to_string()).map(Value::Real)
            }
            (DataType::Bool, serde_json::Value::Bool(b)) => Some(Value::Bool(*b)),
            _ => None,
        }
    }
}

/// Literal syntax: strings quoted and escaped, reals always with a decimal point.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(d) => write!(f, "{d}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

/// Whether a variable ranges over arbitrary values or is bound to fresh ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Normal,
    Fresh,
}

/// A typed variable. Two variables are the same only if name, type and flavor agree.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable {
    pub name: Name,
    pub ty: DataType,
    pub flavor: Flavor,
}

impl Variable {
    pub fn new(name: &str, ty: DataType) -> Self {
        Variable { name: Arc::from(name), ty, flavor: Flavor::Normal }
    }

    pub fn fresh(name: &str, ty: DataType) -> Self {
        Variable { name: Arc::from(name), ty, flavor: Flavor::Fresh }
    }

    pub fn is_fresh(&self) -> bool {
        self.flavor == Flavor::Fresh
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl Serialize for Variable {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("Variable", 3)?;
        s.serialize_field("name", &*self.name)?;
        s.serialize_field("type", &self.ty)?;
        s.serialize_field("flavor", &self.flavor)?;
        s.end()
    }
}

/// Either a variable or a constant, as found in atoms, inscriptions and fact templates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Term {
    Var(Variable),
    Val(Value),
}

impl Term {
    pub fn data_type(&self) -> DataType {
        match self {
            Term::Var(v) => v.ty,
            Term::Val(v) => v.data_type(),
        }
    }

    pub fn as_var(&self) -> Option<&Variable> {
        match self {
            Term::Var(v) => Some(v),
            Term::Val(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Val(v) => write!(f, "{v}"),
        }
    }
}

impl From<Variable> for Term {
    fn from(v: Variable) -> Self {
        Term::Var(v)
    }
}

impl From<Value> for Term {
    fn from(v: Value) -> Self {
        Term::Val(v)
    }
}

/// A finite, well-typed mapping from variables to values.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution {
    map: BTreeMap<Variable, Value>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Binds `var`; fails if the value is outside the variable's domain.
    pub fn bind(&mut self, var: Variable, value: Value) -> Result<Option<Value>, TypeError> {
        if !value.has_type(var.ty) {
            return Err(TypeError::Mismatch { expected: var.ty, found: value.data_type() });
        }
        Ok(self.map.insert(var, value))
    }

    pub fn with(mut self, var: Variable, value: Value) -> Result<Self, TypeError> {
        self.bind(var, value)?;
        Ok(self)
    }

    pub fn get(&self, var: &Variable) -> Option<&Value> {
        self.map.get(var)
    }

    pub fn unbind(&mut self, var: &Variable) -> Option<Value> {
        self.map.remove(var)
    }

    pub fn contains(&self, var: &Variable) -> bool {
        self.map.contains_key(var)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Variable, &Value)> {
        self.map.iter()
    }

    pub fn vars(&self) -> impl Iterator<Item = &Variable> {
        self.map.keys()
    }

    /// Replaces a term by its value under this substitution.
    pub fn apply(&self, term: &Term) -> Result<Value, TypeError> {
        match term {
            Term::Val(v) => Ok(v.clone()),
            Term::Var(x) => self
                .map
                .get(x)
                .cloned()
                .ok_or_else(|| TypeError::Unbound(x.name.to_string())),
        }
    }

    pub fn apply_all(&self, terms: &[Term]) -> Result<Vec<Value>, TypeError> {
        terms.iter().map(|t| self.apply(t)).collect()
    }

    /// JSON object keyed by variable name.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.map.iter().map(|(k, v)| (k.name.to_string(), v.to_json())).collect(),
        )
    }
}

impl FromIterator<(Variable, Value)> for Substitution {
    /// Panics on ill-typed pairs; intended for literals in tests and examples.
    fn from_iter<I: IntoIterator<Item = (Variable, Value)>>(iter: I) -> Self {
        let mut s = Substitution::new();
        for (k, v) in iter {
            s.bind(k, v).expect("well-typed substitution");
        }
        s
    }
}

/// Replaces a term by its value under `theta`.
pub fn apply_substitution(term: &Term, theta: &Substitution) -> Result<Value, TypeError> {
    theta.apply(term)
}

/// Deterministic source of fresh values.
///
/// Integers and reals take the successor of the largest excluded value of
/// their type (0 when none is excluded); strings use `ν<k>` with a counter
/// that skips colliding names.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FreshGenerator {
    counter: u64,
}

impl FreshGenerator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_counter(counter: u64) -> Self {
        FreshGenerator { counter }
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn fresh_value(&mut self, ty: DataType, excluded: &BTreeSet<Value>) -> Result<Value, TypeError> {
        match ty {
            DataType::Int => {
                let max = excluded
                    .iter()
                    .filter_map(|v| match v {
                        Value::Int(i) => Some(i),
                        _ => None,
                    })
                    .max();
                Ok(Value::Int(max.map_or_else(BigInt::zero, |m| m + 1)))
            }
            DataType::Real => {
                let max = excluded
                    .iter()
                    .filter_map(|v| match v {
                        Value::Real(d) => Some(d),
                        _ => None,
                    })
                    .max();
                Ok(Value::Real(
                    max.map_or_else(|| Decimal::from_int(BigInt::zero()), Decimal::next_integer),
                ))
            }
            DataType::String => loop {
                let candidate = Value::Str(Arc::from(format!("ν{}", self.counter)));
                self.counter += 1;
                if !excluded.contains(&candidate) {
                    return Ok(candidate);
                }
            },
            DataType::Bool => Err(TypeError::FiniteDomain(ty)),
        }
    }
}

/// One-shot form of [`FreshGenerator::fresh_value`].
pub fn fresh_value(
    ty: DataType,
    excluded: &BTreeSet<Value>,
    generator: &mut FreshGenerator,
) -> Result<Value, TypeError> {
    generator.fresh_value(ty, excluded)
}
