//! First-order queries over typed instances, evaluated under active-domain semantics.
//!
//! Quantifiers range over the values of the quantified variable's type that
//! occur in the instance being queried. Constants mentioned by the query do
//! not enlarge that range.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::persistence::{check_columns, ActiveDomain, DatabaseInstance, DatabaseSchema, SchemaError, Tuple};
use crate::types::{DataType, Name, Predicate, Substitution, Term, TypeDomain, TypeError, Value, Variable};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Query {
    True,
    Pred { pred: Predicate, args: Vec<Term> },
    Rel { relation: Name, args: Vec<Term> },
    Not { body: Box<Query> },
    And { left: Box<Query>, right: Box<Query> },
    Or { left: Box<Query>, right: Box<Query> },
    Exists { var: Variable, body: Box<Query> },
    Forall { var: Variable, body: Box<Query> },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("type {0} is not part of the type domain")]
    TypeNotInDomain(DataType),
    #[error("fresh variable `{0}` cannot occur in a query")]
    FreshInQuery(String),
    #[error("declared variables ({declared}) do not match the free variables of the body ({free})")]
    FreeVarMismatch { declared: String, free: String },
    #[error("guards may not mention relation `{0}`")]
    RelationInGuard(String),
    #[error("guards may not contain quantifiers")]
    QuantifierInGuard,
    #[error("constraint is not a boolean query: free variable(s) {0}")]
    NotBoolean(String),
}

impl Query {
    pub fn rel(relation: &str, args: impl IntoIterator<Item = Term>) -> Query {
        Query::Rel { relation: relation.into(), args: args.into_iter().collect() }
    }

    pub fn pred(pred: Predicate, args: impl IntoIterator<Item = Term>) -> Query {
        Query::Pred { pred, args: args.into_iter().collect() }
    }

    /// Typed equality, chosen by the type of the left operand.
    pub fn eq(left: Term, right: Term) -> Query {
        let pred = left.data_type().equality();
        Query::Pred { pred, args: vec![left, right] }
    }

    /// Typed strict order; panics for types without an order.
    pub fn lt(left: Term, right: Term) -> Query {
        let pred = left.data_type().less_than().expect("ordered type");
        Query::Pred { pred, args: vec![left, right] }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(body: Query) -> Query {
        Query::Not { body: Box::new(body) }
    }

    pub fn and(left: Query, right: Query) -> Query {
        Query::And { left: Box::new(left), right: Box::new(right) }
    }

    pub fn or(left: Query, right: Query) -> Query {
        Query::Or { left: Box::new(left), right: Box::new(right) }
    }

    /// `a -> b`, encoded as `not a or b`.
    pub fn implies(left: Query, right: Query) -> Query {
        Query::or(Query::not(left), right)
    }

    pub fn exists(vars: impl IntoIterator<Item = Variable>, body: Query) -> Query {
        let vars: Vec<_> = vars.into_iter().collect();
        vars.into_iter()
            .rev()
            .fold(body, |acc, var| Query::Exists { var, body: Box::new(acc) })
    }

    pub fn forall(vars: impl IntoIterator<Item = Variable>, body: Query) -> Query {
        let vars: Vec<_> = vars.into_iter().collect();
        vars.into_iter()
            .rev()
            .fold(body, |acc, var| Query::Forall { var, body: Box::new(acc) })
    }

    /// Right-nested conjunction; `true` when empty.
    pub fn and_all(parts: impl IntoIterator<Item = Query>) -> Query {
        let parts: Vec<_> = parts.into_iter().collect();
        parts.into_iter().rev().reduce(|acc, q| Query::and(q, acc)).unwrap_or(Query::True)
    }

    /// Free variables in order of first syntactic occurrence.
    pub fn free_vars(&self) -> Vec<Variable> {
        let mut out = Vec::new();
        let mut bound = Vec::new();
        self.collect_free(&mut bound, &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Variable>, out: &mut Vec<Variable>) {
        match self {
            Query::True => {}
            Query::Pred { args, .. } | Query::Rel { args, .. } => {
                for v in args.iter().filter_map(Term::as_var) {
                    if !bound.contains(v) && !out.contains(v) {
                        out.push(v.clone());
                    }
                }
            }
            Query::Not { body } => body.collect_free(bound, out),
            Query::And { left, right } | Query::Or { left, right } => {
                left.collect_free(bound, out);
                right.collect_free(bound, out);
            }
            Query::Exists { var, body } | Query::Forall { var, body } => {
                bound.push(var.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// Every variable occurring anywhere, bound or free.
    pub fn vars(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        self.visit(&mut |q| match q {
            Query::Pred { args, .. } | Query::Rel { args, .. } => {
                out.extend(args.iter().filter_map(Term::as_var).cloned());
            }
            Query::Exists { var, .. } | Query::Forall { var, .. } => {
                out.insert(var.clone());
            }
            _ => {}
        });
        out
    }

    pub fn is_boolean(&self) -> bool {
        self.free_vars().is_empty()
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Query)) {
        f(self);
        match self {
            Query::True | Query::Pred { .. } | Query::Rel { .. } => {}
            Query::Not { body } | Query::Exists { body, .. } | Query::Forall { body, .. } => body.visit(f),
            Query::And { left, right } | Query::Or { left, right } => {
                left.visit(f);
                right.visit(f);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Query::True | Query::Pred { .. } | Query::Rel { .. } => 0,
            Query::Not { body } | Query::Exists { body, .. } | Query::Forall { body, .. } => 1 + body.depth(),
            Query::And { left, right } | Query::Or { left, right } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Rewrites `or` and `forall` into their `not`/`and`/`exists` forms.
    pub fn desugar(&self) -> Query {
        match self {
            Query::True | Query::Pred { .. } | Query::Rel { .. } => self.clone(),
            Query::Not { body } => Query::not(body.desugar()),
            Query::And { left, right } => Query::and(left.desugar(), right.desugar()),
            Query::Or { left, right } => {
                Query::not(Query::and(Query::not(left.desugar()), Query::not(right.desugar())))
            }
            Query::Exists { var, body } => Query::Exists { var: var.clone(), body: Box::new(body.desugar()) },
            Query::Forall { var, body } => Query::not(Query::Exists {
                var: var.clone(),
                body: Box::new(Query::not(body.desugar())),
            }),
        }
    }

    /// Checks atoms against the schema and the type domain.
    pub fn typecheck(&self, schema: &DatabaseSchema, domain: &TypeDomain) -> Result<(), QueryError> {
        let mut result = Ok(());
        self.visit(&mut |q| {
            if result.is_err() {
                return;
            }
            result = check_node(q, schema, domain);
        });
        result
    }

    /// Whether the query lies in the quantifier- and relation-free guard fragment.
    pub fn check_guard_fragment(&self) -> Result<(), QueryError> {
        let mut result = Ok(());
        self.visit(&mut |q| {
            if result.is_err() {
                return;
            }
            match q {
                Query::Rel { relation, .. } => result = Err(QueryError::RelationInGuard(relation.to_string())),
                Query::Exists { .. } | Query::Forall { .. } => result = Err(QueryError::QuantifierInGuard),
                _ => {}
            }
        });
        result
    }
}

fn check_node(q: &Query, schema: &DatabaseSchema, domain: &TypeDomain) -> Result<(), QueryError> {
    let check_terms = |args: &[Term]| -> Result<(), QueryError> {
        for t in args {
            if !domain.contains(t.data_type()) {
                return Err(QueryError::TypeNotInDomain(t.data_type()));
            }
            if let Term::Var(v) = t {
                if v.is_fresh() {
                    return Err(QueryError::FreshInQuery(v.name.to_string()));
                }
            }
        }
        Ok(())
    };
    match q {
        Query::Rel { relation, args } => {
            check_terms(args)?;
            let rel = schema
                .get(relation)
                .ok_or_else(|| SchemaError::UnknownRelation(relation.to_string()))?;
            check_columns(rel, args.iter().map(Term::data_type))?;
        }
        Query::Pred { pred, args } => {
            check_terms(args)?;
            let ty = domain
                .type_of_predicate(*pred)
                .ok_or(QueryError::TypeNotInDomain(pred.data_type()))?;
            if args.len() != pred.arity() {
                return Err(TypeError::Arity {
                    what: pred.symbol().to_string(),
                    expected: pred.arity(),
                    found: args.len(),
                }
                .into());
            }
            if let Some(bad) = args.iter().find(|a| a.data_type() != ty) {
                return Err(TypeError::Mismatch { expected: ty, found: bad.data_type() }.into());
            }
        }
        Query::Exists { var, .. } | Query::Forall { var, .. } => {
            if !domain.contains(var.ty) {
                return Err(QueryError::TypeNotInDomain(var.ty));
            }
            if var.is_fresh() {
                return Err(QueryError::FreshInQuery(var.name.to_string()));
            }
        }
        _ => {}
    }
    Ok(())
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[Term]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

/// Concrete DSL syntax. Compound formulas are fully parenthesized so the
/// output parses back to the same tree.
impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::True => f.write_str("true"),
            Query::Pred { pred, args } if args.len() == 2 && pred.is_equality() => {
                write!(f, "{} = {}", args[0], args[1])
            }
            Query::Pred { pred, args } if args.len() == 2 && pred.is_less_than() => {
                write!(f, "{} < {}", args[0], args[1])
            }
            Query::Pred { pred, args } => {
                write!(f, "{}(", pred.symbol())?;
                write_args(f, args)?;
                f.write_str(")")
            }
            Query::Rel { relation, args } => {
                write!(f, "{relation}(")?;
                write_args(f, args)?;
                f.write_str(")")
            }
            // compound bodies print their own parentheses
            Query::Not { body } => write!(f, "not {body}"),
            Query::And { left, right } => write!(f, "({left} and {right})"),
            Query::Or { left, right } => write!(f, "({left} or {right})"),
            Query::Exists { var, body } => write!(f, "(exists {}:{} . {body})", var.name, var.ty),
            Query::Forall { var, body } => write!(f, "(forall {}:{} . {body})", var.name, var.ty),
        }
    }
}

/// A query with an explicit ordering of its free variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NamedQuery {
    pub name: Name,
    pub params: Vec<Variable>,
    pub body: Query,
}

impl NamedQuery {
    /// Fails unless `params` lists exactly the free variables of `body`.
    pub fn new(name: &str, params: Vec<Variable>, body: Query) -> Result<Self, QueryError> {
        let q = NamedQuery { name: name.into(), params, body };
        q.check_params()?;
        Ok(q)
    }

    pub fn check_params(&self) -> Result<(), QueryError> {
        let declared: BTreeSet<_> = self.params.iter().collect();
        let free = self.body.free_vars();
        let free_set: BTreeSet<_> = free.iter().collect();
        if declared != free_set || declared.len() != self.params.len() {
            let show = |vs: &mut dyn Iterator<Item = &Variable>| {
                vs.map(|v| format!("{}:{}", v.name, v.ty)).collect::<Vec<_>>().join(", ")
            };
            return Err(QueryError::FreeVarMismatch {
                declared: show(&mut self.params.iter()),
                free: show(&mut free.iter()),
            });
        }
        Ok(())
    }

    pub fn column_types(&self) -> Vec<DataType> {
        self.params.iter().map(|v| v.ty).collect()
    }
}

/// `instance` entails `query` under `theta`, with quantifiers ranging over the active domain.
pub fn entails(instance: &DatabaseInstance, theta: &Substitution, query: &Query) -> Result<bool, TypeError> {
    let adom = instance.active_domain();
    let mut theta = theta.clone();
    eval(query, instance, &adom, &mut theta)
}

/// Entailment with a precomputed active domain; `theta` is restored on return.
pub fn entails_with(
    instance: &DatabaseInstance,
    adom: &ActiveDomain,
    theta: &mut Substitution,
    query: &Query,
) -> Result<bool, TypeError> {
    eval(query, instance, adom, theta)
}

/// Truth of a closed, well-typed query. Panics if the query has free variables.
pub(crate) fn holds_with(query: &Query, instance: &DatabaseInstance, adom: &ActiveDomain) -> bool {
    eval(query, instance, adom, &mut Substitution::new())
        .expect("constraints are closed and well-typed")
}

fn eval(
    q: &Query,
    instance: &DatabaseInstance,
    adom: &ActiveDomain,
    theta: &mut Substitution,
) -> Result<bool, TypeError> {
    match q {
        Query::True => Ok(true),
        Query::Rel { relation, args } => {
            let tuple = theta.apply_all(args)?;
            Ok(instance.contains(relation, &tuple))
        }
        Query::Pred { pred, args } => pred.eval(&theta.apply_all(args)?),
        Query::Not { body } => Ok(!eval(body, instance, adom, theta)?),
        Query::And { left, right } => {
            Ok(eval(left, instance, adom, theta)? && eval(right, instance, adom, theta)?)
        }
        Query::Or { left, right } => {
            Ok(eval(left, instance, adom, theta)? || eval(right, instance, adom, theta)?)
        }
        Query::Exists { var, body } => quantify(var, body, instance, adom, theta, true),
        Query::Forall { var, body } => quantify(var, body, instance, adom, theta, false),
    }
}

/// Existential (`any`) or universal quantification over `adom` of the variable's type.
///
/// Only values that can decide the outcome are tried: those in the support of
/// the body (see [`support`]), when one can be computed.
fn quantify(
    var: &Variable,
    body: &Query,
    instance: &DatabaseInstance,
    adom: &ActiveDomain,
    theta: &mut Substitution,
    any: bool,
) -> Result<bool, TypeError> {
    let saved = theta.unbind(var);
    let restricted = support(var, body, any, instance, theta, &mut Vec::new());
    let all = adom.of_type(var.ty);
    let values: Box<dyn Iterator<Item = &Value>> = match &restricted {
        Some(vs) => Box::new(vs.iter().filter(|v| all.binary_search(v).is_ok())),
        None => Box::new(all.iter()),
    };
    let mut result = Ok(!any);
    for o in values {
        theta.bind(var.clone(), o.clone())?;
        match eval(body, instance, adom, theta) {
            Ok(b) if b == any => {
                result = Ok(any);
                break;
            }
            Ok(_) => {}
            Err(e) => {
                result = Err(e);
                break;
            }
        }
    }
    theta.unbind(var);
    if let Some(v) = saved {
        theta.bind(var.clone(), v)?;
    }
    result
}

/// A superset of the values of `var` for which `q` can evaluate to `truth`
/// under `theta`, or `None` when no bound is found. Variables in `hidden` are
/// bound by an enclosing quantifier inside the formula and match anything.
fn support(
    var: &Variable,
    q: &Query,
    truth: bool,
    instance: &DatabaseInstance,
    theta: &Substitution,
    hidden: &mut Vec<Variable>,
) -> Option<BTreeSet<Value>> {
    let known = |t: &Term, hidden: &[Variable]| -> Option<Value> {
        match t {
            Term::Val(c) => Some(c.clone()),
            Term::Var(v) if hidden.contains(v) => None,
            Term::Var(v) => theta.get(v).cloned(),
        }
    };
    let either = |a: Option<BTreeSet<Value>>, b: Option<BTreeSet<Value>>| match (a, b) {
        (Some(a), Some(b)) => Some(a.intersection(&b).cloned().collect()),
        (a, b) => a.or(b),
    };
    let both = |a: Option<BTreeSet<Value>>, b: Option<BTreeSet<Value>>| match (a, b) {
        (Some(mut a), Some(b)) => {
            a.extend(b);
            Some(a)
        }
        _ => None,
    };
    match q {
        Query::True => None,
        Query::Rel { relation, args } if truth => {
            if !args.iter().any(|a| a.as_var() == Some(var)) {
                return None;
            }
            let fixed: Vec<Option<Value>> =
                args.iter().map(|a| if a.as_var() == Some(var) { None } else { known(a, hidden) }).collect();
            let mut out = BTreeSet::new();
            'tuples: for tuple in instance.tuples(relation) {
                let mut found: Option<&Value> = None;
                for ((arg, want), got) in args.iter().zip(&fixed).zip(tuple) {
                    if arg.as_var() == Some(var) {
                        if found.is_some_and(|f| f != got) {
                            continue 'tuples;
                        }
                        found = Some(got);
                    } else if want.as_ref().is_some_and(|w| w != got) {
                        continue 'tuples;
                    }
                }
                out.extend(found.cloned());
            }
            Some(out)
        }
        Query::Rel { .. } => None,
        Query::Pred { pred, args } if truth && pred.is_equality() => match (args[0].as_var(), args[1].as_var()) {
            (Some(v), _) if v == var => known(&args[1], hidden).map(|c| BTreeSet::from([c])),
            (_, Some(v)) if v == var => known(&args[0], hidden).map(|c| BTreeSet::from([c])),
            _ => None,
        },
        Query::Pred { .. } => None,
        Query::Not { body } => support(var, body, !truth, instance, theta, hidden),
        Query::And { left, right } | Query::Or { left, right } => {
            let l = support(var, left, truth, instance, theta, hidden);
            let r = support(var, right, truth, instance, theta, hidden);
            if matches!(q, Query::And { .. }) == truth {
                either(l, r)
            } else {
                both(l, r)
            }
        }
        // `exists y . b` true, or `forall y . b` false, needs some y making b
        // true (resp. false), so the support of b over all y bounds it.
        Query::Exists { var: y, body } | Query::Forall { var: y, body }
            if matches!(q, Query::Exists { .. }) == truth =>
        {
            if y == var {
                return None;
            }
            hidden.push(y.clone());
            let out = support(var, body, truth, instance, theta, hidden);
            hidden.pop();
            out
        }
        Query::Exists { .. } | Query::Forall { .. } => None,
    }
}

/// Answers of `query` over `instance`: tuples in the declared parameter order.
pub fn answers(query: &NamedQuery, instance: &DatabaseInstance) -> BTreeSet<Tuple> {
    let adom = instance.active_domain();
    answers_with(query, instance, &adom)
}

pub fn answers_with(query: &NamedQuery, instance: &DatabaseInstance, adom: &ActiveDomain) -> BTreeSet<Tuple> {
    answers_over(query, instance, adom, adom)
}

/// Answers where the free variables range over `candidates` instead of the
/// active domain. Quantifiers still range over `adom`, and tuples with a value
/// outside `adom` are dropped, so widening `candidates` never adds answers.
pub fn answers_over(
    query: &NamedQuery,
    instance: &DatabaseInstance,
    adom: &ActiveDomain,
    candidates: &ActiveDomain,
) -> BTreeSet<Tuple> {
    let mut out = BTreeSet::new();
    let mut theta = Substitution::new();
    enumerate(query, instance, adom, candidates, 0, &mut theta, &mut out);
    out
}

fn enumerate(
    query: &NamedQuery,
    instance: &DatabaseInstance,
    adom: &ActiveDomain,
    candidates: &ActiveDomain,
    index: usize,
    theta: &mut Substitution,
    out: &mut BTreeSet<Tuple>,
) {
    if index == query.params.len() {
        // answers mention active values only, whatever the candidate pool
        let in_adom = query.params.iter().all(|p| theta.get(p).is_some_and(|v| adom.contains(v)));
        if in_adom && eval(&query.body, instance, adom, theta).expect("answers on a well-typed query") {
            let tuple = query
                .params
                .iter()
                .map(|p| theta.get(p).cloned().expect("bound by enumeration"))
                .collect();
            out.insert(tuple);
        }
        return;
    }
    let var = &query.params[index];
    let restricted = support(var, &query.body, true, instance, theta, &mut Vec::new());
    let all = candidates.of_type(var.ty);
    let values: Box<dyn Iterator<Item = &Value>> = match &restricted {
        Some(vs) => Box::new(vs.iter().filter(|v| all.binary_search(v).is_ok())),
        None => Box::new(all.iter()),
    };
    for o in values {
        theta.bind(var.clone(), o.clone()).expect("candidate of the variable's type");
        enumerate(query, instance, adom, candidates, index + 1, theta, out);
    }
    theta.unbind(var);
}

/// Answers as substitutions rather than tuples.
pub fn answer_substitutions(query: &NamedQuery, instance: &DatabaseInstance) -> Vec<Substitution> {
    answers(query, instance)
        .into_iter()
        .map(|tuple| query.params.iter().cloned().zip(tuple).collect())
        .collect()
}

/// A quantifier- and relation-free formula over transition variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Guard(Query);

impl Default for Guard {
    fn default() -> Self {
        Guard(Query::True)
    }
}

impl Guard {
    pub fn new(formula: Query) -> Result<Guard, QueryError> {
        formula.check_guard_fragment()?;
        Ok(Guard(formula))
    }

    pub fn formula(&self) -> &Query {
        &self.0
    }

    pub fn is_trivial(&self) -> bool {
        self.0 == Query::True
    }

    pub fn vars(&self) -> BTreeSet<Variable> {
        self.0.vars()
    }
}

impl fmt::Display for Guard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Evaluates a guard under `theta`, against the empty instance.
pub fn eval_guard(guard: &Guard, theta: &Substitution) -> Result<bool, TypeError> {
    let empty = DatabaseInstance::new();
    let mut theta = theta.clone();
    eval(&guard.0, &empty, &ActiveDomain::default(), &mut theta)
}

/// Convenience: the unique tuple-free answer of a boolean query.
pub fn holds(query: &Query, instance: &DatabaseInstance) -> Result<bool, TypeError> {
    entails(instance, &Substitution::new(), query)
}
