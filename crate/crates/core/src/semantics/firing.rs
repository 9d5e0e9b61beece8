use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::control::{DbNet, Inscription, Transition};
use crate::datalogic::{apply_transactional, instantiate, ActionError, ActionInstance};
use crate::multiset::Multiset;
use crate::persistence::{Fact, Tuple};
use crate::query::eval_guard;
use crate::types::{DataType, FreshGenerator, Name, Substitution, Term, TypeError, Value, Variable};

use super::marking::Snapshot;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticsError {
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Action(#[from] ActionError),
    #[error("no input domain configured for type {ty} (needed by external variable `{var}` of `{transition}`)")]
    MissingDomain { transition: String, var: String, ty: DataType },
    #[error("transition `{transition}` is not enabled under the given binding")]
    NotEnabled { transition: String },
}

/// Finite value lists for external (non-fresh) variables, per type.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct InputDomains {
    domains: BTreeMap<DataType, BTreeSet<Value>>,
}

impl InputDomains {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, ty: DataType, values: impl IntoIterator<Item = Value>) -> Self {
        self.insert(ty, values);
        self
    }

    /// Adds values to the domain of `ty`. Values of another type are ignored.
    pub fn insert(&mut self, ty: DataType, values: impl IntoIterator<Item = Value>) {
        let values: Vec<Value> = values.into_iter().filter(|v| v.has_type(ty)).collect();
        if !values.is_empty() {
            self.domains.entry(ty).or_default().extend(values);
        }
    }

    pub fn get(&self, ty: DataType) -> Option<&BTreeSet<Value>> {
        self.domains.get(&ty)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&DataType, &BTreeSet<Value>)> {
        self.domains.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty()
    }
}

/// `ibind(θ, ω)`: componentwise substitution, preserving multiplicities.
pub fn inscription_binding(inscription: &Inscription, theta: &Substitution) -> Result<Multiset<Tuple>, TypeError> {
    let mut out = Multiset::new();
    for (tuple, &n) in inscription {
        out.insert(theta.apply_all(tuple)?, n);
    }
    Ok(out)
}

/// Action instance obtained by passing the transition's binding tuple to the action.
/// `None` when the transition has no action.
pub fn induced_action_instance(
    net: &DbNet,
    transition: &Transition,
    sigma: &Substitution,
) -> Result<Option<ActionInstance>, SemanticsError> {
    let Some(binding) = &transition.action else {
        return Ok(None);
    };
    let action = net
        .logic
        .action(&binding.action)
        .ok_or_else(|| ActionError::UnknownAction(binding.action.to_string()))?;
    let mut theta = Substitution::new();
    for (param, arg) in action.params.iter().zip(&binding.args) {
        theta.bind(param.clone(), sigma.apply(arg)?)?;
    }
    Ok(Some(instantiate(action, &theta)?))
}

/// The three enablement conditions: tokens available, guard true, fresh values new and distinct.
pub fn is_enabled(_net: &DbNet, s: &Snapshot, t: &Transition, sigma: &Substitution) -> bool {
    for (p, ins) in &t.inputs {
        let Ok(needed) = inscription_binding(ins, sigma) else {
            return false;
        };
        let empty = Multiset::new();
        if !needed.is_subset(s.tokens(p).unwrap_or(&empty)) {
            return false;
        }
    }
    if !matches!(eval_guard(&t.guard, sigma), Ok(true)) {
        return false;
    }
    fresh_ok(s, t, sigma)
}

fn fresh_ok(s: &Snapshot, t: &Transition, sigma: &Substitution) -> bool {
    let fresh = t.fresh_vars();
    if fresh.is_empty() {
        return true;
    }
    let adom = s.active_values();
    let mut seen = BTreeSet::new();
    fresh.iter().all(|v| match sigma.get(v) {
        Some(val) => !adom.contains(val) && seen.insert(val.clone()),
        None => false,
    })
}

/// Extends `theta` so that `terms` instantiate to `token`; `false` on mismatch.
fn unify(terms: &[Term], token: &Tuple, theta: &mut Substitution, bound: &mut Vec<Variable>) -> bool {
    for (term, val) in terms.iter().zip(token) {
        match term {
            Term::Val(v) => {
                if v != val {
                    return false;
                }
            }
            Term::Var(x) => match theta.get(x) {
                Some(cur) if cur != val => return false,
                Some(_) => {}
                None => {
                    if theta.bind(x.clone(), val.clone()).is_err() {
                        return false;
                    }
                    bound.push(x.clone());
                }
            },
        }
    }
    true
}

fn match_inputs(
    s: &Snapshot,
    arcs: &[(&Name, &Vec<Term>, u64)],
    theta: &mut Substitution,
    out: &mut Vec<Substitution>,
) {
    let Some(((place, terms, n), rest)) = arcs.split_first() else {
        out.push(theta.clone());
        return;
    };
    let Some(tokens) = s.tokens(place) else {
        return;
    };
    for (token, &count) in tokens {
        if count < *n {
            continue;
        }
        let mut bound = Vec::new();
        if unify(terms, token, theta, &mut bound) {
            match_inputs(s, rest, theta, out);
        }
        for v in &bound {
            theta.unbind(v);
        }
    }
}

fn product(vars: &[Variable], domains: &[&BTreeSet<Value>], theta: &mut Substitution, out: &mut Vec<Substitution>) {
    let Some((var, rest)) = vars.split_first() else {
        out.push(theta.clone());
        return;
    };
    for v in domains[0] {
        theta.bind(var.clone(), v.clone()).expect("domain values are typed");
        product(rest, &domains[1..], theta, out);
    }
    theta.unbind(var);
}

/// All enabled bindings of `t` in `s`, in canonical order.
///
/// Input variables are matched against tokens, external normal variables range
/// over `domains`, and every fresh variable receives one new value per binding.
/// Values in `reserved` are also avoided when generating fresh values.
pub fn enumerate_bindings(
    net: &DbNet,
    s: &Snapshot,
    t: &Transition,
    domains: &InputDomains,
    reserved: &BTreeSet<Value>,
) -> Result<Vec<Substitution>, SemanticsError> {
    let fresh: Vec<Variable> = t.fresh_vars().into_iter().collect();
    let externals: Vec<Variable> = t.external_vars().into_iter().filter(|v| !v.is_fresh()).collect();
    let mut ext_domains = Vec::with_capacity(externals.len());
    for v in &externals {
        match domains.get(v.ty) {
            Some(d) => ext_domains.push(d),
            None => {
                return Err(SemanticsError::MissingDomain {
                    transition: t.name.to_string(),
                    var: v.name.to_string(),
                    ty: v.ty,
                })
            }
        }
    }

    let arcs: Vec<(&Name, &Vec<Term>, u64)> = t
        .inputs
        .iter()
        .flat_map(|(p, ins)| ins.iter().map(move |(terms, &n)| (p, terms, n)))
        .collect();
    let mut matches = Vec::new();
    match_inputs(s, &arcs, &mut Substitution::new(), &mut matches);
    matches.retain(|theta| is_enabled_inputs(s, t, theta) && matches!(eval_guard(&t.guard, theta), Ok(true)));

    let mut bindings = Vec::new();
    for mut theta in matches {
        product(&externals, &ext_domains, &mut theta, &mut bindings);
    }

    if !fresh.is_empty() {
        let mut excluded = s.active_values();
        excluded.extend(reserved.iter().cloned());
        let mut generator = FreshGenerator::new();
        let mut values = Vec::with_capacity(fresh.len());
        for v in &fresh {
            let val = generator.fresh_value(v.ty, &excluded)?;
            excluded.insert(val.clone());
            values.push(val);
        }
        for b in &mut bindings {
            for (v, val) in fresh.iter().zip(&values) {
                b.bind(v.clone(), val.clone())?;
            }
        }
    }
    debug_assert!(bindings.iter().all(|b| is_enabled(net, s, t, b)));
    Ok(bindings)
}

fn is_enabled_inputs(s: &Snapshot, t: &Transition, theta: &Substitution) -> bool {
    let empty = Multiset::new();
    t.inputs.iter().all(|(p, ins)| {
        inscription_binding(ins, theta).is_ok_and(|needed| needed.is_subset(s.tokens(p).unwrap_or(&empty)))
    })
}

/// A transition together with an enabled binding.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Firing {
    pub transition: Name,
    pub binding: Substitution,
}

impl Serialize for Firing {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serde_json::json!({ "transition": &*self.transition, "binding": self.binding.to_json() }).serialize(serializer)
    }
}

/// Every enabled firing of the net, transitions in name order.
pub fn enabled_firings(
    net: &DbNet,
    s: &Snapshot,
    domains: &InputDomains,
    reserved: &BTreeSet<Value>,
) -> Result<Vec<Firing>, SemanticsError> {
    let mut out = Vec::new();
    for t in net.control.transitions.values() {
        for binding in enumerate_bindings(net, s, t, domains, reserved)? {
            out.push(Firing { transition: t.name.clone(), binding });
        }
    }
    Ok(out)
}

/// Result of a firing.
#[derive(Clone, Debug)]
pub struct FireOutcome {
    pub snapshot: Snapshot,
    pub committed: bool,
    pub action: Option<ActionInstance>,
    /// Facts present after the firing but not before.
    pub added: BTreeSet<Fact>,
    /// Facts present before the firing but not after.
    pub deleted: BTreeSet<Fact>,
}

/// Fires `t` under `sigma`. The database is updated transactionally; control
/// places follow the normal arcs on commit and the rollback arcs otherwise.
pub fn fire(net: &DbNet, s: &Snapshot, t: &Transition, sigma: &Substitution) -> Result<FireOutcome, SemanticsError> {
    if !is_enabled(net, s, t, sigma) {
        return Err(SemanticsError::NotEnabled { transition: t.name.to_string() });
    }
    let action = induced_action_instance(net, t, sigma)?;
    let (instance, committed) = match &action {
        Some(a) => apply_transactional(&net.persistence, a, &s.instance),
        None => (s.instance.clone(), true),
    };
    let produced = if committed { &t.outputs } else { &t.rollbacks };

    let mut control = s.control.clone();
    let empty = Multiset::new();
    let touched: BTreeSet<&Name> = t.inputs.keys().chain(produced.keys()).collect();
    for p in touched {
        let Some(place) = net.control.place(p) else { continue };
        if place.is_view() {
            continue;
        }
        let mut tokens = control.tokens(p).cloned().unwrap_or_default();
        if let Some(ins) = t.inputs.get(p) {
            let consumed = inscription_binding(ins, sigma)?;
            tokens = tokens.difference(&consumed).map_err(|_| SemanticsError::NotEnabled { transition: t.name.to_string() })?;
        }
        let gained = match produced.get(p) {
            Some(ins) => inscription_binding(ins, sigma)?,
            None => empty.clone(),
        };
        control.set(p.clone(), tokens.sum(&gained));
    }

    let added = instance.facts().filter(|f| !s.instance.contains_fact(f)).collect();
    let deleted = s.instance.facts().filter(|f| !instance.contains_fact(f)).collect();
    let snapshot = Snapshot::new(net, instance, control);
    Ok(FireOutcome { snapshot, committed, action, added, deleted })
}

/// Fires a transition by name.
pub fn fire_named(net: &DbNet, s: &Snapshot, firing: &Firing) -> Result<FireOutcome, SemanticsError> {
    let t = net
        .control
        .transition(&firing.transition)
        .ok_or_else(|| SemanticsError::UnknownTransition(firing.transition.to_string()))?;
    fire(net, s, t, &firing.binding)
}
