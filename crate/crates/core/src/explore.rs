//! Bounded reachability over the state space of a net.

use std::fmt;

use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::control::DbNet;
use crate::dsl::{parse_query, Diagnostics};
use crate::query::{holds, Query, QueryError};
use crate::semantics::{build_lts, Bounds, InputDomains, Lts, Monitors, SemanticsError, Snapshot};
use crate::types::Name;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl CmpOp {
    fn holds(self, a: u64, b: u64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Eq => a == b,
            CmpOp::Ge => a >= b,
            CmpOp::Gt => a > b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// `marking(place) op count`: a bound on the number of tokens in a place.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarkingCondition {
    pub place: Name,
    pub op: CmpOp,
    pub count: u64,
}

impl fmt::Display for MarkingCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "marking({}) {} {}", self.place, self.op.symbol(), self.count)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GoalError {
    #[error("goal query: {0}")]
    Parse(Diagnostics),
    #[error("goal query: {0}")]
    Query(#[from] QueryError),
    #[error("marking condition `{0}`: expected `marking(place) >= n` or `place >= n`")]
    Marking(String),
    #[error("marking condition names unknown place `{0}`")]
    UnknownPlace(String),
}

impl MarkingCondition {
    /// Parses `marking(q) >= 1` or the short form `q >= 1`.
    pub fn parse(text: &str) -> Result<Self, GoalError> {
        let bad = || GoalError::Marking(text.to_string());
        let ops = [("<=", CmpOp::Le), (">=", CmpOp::Ge), ("<", CmpOp::Lt), (">", CmpOp::Gt), ("=", CmpOp::Eq)];
        let (at, sym, op) = ops
            .iter()
            .filter_map(|&(sym, op)| text.find(sym).map(|i| (i, sym, op)))
            .min_by_key(|&(i, sym, _)| (i, std::cmp::Reverse(sym.len())))
            .ok_or_else(bad)?;
        let lhs = text[..at].trim();
        let count = text[at + sym.len()..].trim().parse::<u64>().map_err(|_| bad())?;
        let place = match lhs.strip_prefix("marking") {
            Some(rest) => rest.trim().strip_prefix('(').and_then(|r| r.strip_suffix(')')).ok_or_else(bad)?.trim(),
            None => lhs,
        };
        if place.is_empty() || !place.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(bad());
        }
        Ok(MarkingCondition { place: place.into(), op, count })
    }
}

/// A reachability target: a closed query over the database and token-count conditions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Goal {
    pub db: Option<Query>,
    pub marking: Vec<MarkingCondition>,
}

impl Goal {
    /// Builds a goal from its textual parts, checking it against the net.
    pub fn parse(net: &DbNet, db: Option<&str>, marking: &[String]) -> Result<Goal, GoalError> {
        let db = match db {
            Some(text) => {
                let q = parse_query(text, &[]).map_err(GoalError::Parse)?;
                // parsed without a scope, so the query is closed
                q.typecheck(&net.persistence.schema, &net.types)?;
                Some(q)
            }
            None => None,
        };
        let marking = marking.iter().map(|m| MarkingCondition::parse(m)).collect::<Result<Vec<_>, _>>()?;
        if let Some(c) = marking.iter().find(|c| net.control.place(&c.place).is_none()) {
            return Err(GoalError::UnknownPlace(c.place.to_string()));
        }
        Ok(Goal { db, marking })
    }

    pub fn holds(&self, s: &Snapshot) -> bool {
        let db_ok = self.db.as_ref().is_none_or(|q| holds(q, &s.instance).expect("typechecked goal"));
        db_ok
            && self.marking.iter().all(|c| {
                let n = s.tokens(&c.place).map_or(0, |m| m.size());
                c.op.holds(n, c.count)
            })
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.db.iter().map(ToString::to_string).collect();
        parts.extend(self.marking.iter().map(ToString::to_string));
        if parts.is_empty() {
            f.write_str("true")
        } else {
            f.write_str(&parts.join(" and "))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Reachable,
    /// Exploration was exhaustive and no state satisfies the goal.
    Unreachable,
    /// No explored state satisfies the goal, but the bounds cut the search.
    UnreachableWithinBounds,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Reachable => "reachable",
            Verdict::Unreachable => "unreachable",
            Verdict::UnreachableWithinBounds => "unreachable within bounds",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Exploration {
    pub lts: Lts,
    pub goal: Option<Goal>,
    pub verdict: Option<Verdict>,
    /// State satisfying the goal closest to the initial state.
    pub goal_state: Option<usize>,
    /// Edge indices leading from the initial state to `goal_state`.
    pub witness: Vec<usize>,
    pub monitors: Monitors,
}

impl Exploration {
    pub fn summary_json(&self) -> Json {
        let goal = self.goal.as_ref().map(|g| {
            let witness: Vec<Json> = self
                .witness
                .iter()
                .map(|&e| {
                    let e = &self.lts.edges[e];
                    json!({
                        "transition": &*e.firing.transition,
                        "binding": e.firing.binding.to_json(),
                        "committed": e.committed,
                    })
                })
                .collect();
            json!({
                "goal": g.to_string(),
                "verdict": self.verdict.map(Verdict::as_str),
                "state": self.goal_state,
                "witness": witness,
            })
        });
        json!({
            "states": self.lts.states.len(),
            "edges": self.lts.edges.len(),
            "truncated": self.lts.is_truncated(),
            "truncated_states": self.lts.truncated_states,
            "truncated_depth": self.lts.truncated_depth,
            "goal": goal,
            "monitors": {
                "max_tokens_per_place": self.monitors.max_tokens_per_place.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
                "max_instance_size": self.monitors.max_instance_size,
                "max_depth": self.monitors.max_depth,
            },
        })
    }

    pub fn to_json(&self) -> Json {
        let mut out = self.summary_json();
        out["lts"] = self.lts.to_json();
        out
    }
}

pub fn explore(
    net: &DbNet,
    initial: Snapshot,
    domains: &InputDomains,
    bounds: Bounds,
    workers: usize,
    goal: Option<Goal>,
) -> Result<Exploration, SemanticsError> {
    let lts = build_lts(net, initial, domains, bounds, workers)?;
    let goal_state = goal.as_ref().and_then(|g| lts.find(|s| g.holds(s)));
    let witness = goal_state.map(|s| lts.path_to(s)).unwrap_or_default();
    let verdict = goal.as_ref().map(|_| match goal_state {
        Some(_) => Verdict::Reachable,
        None if lts.is_truncated() => Verdict::UnreachableWithinBounds,
        None => Verdict::Unreachable,
    });
    let monitors = lts.monitors();
    Ok(Exploration { lts, goal, verdict, goal_state, witness, monitors })
}
