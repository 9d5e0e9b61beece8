use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::control::DbNet;
use crate::types::{Name, Substitution};

use super::firing::{enabled_firings, fire_named, FireOutcome, Firing, InputDomains, SemanticsError};
use super::marking::Snapshot;

/// Exploration budget. `None` means unbounded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Bounds {
    pub max_states: Option<usize>,
    pub max_depth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub firing: Firing,
    pub committed: bool,
}

/// Largest values seen over the stored states.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Monitors {
    pub max_tokens_per_place: BTreeMap<Name, u64>,
    pub max_instance_size: usize,
    pub max_depth: usize,
}

/// Reachable snapshots and firings, in breadth-first discovery order.
/// State 0 is the initial snapshot.
#[derive(Clone, Debug, Serialize)]
pub struct Lts {
    pub states: Vec<Snapshot>,
    pub depth: Vec<usize>,
    pub edges: Vec<Edge>,
    /// Edge through which each state was first reached.
    pub parent: Vec<Option<usize>>,
    /// Some successor was dropped because the state budget was exhausted.
    pub truncated_states: bool,
    /// Some state at the depth bound had enabled firings.
    pub truncated_depth: bool,
}

impl Lts {
    pub fn is_truncated(&self) -> bool {
        self.truncated_states || self.truncated_depth
    }

    pub fn initial(&self) -> &Snapshot {
        &self.states[0]
    }

    /// Edge indices of the breadth-first path from the initial state to `state`.
    pub fn path_to(&self, mut state: usize) -> Vec<usize> {
        let mut path = Vec::new();
        while let Some(e) = self.parent[state] {
            path.push(e);
            state = self.edges[e].source;
        }
        path.reverse();
        path
    }

    /// First state, in discovery order, satisfying `pred`; by construction its path is shortest.
    pub fn find(&self, mut pred: impl FnMut(&Snapshot) -> bool) -> Option<usize> {
        self.states.iter().position(&mut pred)
    }

    pub fn monitors(&self) -> Monitors {
        let mut m = Monitors::default();
        for (s, &d) in self.states.iter().zip(&self.depth) {
            for (p, tokens) in s.control.iter().chain(s.views.iter()) {
                let e = m.max_tokens_per_place.entry(p.clone()).or_insert(0);
                *e = (*e).max(tokens.size());
            }
            m.max_instance_size = m.max_instance_size.max(s.instance.len());
            m.max_depth = m.max_depth.max(d);
        }
        m
    }

    /// Summary plus edges, with states identified by index and digest.
    pub fn to_json(&self) -> serde_json::Value {
        let states: Vec<_> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                serde_json::json!({
                    "id": i,
                    "depth": self.depth[i],
                    "hash": s.digest(),
                    "db": s.instance.to_json(),
                    "marking": s.control.to_json(),
                })
            })
            .collect();
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|e| {
                serde_json::json!({
                    "source": e.source,
                    "target": e.target,
                    "transition": &*e.firing.transition,
                    "binding": e.firing.binding.to_json(),
                    "committed": e.committed,
                })
            })
            .collect();
        serde_json::json!({
            "states": states,
            "edges": edges,
            "truncated_states": self.truncated_states,
            "truncated_depth": self.truncated_depth,
        })
    }
}

type Expansion = Result<Vec<(Firing, FireOutcome)>, SemanticsError>;

fn expand(net: &DbNet, s: &Snapshot, domains: &InputDomains) -> Expansion {
    let none = BTreeSet::new();
    enabled_firings(net, s, domains, &none)?
        .into_iter()
        .map(|f| fire_named(net, s, &f).map(|o| (f, o)))
        .collect()
}

/// Breadth-first closure of the firing relation from `initial`.
///
/// States are deduplicated by instance and control marking. Each frontier is
/// expanded on `workers` threads and merged in frontier order, so the result
/// does not depend on the number of workers. Fresh values are generated per
/// state, which keeps them a function of the state alone.
pub fn build_lts(
    net: &DbNet,
    initial: Snapshot,
    domains: &InputDomains,
    bounds: Bounds,
    workers: usize,
) -> Result<Lts, SemanticsError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    let mut lts = Lts {
        states: vec![initial.clone()],
        depth: vec![0],
        edges: Vec::new(),
        parent: vec![None],
        truncated_states: false,
        truncated_depth: false,
    };
    let mut index: HashMap<Snapshot, usize> = HashMap::new();
    index.insert(initial, 0);
    let mut frontier = vec![0usize];
    let mut level = 0usize;

    while !frontier.is_empty() {
        let at_bound = bounds.max_depth.is_some_and(|d| level >= d);
        let expansions: Vec<Expansion> = pool.install(|| {
            frontier.par_iter().map(|&i| expand(net, &lts.states[i], domains)).collect()
        });
        if at_bound {
            for exp in expansions {
                if !exp?.is_empty() {
                    lts.truncated_depth = true;
                }
            }
            break;
        }
        let mut next = Vec::new();
        for (&source, exp) in frontier.iter().zip(expansions) {
            for (firing, outcome) in exp? {
                let target = match index.get(&outcome.snapshot) {
                    Some(&t) => t,
                    None => {
                        if bounds.max_states.is_some_and(|m| lts.states.len() >= m) {
                            lts.truncated_states = true;
                            continue;
                        }
                        let t = lts.states.len();
                        index.insert(outcome.snapshot.clone(), t);
                        lts.states.push(outcome.snapshot);
                        lts.depth.push(level + 1);
                        lts.parent.push(Some(lts.edges.len()));
                        next.push(t);
                        t
                    }
                };
                lts.edges.push(Edge { source, target, firing, committed: outcome.committed });
            }
        }
        frontier = next;
        level += 1;
    }
    Ok(lts)
}

/// Re-fires a sequence of firings from `initial`, returning every visited snapshot.
pub fn replay(net: &DbNet, initial: &Snapshot, firings: &[(Name, Substitution)]) -> Result<Vec<Snapshot>, SemanticsError> {
    let mut states = vec![initial.clone()];
    for (t, b) in firings {
        let cur = states.last().expect("nonempty");
        let out = fire_named(net, cur, &Firing { transition: t.clone(), binding: b.clone() })?;
        states.push(out.snapshot);
    }
    Ok(states)
}
