use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::control::DbNet;
use crate::multiset::Multiset;
use crate::persistence::{ActiveDomain, DatabaseInstance, Tuple};
use crate::query::answers;
use crate::types::{Name, Value};

/// Tokens per place. Places without tokens are not stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Marking {
    places: BTreeMap<Name, Multiset<Tuple>>,
}

impl Marking {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tokens(&self, place: &str) -> Option<&Multiset<Tuple>> {
        self.places.get(place)
    }

    pub fn count(&self, place: &str, token: &Tuple) -> u64 {
        self.places.get(place).map_or(0, |m| m.count(token))
    }

    /// Number of tokens in `place`, with multiplicity.
    pub fn size(&self, place: &str) -> u64 {
        self.places.get(place).map_or(0, Multiset::size)
    }

    pub fn total(&self) -> u64 {
        self.places.values().map(Multiset::size).sum()
    }

    pub fn set(&mut self, place: Name, tokens: Multiset<Tuple>) {
        if tokens.is_empty() {
            self.places.remove(&place);
        } else {
            self.places.insert(place, tokens);
        }
    }

    pub fn add(&mut self, place: &str, token: Tuple, n: u64) {
        if n > 0 {
            self.places.entry(place.into()).or_default().insert(token, n);
        }
    }

    pub fn with(mut self, place: &str, token: Tuple, n: u64) -> Self {
        self.add(place, token, n);
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Multiset<Tuple>)> {
        self.places.iter()
    }

    pub fn places(&self) -> impl Iterator<Item = &Name> {
        self.places.keys()
    }

    pub fn is_empty(&self) -> bool {
        self.places.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = &Value> {
        self.places.values().flat_map(|m| m.elements()).flatten()
    }

    /// Union of two markings over disjoint place sets.
    pub fn merged(&self, other: &Marking) -> Marking {
        let mut out = self.clone();
        for (p, ms) in &other.places {
            let sum = out.places.get(p).map_or_else(|| ms.clone(), |m| m.sum(ms));
            out.set(p.clone(), sum);
        }
        out
    }

    /// `{place: [{"token": [...], "count": n}]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.places
                .iter()
                .map(|(p, ms)| {
                    let tokens = ms
                        .iter()
                        .map(|(t, n)| {
                            serde_json::json!({
                                "token": t.iter().map(Value::to_json).collect::<Vec<_>>(),
                                "count": n,
                            })
                        })
                        .collect();
                    (p.to_string(), serde_json::Value::Array(tokens))
                })
                .collect(),
        )
    }
}

/// Tokens lost and gained per place between two markings.
pub fn marking_delta(before: &Marking, after: &Marking) -> BTreeMap<Name, (Multiset<Tuple>, Multiset<Tuple>)> {
    let empty = Multiset::new();
    let places: BTreeSet<&Name> = before.places().chain(after.places()).collect();
    places
        .into_iter()
        .filter_map(|p| {
            let (lost, gained) = Multiset::delta(
                before.tokens(p).unwrap_or(&empty),
                after.tokens(p).unwrap_or(&empty),
            );
            (!lost.is_empty() || !gained.is_empty()).then(|| (p.clone(), (lost, gained)))
        })
        .collect()
}

/// View-place tokens: the answers of each view's query over `instance`.
pub fn align_view_places(net: &DbNet, instance: &DatabaseInstance) -> Marking {
    let mut views = Marking::new();
    let adom = instance.active_domain();
    for p in net.control.view_places() {
        let q = p.query().and_then(|q| net.logic.query(q)).expect("validated net: view query exists");
        let ans = crate::query::answers_with(q, instance, &adom);
        views.set(p.name.clone(), ans.into_iter().collect());
    }
    views
}

/// A database instance with an aligned marking.
///
/// Equality and hashing cover the instance and the control places only;
/// view tokens are a function of the instance.
#[derive(Clone, Debug, Serialize)]
pub struct Snapshot {
    pub instance: DatabaseInstance,
    pub control: Marking,
    pub views: Marking,
}

impl PartialEq for Snapshot {
    fn eq(&self, other: &Self) -> bool {
        self.instance == other.instance && self.control == other.control
    }
}

impl Eq for Snapshot {}

impl Hash for Snapshot {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.instance.hash(state);
        self.control.hash(state);
    }
}

impl Snapshot {
    /// Builds a snapshot, computing the view tokens from `instance`.
    pub fn new(net: &DbNet, instance: DatabaseInstance, control: Marking) -> Self {
        let views = align_view_places(net, &instance);
        Snapshot { instance, control, views }
    }

    /// The full marking, control and view places together.
    pub fn marking(&self) -> Marking {
        self.control.merged(&self.views)
    }

    pub fn tokens(&self, place: &str) -> Option<&Multiset<Tuple>> {
        self.control.tokens(place).or_else(|| self.views.tokens(place))
    }

    /// Values of the instance and of the marking.
    pub fn active_values(&self) -> BTreeSet<Value> {
        self.instance
            .values()
            .chain(self.control.values())
            .chain(self.views.values())
            .cloned()
            .collect()
    }

    pub fn active_domain(&self) -> ActiveDomain {
        ActiveDomain::from_values(self.active_values().iter())
    }

    /// Canonical text of the instance and control marking; the input of [`Snapshot::digest`].
    pub fn canonical_text(&self) -> String {
        let mut out = self.instance.to_text();
        out.push_str("--\n");
        for (p, ms) in self.control.iter() {
            for (t, n) in ms {
                let _ = write!(out, "{p} <");
                for (i, v) in t.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    let _ = write!(out, "{v}");
                }
                let _ = writeln!(out, "> {n}");
            }
        }
        out
    }

    /// Stable hex SHA-256 of the canonical text.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical_text().as_bytes());
        hash.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Whether every view place holds exactly its query's answers.
    pub fn is_aligned(&self, net: &DbNet) -> bool {
        net.control.view_places().all(|p| {
            let q = p.query().and_then(|q| net.logic.query(q)).expect("validated net");
            let expected: Multiset<Tuple> = answers(q, &self.instance).into_iter().collect();
            self.views.tokens(&p.name).cloned().unwrap_or_default() == expected
        })
    }
}
