//! Hand-coded reference for the names scenario: a ν-net over natural-number
//! names, with its own globally increasing name supply.

use std::collections::BTreeMap;

pub type Name = u64;
pub type Tokens = BTreeMap<Vec<Name>, u64>;

/// The generator token's name.
pub const GEN: Name = 0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NuState {
    pub places: BTreeMap<&'static str, Tokens>,
    next: Name,
}

/// A reference firing; `args` are the consumed names in variable-name order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct NuFiring {
    pub transition: &'static str,
    pub args: Vec<Name>,
}

impl NuState {
    pub fn initial() -> Self {
        let mut places = BTreeMap::new();
        places.insert("Gen", Tokens::from([(vec![GEN], 1)]));
        NuState { places, next: GEN + 1 }
    }

    fn count(&self, place: &str, token: &[Name]) -> u64 {
        self.places.get(place).and_then(|t| t.get(token)).copied().unwrap_or(0)
    }

    fn tokens(&self, place: &str) -> Vec<Vec<Name>> {
        self.places.get(place).map(|t| t.keys().cloned().collect()).unwrap_or_default()
    }

    fn take(&mut self, place: &'static str, token: Vec<Name>) {
        let tokens = self.places.get_mut(place).expect("token present");
        let n = tokens.get_mut(&token).expect("token present");
        *n -= 1;
        if *n == 0 {
            tokens.remove(&token);
        }
        if tokens.is_empty() {
            self.places.remove(place);
        }
    }

    fn put(&mut self, place: &'static str, token: Vec<Name>) {
        *self.places.entry(place).or_default().entry(token).or_insert(0) += 1;
    }

    pub fn enabled(&self) -> Vec<NuFiring> {
        let mut out = Vec::new();
        for g in self.tokens("Gen") {
            out.push(NuFiring { transition: "spawn", args: g });
        }
        for x in self.tokens("Ready") {
            out.push(NuFiring { transition: "start", args: x });
        }
        let active = self.tokens("Active");
        for x in &active {
            for y in &active {
                if x != y || self.count("Active", x) >= 2 {
                    out.push(NuFiring { transition: "pair", args: vec![x[0], y[0]] });
                }
            }
        }
        for l in self.tokens("Linked") {
            out.push(NuFiring { transition: "finish", args: l });
        }
        for x in self.tokens("Done") {
            out.push(NuFiring { transition: "drop", args: x });
        }
        out.sort();
        out
    }

    /// Fires `f`; returns the name created by `spawn`.
    pub fn fire(&mut self, f: &NuFiring) -> Option<Name> {
        assert!(self.enabled().contains(f), "reference firing {f:?} not enabled");
        let a = &f.args;
        match f.transition {
            "spawn" => {
                let n = self.next;
                self.next += 1;
                self.put("Ready", vec![n]);
                return Some(n);
            }
            "start" => {
                self.take("Ready", vec![a[0]]);
                self.put("Active", vec![a[0]]);
            }
            "pair" => {
                self.take("Active", vec![a[0]]);
                self.take("Active", vec![a[1]]);
                self.put("Linked", vec![a[0], a[1]]);
            }
            "finish" => {
                self.take("Linked", vec![a[0], a[1]]);
                self.put("Done", vec![a[0]]);
                self.put("Ready", vec![a[1]]);
            }
            "drop" => self.take("Done", vec![a[0]]),
            other => panic!("unknown transition {other}"),
        }
        None
    }
}

use dbnet::control::DbNet;
use dbnet::semantics::{enabled_firings, InputDomains, Snapshot};
use dbnet::sim::simulate_random;
use dbnet::types::{Substitution, Value};
use std::collections::BTreeSet;

fn map_args(binding: &Substitution, rho: &BTreeMap<Value, Name>) -> Result<Vec<Name>, String> {
    binding
        .iter()
        .filter(|(v, _)| !v.is_fresh())
        .map(|(v, val)| rho.get(val).copied().ok_or_else(|| format!("`{}` = {val} has no reference name", v.name)))
        .collect()
}

fn mapped_marking(s: &Snapshot, rho: &BTreeMap<Value, Name>) -> Result<BTreeMap<&'static str, Tokens>, String> {
    let mut out: BTreeMap<&'static str, Tokens> = BTreeMap::new();
    for (p, tokens) in s.control.iter() {
        let place: &'static str = ["Gen", "Ready", "Active", "Linked", "Done"]
            .into_iter()
            .find(|q| **q == **p)
            .ok_or_else(|| format!("unexpected place {p}"))?;
        for (t, &n) in tokens.iter() {
            let names = t.iter().map(|v| rho.get(v).copied().ok_or_else(|| format!("{v} has no reference name"))).collect::<Result<Vec<_>, _>>()?;
            *out.entry(place).or_default().entry(names).or_insert(0) += n;
        }
    }
    Ok(out)
}

/// Runs the names scenario with `seed` next to the reference. At each step the
/// enabled firings and the reached markings must agree up to a renaming that
/// is a bijection on the names alive in both.
pub fn lockstep(net: &DbNet, s0: &Snapshot, seed: u64, steps: u64) -> Result<usize, String> {
    let run = simulate_random(net, s0, &InputDomains::new(), seed, steps).map_err(|e| e.to_string())?;
    let mut reference = NuState::initial();
    let mut rho: BTreeMap<Value, Name> = BTreeMap::from([(Value::str("gen"), GEN)]);
    let mut before = s0;
    if mapped_marking(before, &rho)? != reference.places {
        return Err("initial markings differ".into());
    }
    for (r, after) in run.records.iter().zip(&run.states) {
        let step = r.step;
        let mut ours = Vec::new();
        for f in enabled_firings(net, before, &InputDomains::new(), &BTreeSet::new()).map_err(|e| e.to_string())? {
            let t = ["spawn", "start", "pair", "finish", "drop"].into_iter().find(|t| **t == *f.transition).expect("known");
            ours.push(NuFiring { transition: t, args: map_args(&f.binding, &rho)? });
        }
        ours.sort();
        if ours != reference.enabled() {
            return Err(format!("seed {seed} step {step}: enabled {ours:?}, reference {:?}", reference.enabled()));
        }
        let t = ours.iter().find(|f| *f.transition == *r.firing.transition).expect("fired transition enabled").transition;
        let chosen = NuFiring { transition: t, args: map_args(&r.firing.binding, &rho)? };
        let created = reference.fire(&chosen);
        for (v, val) in r.firing.binding.iter().filter(|(v, _)| v.is_fresh()) {
            let name = created.ok_or_else(|| format!("step {step}: fresh `{}` without a reference name", v.name))?;
            if before.active_values().contains(val) {
                return Err(format!("seed {seed} step {step}: fresh value {val} is alive"));
            }
            rho.insert(val.clone(), name);
        }
        let live: BTreeSet<&Value> = after.control.values().collect();
        let images: BTreeSet<Name> = live.iter().map(|v| rho[*v]).collect();
        if images.len() != live.len() {
            return Err(format!("seed {seed} step {step}: renaming is not injective on live names"));
        }
        if mapped_marking(after, &rho)? != reference.places {
            return Err(format!("seed {seed} step {step}: markings differ after {}", r.firing.transition));
        }
        before = after;
    }
    Ok(run.records.len())
}
