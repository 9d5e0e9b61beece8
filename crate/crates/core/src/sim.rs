//! Seeded and interactive simulation, with JSON-lines traces that can be replayed.

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::control::DbNet;
use crate::persistence::Fact;
use crate::semantics::{enabled_firings, fire_named, marking_delta, Firing, InputDomains, SemanticsError, Snapshot};
use crate::types::{Substitution, Value};

/// Picks the next firing among the enabled ones; `None` stops the run.
pub trait Chooser {
    fn choose(&mut self, step: u64, state: &Snapshot, enabled: &[Firing]) -> io::Result<Option<usize>>;
}

/// Uniform choice driven by a seeded ChaCha8 generator.
pub struct RandomChooser {
    rng: ChaCha8Rng,
}

impl RandomChooser {
    pub fn new(seed: u64) -> Self {
        RandomChooser { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Chooser for RandomChooser {
    fn choose(&mut self, _: u64, _: &Snapshot, enabled: &[Firing]) -> io::Result<Option<usize>> {
        Ok(Some(self.rng.gen_range(0..enabled.len())))
    }
}

/// Terminal step-through: lists the enabled firings and reads an index.
pub struct InteractiveChooser<R, W> {
    input: R,
    output: W,
}

impl<R: BufRead, W: Write> InteractiveChooser<R, W> {
    pub fn new(input: R, output: W) -> Self {
        InteractiveChooser { input, output }
    }
}

impl<R: BufRead, W: Write> Chooser for InteractiveChooser<R, W> {
    fn choose(&mut self, step: u64, state: &Snapshot, enabled: &[Firing]) -> io::Result<Option<usize>> {
        let out = &mut self.output;
        writeln!(out, "-- step {step}")?;
        for (p, tokens) in state.views.iter() {
            let shown: Vec<String> = tokens.elements().map(|t| show_tuple(t)).collect();
            writeln!(out, "   view {p}: {}", shown.join(" "))?;
        }
        for (p, tokens) in state.control.iter() {
            let shown: Vec<String> = tokens
                .iter()
                .map(|(t, &n)| if n == 1 { show_tuple(t) } else { format!("{n}*{}", show_tuple(t)) })
                .collect();
            writeln!(out, "   {p}: {}", shown.join(" "))?;
        }
        for (i, f) in enabled.iter().enumerate() {
            writeln!(out, "  [{i}] {} {}", f.transition, show_binding(&f.binding))?;
        }
        loop {
            write!(out, "choose 0-{} (q to stop): ", enabled.len() - 1)?;
            out.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Ok(None);
            }
            let line = line.trim();
            if line == "q" {
                return Ok(None);
            }
            match line.parse::<usize>() {
                Ok(i) if i < enabled.len() => return Ok(Some(i)),
                _ => writeln!(out, "not a valid choice: {line}")?,
            }
        }
    }
}

fn show_tuple(t: &[Value]) -> String {
    format!("<{}>", t.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))
}

fn show_binding(b: &Substitution) -> String {
    let parts: Vec<String> = b.iter().map(|(k, v)| format!("{}={v}", k.name)).collect();
    format!("{{{}}}", parts.join(", "))
}

/// One firing of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub step: u64,
    pub firing: Firing,
    pub committed: bool,
    pub added: BTreeSet<Fact>,
    pub deleted: BTreeSet<Fact>,
    pub marking_delta: Json,
    /// Digest of the snapshot reached by this firing.
    pub hash: String,
}

impl TraceRecord {
    pub fn to_json(&self) -> Json {
        json!({
            "step": self.step,
            "transition": &*self.firing.transition,
            "binding": self.firing.binding.to_json(),
            "committed": self.committed,
            "added": self.added.iter().map(Fact::to_json).collect::<Vec<_>>(),
            "deleted": self.deleted.iter().map(Fact::to_json).collect::<Vec<_>>(),
            "marking_delta": self.marking_delta,
            "hash": self.hash,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EndReason {
    /// No firing was enabled.
    Deadlock,
    /// The step budget was used up.
    Steps,
    /// The chooser stopped the run.
    Stopped,
}

impl EndReason {
    pub fn as_str(self) -> &'static str {
        match self {
            EndReason::Deadlock => "deadlock",
            EndReason::Steps => "steps",
            EndReason::Stopped => "stopped",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SimResult {
    pub initial: Snapshot,
    pub records: Vec<TraceRecord>,
    pub states: Vec<Snapshot>,
    pub end: EndReason,
}

impl SimResult {
    pub fn final_state(&self) -> &Snapshot {
        self.states.last().unwrap_or(&self.initial)
    }

    /// The trace as JSON lines: one record per firing, then a closing record
    /// with the end reason and the final database.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_json().to_string());
            out.push('\n');
        }
        let last = self.final_state();
        let end = json!({
            "end": self.end.as_str(),
            "steps": self.records.len(),
            "initial_hash": self.initial.digest(),
            "final_hash": last.digest(),
            "final_db": last.instance.to_json(),
        });
        out.push_str(&end.to_string());
        out.push('\n');
        out
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Options of a run.
#[derive(Clone, Copy, Debug, Default)]
pub struct SimOptions {
    pub steps: u64,
    /// Also keep fresh values distinct from every value seen earlier in the run.
    pub strict_fresh: bool,
}

pub fn simulate(
    net: &DbNet,
    initial: &Snapshot,
    domains: &InputDomains,
    options: SimOptions,
    chooser: &mut dyn Chooser,
) -> Result<SimResult, SimError> {
    let mut state = initial.clone();
    let mut seen: BTreeSet<Value> = if options.strict_fresh { state.active_values() } else { BTreeSet::new() };
    let mut records = Vec::new();
    let mut states = Vec::new();
    let mut end = EndReason::Steps;
    for step in 1..=options.steps {
        let enabled = enabled_firings(net, &state, domains, &seen)?;
        if enabled.is_empty() {
            end = EndReason::Deadlock;
            break;
        }
        let Some(i) = chooser.choose(step, &state, &enabled)? else {
            end = EndReason::Stopped;
            break;
        };
        let firing = enabled[i].clone();
        let outcome = fire_named(net, &state, &firing)?;
        let next = outcome.snapshot;
        records.push(TraceRecord {
            step,
            firing,
            committed: outcome.committed,
            added: outcome.added,
            deleted: outcome.deleted,
            marking_delta: delta_json(&state, &next),
            hash: next.digest(),
        });
        if options.strict_fresh {
            seen.extend(next.active_values());
        }
        states.push(next.clone());
        state = next;
    }
    Ok(SimResult { initial: initial.clone(), records, states, end })
}

/// Seeded random run.
pub fn simulate_random(
    net: &DbNet,
    initial: &Snapshot,
    domains: &InputDomains,
    seed: u64,
    steps: u64,
) -> Result<SimResult, SemanticsError> {
    let options = SimOptions { steps, strict_fresh: false };
    match simulate(net, initial, domains, options, &mut RandomChooser::new(seed)) {
        Ok(r) => Ok(r),
        Err(SimError::Semantics(e)) => Err(e),
        Err(SimError::Io(e)) => unreachable!("random choice does no I/O: {e}"),
    }
}

fn delta_json(before: &Snapshot, after: &Snapshot) -> Json {
    let tokens = |ms: &crate::multiset::Multiset<Vec<Value>>| -> Json {
        ms.iter()
            .map(|(t, n)| json!({ "token": t.iter().map(Value::to_json).collect::<Vec<_>>(), "count": n }))
            .collect()
    };
    let delta = marking_delta(&before.marking(), &after.marking());
    Json::Object(
        delta
            .iter()
            .map(|(p, (lost, gained))| (p.to_string(), json!({ "removed": tokens(lost), "added": tokens(gained) })))
            .collect(),
    )
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("step {step}: {source}")]
    Fire { step: u64, source: SemanticsError },
    #[error("step {step}: expected state {expected}, replay reached {found}")]
    Diverged { step: u64, expected: String, found: String },
}

/// Re-fires every record of a trace from `initial` and checks each state digest.
/// Returns the visited snapshots.
pub fn replay_trace(net: &DbNet, initial: &Snapshot, trace: &str) -> Result<Vec<Snapshot>, ReplayError> {
    let mut state = initial.clone();
    let mut states = vec![state.clone()];
    for (i, line) in trace.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fmt_err = |message: String| ReplayError::Format { line: i + 1, message };
        let rec: Json = serde_json::from_str(line).map_err(|e| fmt_err(e.to_string()))?;
        if rec.get("end").is_some() {
            let expected = rec["final_hash"].as_str().unwrap_or_default();
            if expected != state.digest() {
                return Err(ReplayError::Diverged {
                    step: states.len() as u64 - 1,
                    expected: expected.to_string(),
                    found: state.digest(),
                });
            }
            break;
        }
        let step = rec["step"].as_u64().ok_or_else(|| fmt_err("missing step".into()))?;
        let tname = rec["transition"].as_str().ok_or_else(|| fmt_err("missing transition".into()))?;
        let t = net
            .control
            .transition(tname)
            .ok_or_else(|| fmt_err(format!("unknown transition `{tname}`")))?;
        let mut binding = Substitution::new();
        for v in t.vars() {
            let json = rec["binding"].get(&*v.name).ok_or_else(|| fmt_err(format!("binding lacks `{}`", v.name)))?;
            let value = Value::from_json(v.ty, json).ok_or_else(|| fmt_err(format!("bad value for `{}`", v.name)))?;
            binding.bind(v, value).map_err(|e| fmt_err(e.to_string()))?;
        }
        let firing = Firing { transition: t.name.clone(), binding };
        let out = fire_named(net, &state, &firing).map_err(|source| ReplayError::Fire { step, source })?;
        let expected = rec["hash"].as_str().unwrap_or_default();
        let found = out.snapshot.digest();
        if expected != found {
            return Err(ReplayError::Diverged { step, expected: expected.to_string(), found });
        }
        state = out.snapshot;
        states.push(state.clone());
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl;

    fn black_token() -> (dsl::NetDocument, DbNet, Snapshot) {
        let doc = dsl::parse(crate::scenarios::BLACK_TOKEN).unwrap();
        let (net, s0) = dsl::load_snapshot(&doc).unwrap();
        (doc, net, s0)
    }

    #[test]
    fn run_ends_in_deadlock() {
        let (doc, net, s0) = black_token();
        let run = simulate_random(&net, &s0, &doc.domains, 0, 5).unwrap();
        assert_eq!(run.end, EndReason::Deadlock);
        assert_eq!(run.records.len(), 1);
        assert_eq!(run.records[0].marking_delta["p"]["removed"].as_array().map(Vec::len), Some(1));
        let states = replay_trace(&net, &s0, &run.to_jsonl()).unwrap();
        assert_eq!(states.last(), Some(run.final_state()));
    }

    #[test]
    fn zero_steps_is_an_empty_run() {
        let (doc, net, s0) = black_token();
        let run = simulate_random(&net, &s0, &doc.domains, 0, 0).unwrap();
        assert_eq!(run.end, EndReason::Steps);
        assert_eq!(run.to_jsonl().lines().count(), 1);
    }

    #[test]
    fn interactive_stops_at_end_of_input() {
        let (doc, net, s0) = black_token();
        let mut shown = Vec::new();
        let mut chooser = InteractiveChooser::new(io::Cursor::new(&b""[..]), &mut shown);
        let run = simulate(&net, &s0, &doc.domains, SimOptions { steps: 3, strict_fresh: false }, &mut chooser).unwrap();
        assert_eq!(run.end, EndReason::Stopped);
        assert!(String::from_utf8(shown).unwrap().contains("[0] move {}"));
    }
}
