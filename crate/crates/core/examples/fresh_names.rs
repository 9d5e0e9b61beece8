//! The names scenario: a net with no data logic and one string type, where
//! `spawn` creates a new name on every firing. A name is new with respect to
//! the current state, so it can come back once no token holds it.
//!
//! Run with `cargo run --example fresh_names [seed]`.

use std::collections::BTreeSet;

use dbnet::dsl;
use dbnet::scenarios;
use dbnet::sim::simulate_random;
use dbnet::types::Value;

pub fn run_with(seed: u64) -> String {
    let doc = dsl::parse(scenarios::NAMES).expect("bundled scenario parses");
    let (net, s0) = dsl::load_snapshot(&doc).expect("bundled scenario is valid");
    let result = simulate_random(&net, &s0, &doc.domains, seed, 40).expect("no external variables");
    let mut out = String::new();
    let mut seen: BTreeSet<Value> = s0.active_values();
    let mut before = &s0;
    for (r, s) in result.records.iter().zip(&result.states) {
        let created: Vec<String> = r
            .firing
            .binding
            .iter()
            .filter(|(v, _)| v.is_fresh())
            .map(|(_, val)| {
                let again = if seen.contains(val) { " (reused)" } else { "" };
                assert!(!before.active_values().contains(val), "fresh value already present");
                format!("{val}{again}")
            })
            .collect();
        seen.extend(s.active_values());
        let names: usize = s.control.iter().map(|(_, m)| m.size() as usize).sum();
        out.push_str(&format!("{:>3} {:<7} {:<12} tokens {names}\n", r.step, r.firing.transition, created.join(" ")));
        before = s;
    }
    out.push_str(&format!("final marking: {}\n", result.final_state().marking().to_json()));
    out
}

pub fn run() -> String {
    run_with(7)
}

#[allow(dead_code)]
fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    print!("{}", run_with(seed));
}
