//! Seeded random run of the ticket scenario, printed as a JSON-lines trace,
//! then replayed to check every state digest.
//!
//! Run with `cargo run --example simulate_ticket [seed] [steps]`.

use dbnet::dsl;
use dbnet::scenarios;
use dbnet::sim::{replay_trace, simulate_random};

pub fn run_with(seed: u64, steps: u64) -> String {
    let doc = dsl::parse(scenarios::TICKET).expect("bundled scenario parses");
    let (net, s0) = dsl::load_snapshot(&doc).expect("bundled scenario is valid");
    let result = simulate_random(&net, &s0, &doc.domains, seed, steps).expect("input domains cover the net");
    let trace = result.to_jsonl();
    let replayed = replay_trace(&net, &s0, &trace).expect("trace replays");

    let mut out = String::new();
    for r in &result.records {
        let status = if r.committed { "" } else { "  (rolled back)" };
        out.push_str(&format!("{:>3} {} {}{status}\n", r.step, r.firing.transition, r.firing.binding.to_json()));
    }
    out.push_str(&format!("end: {} after {} step(s)\n", result.end.as_str(), result.records.len()));
    out.push_str(&format!("final database:\n{}", result.final_state().instance.to_text()));
    out.push_str(&format!("replayed {} state(s), digests match\n", replayed.len()));
    out
}

pub fn run() -> String {
    run_with(42, 12)
}

#[allow(dead_code)]
fn main() {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let steps = args.next().and_then(|s| s.parse().ok()).unwrap_or(12);
    print!("{}", run_with(seed, steps));
}
