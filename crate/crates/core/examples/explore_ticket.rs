//! Bounded reachability on the ticket scenario: a logged ticket is reachable,
//! an employee holding two tickets is not.
//!
//! Run with `cargo run --release --example explore_ticket`.

use dbnet::dsl;
use dbnet::explore::{explore, Goal};
use dbnet::scenarios;
use dbnet::semantics::Bounds;

pub fn run_with(max_states: usize) -> String {
    let doc = dsl::parse(scenarios::TICKET).expect("bundled scenario parses");
    let (net, s0) = dsl::load_snapshot(&doc).expect("bundled scenario is valid");
    let bounds = Bounds { max_states: Some(max_states), max_depth: None };
    let mut out = String::new();
    for goal in [
        "exists t:int, e:string, d:string . Log(t, e, d)",
        "exists e:string, t1:int, t2:int . Resp(e, t1) and Resp(e, t2) and t1 != t2",
    ] {
        let goal = Goal::parse(&net, Some(goal), &[]).expect("goal typechecks");
        let ex = explore(&net, s0.clone(), &doc.domains, bounds, 1, Some(goal.clone())).expect("exploration runs");
        out.push_str(&format!(
            "goal {goal}\n  states {}, edges {}, truncated {}\n  verdict: {}\n",
            ex.lts.states.len(),
            ex.lts.edges.len(),
            ex.lts.is_truncated(),
            ex.verdict.expect("a goal was given").as_str()
        ));
        for &e in &ex.witness {
            let edge = &ex.lts.edges[e];
            out.push_str(&format!("    {} {}\n", edge.firing.transition, edge.firing.binding.to_json()));
        }
    }
    out
}

pub fn run() -> String {
    run_with(500)
}

#[allow(dead_code)]
fn main() {
    let max_states = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5000);
    print!("{}", run_with(max_states));
}
