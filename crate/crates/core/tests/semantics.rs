mod common;

use std::collections::{BTreeSet, HashMap, VecDeque};

use dbnet::control::{has_errors, validate_net, Transition};
use dbnet::dsl;
use dbnet::multiset::Multiset;
use dbnet::persistence::Tuple;
use dbnet::query::answers;
use dbnet::semantics::{
    build_lts, enabled_firings, enumerate_bindings, fire, fire_named, inscription_binding, is_enabled, Bounds, Firing,
    InputDomains, SemanticsError, Snapshot,
};
use dbnet::sim::simulate_random;
use dbnet::types::{DataType, Substitution, Term, Value, Variable};
use proptest::prelude::*;

use common::{cases, int, random_document, rng, string, ticket};

fn sub(pairs: &[(Variable, Value)]) -> Substitution {
    pairs.iter().cloned().collect()
}

fn tokens(rows: &[Vec<Value>]) -> Multiset<Tuple> {
    rows.iter().map(|r| (r.clone(), 1)).collect()
}

fn s(v: &str) -> Value {
    Value::str(v)
}

fn i(v: i64) -> Value {
    Value::int(v)
}

fn transition<'a>(net: &'a dbnet::control::DbNet, name: &str) -> &'a Transition {
    net.control.transition(name).expect("transition exists")
}

#[test]
fn inscription_binding_of_empty_and_string_inscriptions() {
    let theta = sub(&[(string("x"), s("a"))]);
    let empty: Multiset<Vec<Term>> = Multiset::new();
    assert!(inscription_binding(&empty, &theta).unwrap().is_empty());
    let omega: Multiset<Vec<Term>> = [(vec![string("x").into()], 1)].into_iter().collect();
    assert_eq!(inscription_binding(&omega, &theta).unwrap(), tokens(&[vec![s("a")]]));
}

#[test]
fn inscription_binding_needs_every_variable() {
    let omega: Multiset<Vec<Term>> = [(vec![int("x").into(), int("y").into()], 1)].into_iter().collect();
    assert!(inscription_binding(&omega, &sub(&[(int("x"), i(1))])).is_err());
}

#[test]
fn initial_views_follow_the_queries() {
    let (_, net, s0) = ticket();
    assert_eq!(s0.tokens("IdleEmps"), Some(&tokens(&[vec![s("ann")]])));
    assert_eq!(s0.tokens("Tickets"), Some(&tokens(&[vec![i(1), s("bug")]])));
    let empty = Snapshot::new(&net, Default::default(), Default::default());
    assert!(net.control.view_places().all(|p| empty.tokens(&p.name).is_none_or(Multiset::is_empty)));
}

#[test]
fn release_frees_the_employee() {
    let (_, net, s0) = ticket();
    let out = fire(&net, &s0, transition(&net, "release"), &sub(&[(int("t"), i(1)), (string("e"), s("bob"))])).unwrap();
    assert!(out.committed);
    assert!(!out.snapshot.instance.contains("Resp", &[s("bob"), i(1)]));
    assert_eq!(out.snapshot.tokens("IdleEmps"), Some(&tokens(&[vec![s("ann")], vec![s("bob")]])));
    assert_eq!(out.snapshot.tokens("Unassigned"), Some(&tokens(&[vec![i(1)]])));
    assert!(out.snapshot.tokens("Handling").is_none_or(Multiset::is_empty));
}

#[test]
fn close_logs_the_ticket() {
    let (_, net, s0) = ticket();
    let sigma = sub(&[(int("t"), i(1)), (string("e"), s("bob")), (string("d"), s("bug"))]);
    let out = fire(&net, &s0, transition(&net, "close"), &sigma).unwrap();
    assert!(out.committed);
    let db = &out.snapshot.instance;
    assert!(db.contains("Log", &[i(1), s("bob"), s("bug")]));
    assert!(!db.contains("Ticket", &[i(1), s("bug")]));
    assert!(!db.contains("Resp", &[s("bob"), i(1)]));
    assert_eq!(db.tuples("Emp").count(), 2);
    assert!(out.snapshot.tokens("Tickets").is_none_or(Multiset::is_empty));
    // Tickets is a view place, so its token is not consumed by the firing but recomputed
    assert_eq!(out.snapshot.tokens("IdleEmps").map(Multiset::size), Some(2));
}

#[test]
fn take_rolls_back_when_the_employee_is_busy() {
    let (_, net, s0) = ticket();
    let released = fire(&net, &s0, transition(&net, "release"), &sub(&[(int("t"), i(1)), (string("e"), s("bob"))]))
        .unwrap()
        .snapshot;
    let register = sub(&[(string("e"), s("ann")), (string("d"), s("bug")), (Variable::fresh("id", DataType::Int), i(2))]);
    let busy = fire(&net, &released, transition(&net, "register"), &register).unwrap();
    assert!(busy.committed);
    let s2 = busy.snapshot;
    assert!(s2.instance.contains("Resp", &[s("ann"), i(2)]));

    let take = transition(&net, "take");
    let ann = fire(&net, &s2, take, &sub(&[(int("t"), i(1)), (string("e"), s("ann"))])).unwrap();
    assert!(!ann.committed);
    assert_eq!(ann.snapshot.instance, s2.instance);
    assert_eq!(ann.snapshot.control, s2.control);

    let bob = fire(&net, &s2, take, &sub(&[(int("t"), i(1)), (string("e"), s("bob"))])).unwrap();
    assert!(bob.committed);
    assert!(bob.snapshot.instance.contains("Resp", &[s("bob"), i(1)]));
    assert!(bob.snapshot.tokens("Unassigned").is_none_or(Multiset::is_empty));
    assert_eq!(bob.snapshot.control.count("Handling", &vec![i(1), s("bob")]), 1);
}

#[test]
fn enablement_checks_tokens_and_fresh_values() {
    let (_, net, s0) = ticket();
    let t = transition(&net, "register");
    let id = Variable::fresh("id", DataType::Int);
    let with = |e: &str, id_val: Value| sub(&[(string("e"), s(e)), (string("d"), s("bug")), (id.clone(), id_val)]);
    assert!(is_enabled(&net, &s0, t, &with("ann", i(2))));
    assert!(!is_enabled(&net, &s0, t, &with("bob", i(2))), "bob is busy");
    assert!(!is_enabled(&net, &s0, t, &with("ann", i(1))), "1 is already a ticket id");
    assert!(!is_enabled(&net, &s0, t, &sub(&[(string("e"), s("ann")), (string("d"), s("bug"))])), "fresh var unbound");
    assert!(matches!(fire(&net, &s0, t, &with("bob", i(2))), Err(SemanticsError::NotEnabled { .. })));
}

#[test]
fn fresh_values_must_be_pairwise_distinct() {
    let doc = dsl::parse(
        "types { int; }\nschema { }\nnet {\n  place p : (int >< int);\n  place g : (int);\n  transition t {\n    vars x:int;\n    fresh a:int, b:int;\n    in g : <x>;\n    out p : <a, b>;\n  }\n}\ninit {\n  marking {\n    g : <0>;\n  }\n}\n",
    )
    .unwrap();
    let (net, s0) = dsl::load_snapshot(&doc).unwrap();
    let t = transition(&net, "t");
    let (a, b) = (Variable::fresh("a", DataType::Int), Variable::fresh("b", DataType::Int));
    let x = int("x");
    assert!(is_enabled(&net, &s0, t, &sub(&[(x.clone(), i(0)), (a.clone(), i(1)), (b.clone(), i(2))])));
    assert!(!is_enabled(&net, &s0, t, &sub(&[(x.clone(), i(0)), (a.clone(), i(1)), (b.clone(), i(1))])));
    let bindings = enumerate_bindings(&net, &s0, t, &InputDomains::new(), &BTreeSet::new()).unwrap();
    assert_eq!(bindings.len(), 1);
    assert_ne!(bindings[0].get(&a), bindings[0].get(&b));
}

#[test]
fn bindings_in_the_initial_state() {
    let (doc, net, s0) = ticket();
    let t = transition(&net, "register");
    let one = enumerate_bindings(&net, &s0, t, &doc.domains, &BTreeSet::new()).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].get(&string("e")), Some(&s("ann")));

    let two_descriptions = InputDomains::new().with(DataType::String, [s("bug"), s("feat")]);
    let two = enumerate_bindings(&net, &s0, t, &two_descriptions, &BTreeSet::new()).unwrap();
    let ds: BTreeSet<_> = two.iter().map(|b| b.get(&string("d")).cloned().unwrap()).collect();
    assert_eq!(ds, [s("bug"), s("feat")].into_iter().collect());

    let take = enumerate_bindings(&net, &s0, transition(&net, "take"), &doc.domains, &BTreeSet::new()).unwrap();
    assert!(take.is_empty(), "Unassigned is empty");

    let missing = enumerate_bindings(&net, &s0, t, &InputDomains::new(), &BTreeSet::new());
    assert!(matches!(missing, Err(SemanticsError::MissingDomain { .. })));
}

#[test]
fn every_enumerated_binding_is_enabled_and_fires() {
    let (doc, net, s0) = ticket();
    let run = simulate_random(&net, &s0, &doc.domains, 3, 60).unwrap();
    for state in std::iter::once(&s0).chain(&run.states) {
        for f in enabled_firings(&net, state, &doc.domains, &BTreeSet::new()).unwrap() {
            assert!(is_enabled(&net, state, transition(&net, &f.transition), &f.binding));
            let out = fire_named(&net, state, &f).unwrap();
            cases::aligned(&net, &out.snapshot).unwrap();
        }
    }
}

/// Plain breadth-first search over `enabled_firings` and `fire_named`, up to `depth` steps.
fn reference_lts(net: &dbnet::control::DbNet, s0: &Snapshot, domains: &InputDomains, depth: usize) -> (BTreeSet<String>, usize) {
    let mut seen: HashMap<Snapshot, usize> = HashMap::from([(s0.clone(), 0)]);
    let mut queue = VecDeque::from([s0.clone()]);
    let mut edges = 0;
    while let Some(state) = queue.pop_front() {
        let d = seen[&state];
        if d == depth {
            continue;
        }
        for f in enabled_firings(net, &state, domains, &BTreeSet::new()).unwrap() {
            edges += 1;
            let next = fire_named(net, &state, &f).unwrap().snapshot;
            if !seen.contains_key(&next) {
                seen.insert(next.clone(), d + 1);
                queue.push_back(next);
            }
        }
    }
    (seen.keys().map(Snapshot::canonical_text).collect(), edges)
}

#[test]
fn depth_bounded_state_space_matches_plain_search() {
    let (doc, net, s0) = ticket();
    for depth in 0..=5 {
        let (want_states, want_edges) = reference_lts(&net, &s0, &doc.domains, depth);
        for workers in [1, 3] {
            let bounds = Bounds { max_states: None, max_depth: Some(depth) };
            let lts = build_lts(&net, s0.clone(), &doc.domains, bounds, workers).unwrap();
            let got: BTreeSet<String> = lts.states.iter().map(Snapshot::canonical_text).collect();
            assert_eq!(got, want_states, "depth {depth}");
            assert_eq!(lts.states.len(), want_states.len());
            assert_eq!(lts.edges.len(), want_edges, "depth {depth}");
            for e in &lts.edges {
                let f = Firing { transition: e.firing.transition.clone(), binding: e.firing.binding.clone() };
                assert_eq!(fire_named(&net, &lts.states[e.source], &f).unwrap().snapshot, lts.states[e.target]);
            }
        }
    }
}

#[test]
fn ticket_state_space_at_five_thousand_states() {
    // regression counts for the bundled scenario
    let (doc, net, s0) = ticket();
    let bounds = Bounds { max_states: Some(5000), max_depth: None };
    let lts = build_lts(&net, s0, &doc.domains, bounds, 1).unwrap();
    assert_eq!((lts.states.len(), lts.edges.len()), (5000, 25049));
    assert!(lts.truncated_states);
    for (k, &d) in lts.depth.iter().enumerate().skip(1) {
        let e = &lts.edges[lts.parent[k].unwrap()];
        assert_eq!(e.target, k);
        assert_eq!(lts.depth[e.source] + 1, d);
    }
}

#[test]
fn variable_sets_of_generated_transitions() {
    for seed in 0..200 {
        let doc = random_document(&mut rng(seed));
        for t in doc.net.control.transitions.values() {
            let mut ins = BTreeSet::new();
            let mut outs = BTreeSet::new();
            let mut rb = BTreeSet::new();
            for (arcs, into) in [(&t.inputs, &mut ins), (&t.outputs, &mut outs), (&t.rollbacks, &mut rb)] {
                for inscription in arcs.values() {
                    for (terms, _) in inscription.iter() {
                        for term in terms {
                            if let Term::Var(v) = term {
                                into.insert(v.clone());
                            }
                        }
                    }
                }
            }
            if let Some(b) = &t.action {
                for term in &b.args {
                    if let Term::Var(v) = term {
                        outs.insert(v.clone());
                    }
                }
            }
            assert_eq!(t.in_vars(), ins, "seed {seed}, {}", t.name);
            assert_eq!(t.out_vars(), outs, "seed {seed}, {}", t.name);
            assert_eq!(t.rollback_vars(), rb);
            let fresh: BTreeSet<_> = outs.iter().filter(|v| v.is_fresh()).cloned().collect();
            assert_eq!(t.fresh_vars(), fresh);
            let all: BTreeSet<_> = ins.iter().chain(&outs).chain(&rb).cloned().collect();
            let external: BTreeSet<_> = all.iter().filter(|v| !ins.contains(v)).cloned().collect();
            assert_eq!(t.external_vars(), external);
        }
    }
}

#[test]
fn valid_generated_nets_run_soundly() {
    let mut ran = 0;
    for seed in 0..150 {
        let doc = random_document(&mut rng(seed));
        let Ok((net, s0)) = dsl::load_snapshot(&doc) else { continue };
        if has_errors(&validate_net(&net)) {
            continue;
        }
        match simulate_random(&net, &s0, &doc.domains, seed, 100) {
            Ok(run) => {
                cases::run_invariants(&net, &s0, &run.records, &run.states).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
                for (r, before) in run.records.iter().zip(std::iter::once(&s0).chain(&run.states)) {
                    assert!(is_enabled(&net, before, transition(&net, &r.firing.transition), &r.firing.binding));
                }
                ran += 1;
            }
            Err(e) => assert!(e.to_string().contains("domain"), "seed {seed}: {e}"),
        }
    }
    assert!(ran >= 20, "only {ran} generated nets were runnable");
}

#[test]
fn view_places_answer_the_queries_after_release() {
    let (_, net, s0) = ticket();
    let out = fire(&net, &s0, transition(&net, "release"), &sub(&[(int("t"), i(1)), (string("e"), s("bob"))])).unwrap();
    let qe = net.logic.query("Qe").unwrap();
    let want: Multiset<Tuple> = answers(qe, &out.snapshot.instance).into_iter().map(|t| (t, 1)).collect();
    assert_eq!(out.snapshot.tokens("IdleEmps"), Some(&want));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_runs_keep_views_aligned_and_values_fresh(seed in any::<u64>(), steps in 1u64..80) {
        let (doc, net, s0) = ticket();
        let run = simulate_random(&net, &s0, &doc.domains, seed, steps).unwrap();
        prop_assert!(cases::run_invariants(&net, &s0, &run.records, &run.states).is_ok());
        for st in &run.states {
            let resp: Vec<_> = st.instance.tuples("Resp").collect();
            prop_assert!(resp.iter().all(|a| resp.iter().all(|b| a[0] != b[0] || a[1] == b[1])));
        }
    }
}
