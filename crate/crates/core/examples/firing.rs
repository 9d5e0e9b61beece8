//! Builds a net in code and fires a transition by hand, showing inscription
//! binding, view places and rollback arcs.
//!
//! Run with `cargo run --example firing`.

use dbnet::control::{validate_net, ControlLayer, DbNet, Place, Transition};
use dbnet::datalogic::{Action, DataLogicLayer, FactTemplate};
use dbnet::multiset::Multiset;
use dbnet::persistence::{DatabaseInstance, DatabaseSchema, PersistenceLayer, RelationSchema};
use dbnet::query::{NamedQuery, Query};
use dbnet::semantics::{enabled_firings, fire_named, inscription_binding, InputDomains, Marking, Snapshot};
use dbnet::types::{DataType, Substitution, Term, TypeDomain, Value, Variable};
use std::collections::BTreeSet;

pub fn run() -> String {
    let mut out = String::new();
    let x = Variable::new("x", DataType::Int);
    let y = Variable::new("y", DataType::Int);

    // ω = 2·<x, y> + <x, 1> under θ = {x ↦ 1, y ↦ 2}
    let omega: Multiset<Vec<Term>> =
        [(vec![x.clone().into(), y.clone().into()], 2), (vec![x.clone().into(), Value::int(1).into()], 1)]
            .into_iter()
            .collect();
    let theta: Substitution = [(x.clone(), Value::int(1)), (y.clone(), Value::int(2))].into_iter().collect();
    let bound = inscription_binding(&omega, &theta).expect("θ binds every variable");
    for (tuple, n) in &bound {
        out.push_str(&format!("ibind: {n} x <{}, {}>\n", tuple[0], tuple[1]));
    }

    // Stock holds item numbers and the view Items mirrors it. Taking an item
    // moves it from Stock to Taken; at most one item may be taken, so the
    // second take rolls back and its rollback arc returns the request.
    let z = Variable::new("z", DataType::Int);
    let schema = DatabaseSchema::new()
        .with(RelationSchema::new("Stock", [DataType::Int]))
        .with(RelationSchema::new("Taken", [DataType::Int]));
    let at_most_one = Query::forall(
        [x.clone(), z.clone()],
        Query::implies(
            Query::and(Query::rel("Taken", [x.clone().into()]), Query::rel("Taken", [z.clone().into()])),
            Query::eq(x.clone().into(), z.into()),
        ),
    );
    let logic = DataLogicLayer::new()
        .with_query(NamedQuery::new("Q", vec![x.clone()], Query::rel("Stock", [x.clone().into()])).unwrap())
        .with_action(
            Action::new("take", vec![x.clone()])
                .del(FactTemplate::new("Stock", [x.clone().into()]))
                .add(FactTemplate::new("Taken", [x.clone().into()])),
        );
    let take = Transition::new("take")
        .input("Items", vec![x.clone().into()], 1)
        .input("Requests", vec![x.clone().into()], 1)
        .output("Picked", vec![x.clone().into()], 1)
        .rollback("Requests", vec![x.clone().into()], 1)
        .invoking("take", vec![x.clone().into()]);
    let net = DbNet {
        types: TypeDomain::new([DataType::Int]),
        persistence: PersistenceLayer::new(schema).with_constraint("at_most_one", at_most_one),
        logic,
        control: ControlLayer::default()
            .with_place(Place::view("Items", [DataType::Int], "Q"))
            .with_place(Place::control("Requests", [DataType::Int]))
            .with_place(Place::control("Picked", [DataType::Int]))
            .with_transition(take),
    };
    assert!(validate_net(&net).is_empty());
    let db = DatabaseInstance::from_text("Stock(1)\nStock(2)\n").expect("facts parse");
    let requests = Marking::new().with("Requests", vec![Value::int(1)], 1).with("Requests", vec![Value::int(2)], 1);
    let s0 = Snapshot::new(&net, db, requests);
    out.push_str(&format!("views: {}\n", s0.views.to_json()));

    let firings = enabled_firings(&net, &s0, &InputDomains::new(), &BTreeSet::new()).expect("no external variables");
    let mut s = s0;
    for f in &firings {
        let outcome = fire_named(&net, &s, f).expect("enabled");
        out.push_str(&format!(
            "fire take x={}: {}\n",
            f.binding.get(&x).unwrap(),
            if outcome.committed { "committed" } else { "rolled back" }
        ));
        s = outcome.snapshot;
    }
    out.push_str(&format!("marking: {}\n", s.marking().to_json()));
    out.push_str(&format!("database:\n{}", s.instance.to_text()));
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run());
}
