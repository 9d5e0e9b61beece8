//! Applies action instances transactionally: updates that break a constraint roll back.
//!
//! Run with `cargo run --example transactions`.

use dbnet::datalogic::{apply_transactional, instantiate, Action, FactTemplate};
use dbnet::persistence::{DatabaseInstance, DatabaseSchema, Fact, PersistenceLayer, RelationSchema};
use dbnet::query::Query;
use dbnet::types::{DataType, Substitution, Value, Variable};
use std::sync::Arc;

pub fn run() -> String {
    let e = Variable::new("e", DataType::String);
    let t = Variable::new("t", DataType::Int);
    let t2 = Variable::new("t2", DataType::Int);
    let schema = DatabaseSchema::new().with(RelationSchema::new("Resp", [DataType::String, DataType::Int]));

    // at most one ticket per employee
    let one_ticket = Query::forall(
        [e.clone(), t.clone(), t2.clone()],
        Query::implies(
            Query::and(
                Query::rel("Resp", [e.clone().into(), t.clone().into()]),
                Query::rel("Resp", [e.clone().into(), t2.clone().into()]),
            ),
            Query::eq(t.clone().into(), t2.into()),
        ),
    );
    let layer = PersistenceLayer::new(schema).with_constraint("one_ticket", one_ticket);

    let assign = Arc::new(
        Action::new("assign", vec![e.clone(), t.clone()])
            .add(FactTemplate::new("Resp", [e.clone().into(), t.clone().into()])),
    );
    // deletes and re-adds the same fact: additions win
    let touch = Arc::new(
        Action::new("touch", vec![e.clone(), t.clone()])
            .del(FactTemplate::new("Resp", [e.clone().into(), t.clone().into()]))
            .add(FactTemplate::new("Resp", [e.clone().into(), t.clone().into()])),
    );

    let mut db = DatabaseInstance::new();
    db.insert(Fact::new("Resp", vec![Value::str("bob"), Value::int(1)]));

    let bind = |who: &str, id: i64| -> Substitution {
        [(e.clone(), Value::str(who)), (t.clone(), Value::int(id))].into_iter().collect()
    };
    let mut out = format!("start:\n{}", db.to_text());
    for (action, who, id) in [(&assign, "ann", 2), (&assign, "bob", 3), (&touch, "bob", 1)] {
        let inst = instantiate(action, &bind(who, id)).expect("well-typed grounding");
        let (next, committed) = apply_transactional(&layer, &inst, &db);
        let status = if committed { "committed" } else { "rolled back" };
        out.push_str(&format!("{}({who}, {id}): {status}\n", action.name));
        db = next;
    }
    out.push_str(&format!("end:\n{}", db.to_text()));
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run());
}
