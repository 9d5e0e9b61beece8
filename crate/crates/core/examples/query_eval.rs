//! Evaluates first-order queries over a small instance with active-domain semantics.
//!
//! Run with `cargo run --example query_eval`.

use dbnet::persistence::{DatabaseInstance, DatabaseSchema, Fact, RelationSchema};
use dbnet::query::{answers, holds, NamedQuery, Query};
use dbnet::types::{DataType, TypeDomain, Value, Variable};

pub fn run() -> String {
    let schema = DatabaseSchema::new()
        .with(RelationSchema::new("Emp", [DataType::String]))
        .with(RelationSchema::new("Resp", [DataType::String, DataType::Int]));
    let mut db = DatabaseInstance::new();
    for e in ["ann", "bob", "cid"] {
        db.insert(Fact::new("Emp", vec![Value::str(e)]));
    }
    db.insert(Fact::new("Resp", vec![Value::str("bob"), Value::int(1)]));
    db.insert(Fact::new("Resp", vec![Value::str("cid"), Value::int(2)]));

    let e = Variable::new("e", DataType::String);
    let t = Variable::new("t", DataType::Int);

    // employees without a ticket
    let idle = NamedQuery::new(
        "Idle",
        vec![e.clone()],
        Query::and(
            Query::rel("Emp", [e.clone().into()]),
            Query::not(Query::exists([t.clone()], Query::rel("Resp", [e.clone().into(), t.clone().into()]))),
        ),
    )
    .expect("parameters match the free variables");
    idle.body.typecheck(&schema, &TypeDomain::default()).expect("well-typed");

    let mut out = String::new();
    out.push_str(&format!("instance:\n{}", db.to_text()));
    out.push_str(&format!("query {}({}:{}) := {}\n", idle.name, e.name, e.ty, idle.body));
    for row in answers(&idle, &db) {
        out.push_str(&format!("  answer: {}\n", row[0]));
    }

    // a boolean query: somebody handles ticket 2
    let busy = Query::exists([e.clone()], Query::rel("Resp", [e.into(), Value::int(2).into()]));
    out.push_str(&format!("{busy}: {}\n", holds(&busy, &db).expect("closed query")));
    out
}

#[allow(dead_code)]
fn main() {
    print!("{}", run());
}
