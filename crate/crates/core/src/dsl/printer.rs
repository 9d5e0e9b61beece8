use std::fmt::Write as _;

use crate::control::{Inscription, Place, PlaceKind, Transition};
use crate::types::{DataType, Term, Value, Variable};

use super::NetDocument;

fn join<T: std::fmt::Display>(items: impl IntoIterator<Item = T>, sep: &str) -> String {
    items.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

fn typed(vars: &[Variable]) -> String {
    join(vars.iter().map(|v| format!("{}:{}", v.name, v.ty)), ", ")
}

fn color(types: &[DataType]) -> String {
    format!("({})", join(types, " >< "))
}

fn tuple<T: std::fmt::Display>(items: &[T]) -> String {
    format!("<{}>", join(items, ", "))
}

fn multiplied(n: u64, body: String) -> String {
    if n == 1 {
        body
    } else {
        format!("{n} * {body}")
    }
}

fn inscription(ins: &Inscription) -> String {
    join(ins.iter().map(|(terms, &n): (&Vec<Term>, &u64)| multiplied(n, tuple(terms))), " + ")
}

fn place(out: &mut String, p: &Place) {
    match &p.kind {
        PlaceKind::Control => {
            let _ = writeln!(out, "  place {} : {};", p.name, color(&p.color));
        }
        PlaceKind::View { query } => {
            let _ = writeln!(out, "  view {} : {} <- {};", p.name, color(&p.color), query);
        }
    }
}

fn transition(out: &mut String, t: &Transition) {
    let _ = writeln!(out, "  transition {} {{", t.name);
    let (fresh, normal): (Vec<Variable>, Vec<Variable>) = t.mentioned_vars().into_iter().partition(Variable::is_fresh);
    if !normal.is_empty() {
        let _ = writeln!(out, "    vars {};", typed(&normal));
    }
    if !fresh.is_empty() {
        let _ = writeln!(out, "    fresh {};", typed(&fresh));
    }
    for (kw, arcs) in [("in", &t.inputs), ("out", &t.outputs), ("rollback", &t.rollbacks)] {
        for (p, ins) in arcs {
            let _ = writeln!(out, "    {kw} {p} : {};", inscription(ins));
        }
    }
    if !t.guard.is_trivial() {
        let _ = writeln!(out, "    guard {};", t.guard);
    }
    if let Some(b) = &t.action {
        let _ = writeln!(out, "    action {}({});", b.action, join(&b.args, ", "));
    }
    out.push_str("  }\n");
}

/// Canonical text of a document; parsing it yields an equal document.
pub fn serialize(doc: &NetDocument) -> String {
    let net = &doc.net;
    let mut out = String::new();

    out.push_str("types {\n");
    for ty in net.types.types() {
        let _ = writeln!(out, "  {ty};");
    }
    out.push_str("}\n\nschema {\n");
    for r in net.persistence.schema.relations() {
        let _ = writeln!(out, "  relation {}({});", r.name, join(&r.columns, ", "));
    }
    out.push_str("}\n\nconstraints {\n");
    for c in &net.persistence.constraints {
        let _ = writeln!(out, "  constraint {} := {};", c.name, c.query);
    }
    out.push_str("}\n\nqueries {\n");
    for q in net.logic.queries.values() {
        let _ = writeln!(out, "  query {}({}) := {};", q.name, typed(&q.params), q.body);
    }
    out.push_str("}\n\nactions {\n");
    for a in net.logic.actions.values() {
        let _ = writeln!(out, "  action {}({}) {{", a.name, typed(&a.params));
        let _ = writeln!(out, "    del {{ {} }}", join(&a.dels, ", "));
        let _ = writeln!(out, "    add {{ {} }}", join(&a.adds, ", "));
        out.push_str("  }\n");
    }
    out.push_str("}\n\nnet {\n");
    for p in net.control.places.values() {
        place(&mut out, p);
    }
    for t in net.control.transitions.values() {
        transition(&mut out, t);
    }
    out.push_str("}\n\ninit {\n  facts {\n");
    for f in doc.init.facts.facts() {
        let _ = writeln!(out, "    {f};");
    }
    out.push_str("  }\n  marking {\n");
    for (p, tokens) in doc.init.marking.iter() {
        let items = join(tokens.iter().map(|(t, &n): (&Vec<Value>, &u64)| multiplied(n, tuple(t))), " + ");
        let _ = writeln!(out, "    {p} : {items};");
    }
    out.push_str("  }\n}\n\ndomains {\n");
    for (ty, values) in doc.domains.iter() {
        if !values.is_empty() {
            let _ = writeln!(out, "  {ty} : {};", join(values, ", "));
        }
    }
    out.push_str("}\n\nconfig {\n");
    let c = &doc.config;
    for (key, value) in [
        ("seed", c.seed),
        ("steps", c.steps),
        ("max_states", c.max_states),
        ("max_depth", c.max_depth),
        ("workers", c.workers),
    ] {
        if let Some(v) = value {
            let _ = writeln!(out, "  {key} = {v};");
        }
    }
    out.push_str("}\n");
    out
}
