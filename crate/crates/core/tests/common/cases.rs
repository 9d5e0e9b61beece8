//! Seeded checks shared by the acceptance run and the property tests. Each
//! returns a description of the first discrepancy.

use std::collections::BTreeSet;
use std::sync::Arc;

use dbnet::control::DbNet;
use dbnet::datalogic::{apply_raw, apply_transactional, instantiate, Action, FactTemplate};
use dbnet::persistence::{DatabaseInstance, DatabaseSchema, Fact, PersistenceLayer, RelationSchema};
use dbnet::query::answers;
use dbnet::semantics::Snapshot;
use dbnet::sim::TraceRecord;
use dbnet::types::{DataType, Substitution, Term, Value};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{key_constraint, key_holds, oracle_answers, query_schema, random_fact, random_instance, random_query, rng};

/// Random instance (at most 12 facts) and query (depth at most 4): the
/// evaluator's answers equal the bottom-up evaluator's.
pub fn query_oracle(seed: u64) -> Result<&'static str, String> {
    let mut rng = rng(seed);
    let schema = query_schema();
    let db = random_instance(&mut rng, &schema, 12);
    let q = random_query(&mut rng, &schema, 4);
    let got = answers(&q, &db);
    let want = oracle_answers(&q, &db);
    if got != want {
        return Err(format!("seed {seed}: {} over\n{}answers {got:?}, expected {want:?}", q.body, db.to_text()));
    }
    Ok(if got.is_empty() { "empty" } else { "nonempty" })
}

fn transaction_schema() -> DatabaseSchema {
    DatabaseSchema::new()
        .with(RelationSchema::new("S", [DataType::Int, DataType::String]))
        .with(RelationSchema::new("P", [DataType::Int, DataType::Int]))
        .with(RelationSchema::new("Q", [DataType::String, DataType::Int]))
}

fn constant_template(f: &Fact) -> FactTemplate {
    FactTemplate::new(&f.relation, f.tuple.iter().cloned().map(Term::Val).collect::<Vec<_>>())
}

/// Random layer with 1 to 3 key constraints, compliant instance and action
/// instance: commits are compliant and equal `(I \ F-) ∪ F+`, rollbacks
/// return the input, and a fact both added and deleted is kept.
pub fn transaction(seed: u64) -> Result<&'static str, String> {
    let mut rng = rng(seed);
    let schema = transaction_schema();
    let mut keys: Vec<(RelationSchema, usize)> =
        schema.relations().flat_map(|r| [(r.clone(), 0), (r.clone(), 1)]).collect();
    keys.shuffle(&mut rng);
    keys.truncate(rng.gen_range(1..=3));
    let mut layer = PersistenceLayer::new(schema.clone());
    for (i, (rel, col)) in keys.iter().enumerate() {
        layer = layer.with_constraint(&format!("key{i}"), key_constraint(rel, *col));
    }
    let compliant = |db: &DatabaseInstance| keys.iter().all(|(rel, col)| key_holds(db, &rel.name, *col));

    let mut db = DatabaseInstance::new();
    for f in random_instance(&mut rng, &schema, 10).facts() {
        let mut next = db.clone();
        next.insert(f);
        if compliant(&next) {
            db = next;
        }
    }

    let existing: Vec<Fact> = db.facts().collect();
    let mut dels: BTreeSet<Fact> = BTreeSet::new();
    for _ in 0..rng.gen_range(0..=3) {
        match existing.choose(&mut rng) {
            Some(f) if rng.gen_bool(0.7) => dels.insert(f.clone()),
            _ => dels.insert(random_fact(&mut rng, &schema)),
        };
    }
    let mut adds: BTreeSet<Fact> = (0..rng.gen_range(0..=3)).map(|_| random_fact(&mut rng, &schema)).collect();
    let overlap: Option<Fact> = rng.gen_bool(0.4).then(|| match existing.choose(&mut rng) {
        Some(f) if rng.gen() => f.clone(),
        _ => random_fact(&mut rng, &schema),
    });
    if let Some(f) = &overlap {
        dels.insert(f.clone());
        adds.insert(f.clone());
    }

    let mut action = Action::new("act", vec![]);
    for f in &dels {
        action = action.del(constant_template(f));
    }
    for f in &adds {
        action = action.add(constant_template(f));
    }
    let inst = instantiate(&Arc::new(action), &Substitution::new()).map_err(|e| e.to_string())?;

    let mut expected = db.clone();
    for f in &dels {
        expected.remove(f);
    }
    for f in &adds {
        expected.insert(f.clone());
    }
    if apply_raw(&inst, &db) != expected {
        return Err(format!("seed {seed}: raw update differs from (I \\ F-) ∪ F+"));
    }
    let (result, committed) = apply_transactional(&layer, &inst, &db);
    let ok = compliant(&expected);
    if committed != ok {
        return Err(format!("seed {seed}: committed = {committed}, but the update is compliant = {ok}"));
    }
    if committed {
        if result != expected {
            return Err(format!("seed {seed}: committed result differs from (I \\ F-) ∪ F+"));
        }
        if !compliant(&result) || !layer.complies(&result) {
            return Err(format!("seed {seed}: committed a non-compliant instance"));
        }
        if let Some(f) = &overlap {
            if !result.contains_fact(f) {
                return Err(format!("seed {seed}: {f} was both added and deleted and is gone"));
            }
        }
    } else if result != db {
        return Err(format!("seed {seed}: rollback changed the instance"));
    }
    Ok(match (committed, overlap.is_some()) {
        (true, true) => "overlap kept",
        (true, false) => "committed",
        (false, _) => "rolled back",
    })
}

/// Every value in the instance or the marking of `s`.
pub fn snapshot_values(s: &Snapshot) -> BTreeSet<Value> {
    let mut out: BTreeSet<Value> = s.instance.facts().flat_map(|f| f.tuple).collect();
    for m in [&s.control, &s.views] {
        for (_, tokens) in m.iter() {
            out.extend(tokens.elements().flatten().cloned());
        }
    }
    out
}

/// View places hold exactly the answers of their queries, once each.
pub fn aligned(net: &DbNet, s: &Snapshot) -> Result<(), String> {
    for p in net.control.view_places() {
        let q = net.logic.query(p.query().expect("view place")).expect("declared query");
        let want = oracle_answers(q, &s.instance);
        let got = s.tokens(&p.name);
        let same = match got {
            None => want.is_empty(),
            Some(tokens) => tokens.iter().all(|(t, &n)| n == 1 && want.contains(t)) && tokens.distinct() == want.len(),
        };
        if !same {
            return Err(format!("view {} holds {:?}, answers are {want:?}", p.name, got));
        }
    }
    Ok(())
}

/// Fresh values of a firing are distinct and absent from the pre-state.
pub fn fresh_ok(net: &DbNet, before: &Snapshot, transition: &str, binding: &Substitution) -> Result<(), String> {
    let t = net.control.transition(transition).expect("known transition");
    let present = snapshot_values(before);
    let mut seen = BTreeSet::new();
    for v in t.fresh_vars() {
        let val = binding.get(&v).ok_or_else(|| format!("{transition}: fresh `{}` unbound", v.name))?;
        if present.contains(val) {
            return Err(format!("{transition}: fresh value {val} already present"));
        }
        if !seen.insert(val.clone()) {
            return Err(format!("{transition}: fresh value {val} used twice"));
        }
    }
    Ok(())
}

/// Alignment of every state and freshness of every step of a run.
pub fn run_invariants(net: &DbNet, initial: &Snapshot, records: &[TraceRecord], states: &[Snapshot]) -> Result<(), String> {
    aligned(net, initial)?;
    let mut before = initial;
    for (r, s) in records.iter().zip(states) {
        fresh_ok(net, before, &r.firing.transition, &r.firing.binding).map_err(|e| format!("step {}: {e}", r.step))?;
        aligned(net, s).map_err(|e| format!("step {}: {e}", r.step))?;
        before = s;
    }
    Ok(())
}
