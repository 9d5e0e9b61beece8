//! Shared test support: seeded generators, an independent bottom-up query
//! evaluator and a ν-net reference simulator.
#![allow(dead_code)]

pub mod cases;
pub mod nu;

use std::collections::{BTreeMap, BTreeSet};

use dbnet::control::{ControlLayer, DbNet, Place, Transition};
use dbnet::datalogic::{Action, DataLogicLayer, FactTemplate};
use dbnet::dsl::{self, Config, Init, NetDocument};
use dbnet::persistence::{Constraint, DatabaseInstance, DatabaseSchema, Fact, PersistenceLayer, RelationSchema, Tuple};
use dbnet::query::{Guard, NamedQuery, Query};
use dbnet::semantics::{InputDomains, Marking, Snapshot};
use dbnet::types::{DataType, Predicate, Term, TypeDomain, Value, Variable};
use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn int(v: &str) -> Variable {
    Variable::new(v, DataType::Int)
}

pub fn string(v: &str) -> Variable {
    Variable::new(v, DataType::String)
}

pub fn ticket() -> (NetDocument, DbNet, Snapshot) {
    let doc = dsl::parse(dbnet::scenarios::TICKET).expect("ticket scenario parses");
    let (net, s0) = dsl::load_snapshot(&doc).expect("ticket scenario is valid");
    (doc, net, s0)
}

// ---- random instances and queries over a fixed schema

/// `R(int)`, `S(int, string)`, `T(string)`, `U(int, int)`.
pub fn query_schema() -> DatabaseSchema {
    DatabaseSchema::new()
        .with(RelationSchema::new("R", [DataType::Int]))
        .with(RelationSchema::new("S", [DataType::Int, DataType::String]))
        .with(RelationSchema::new("T", [DataType::String]))
        .with(RelationSchema::new("U", [DataType::Int, DataType::Int]))
}

const STRINGS: [&str; 4] = ["a", "b", "c", "d"];

pub fn random_value(rng: &mut impl Rng, ty: DataType) -> Value {
    match ty {
        DataType::Int => Value::int(rng.gen_range(0..5)),
        DataType::String => Value::str(STRINGS[rng.gen_range(0..STRINGS.len())]),
        DataType::Bool => Value::Bool(rng.gen()),
        DataType::Real => Value::Real(dbnet::types::Decimal::new(BigInt::from(rng.gen_range(-20..20)), rng.gen_range(0..3))),
    }
}

pub fn random_fact(rng: &mut impl Rng, schema: &DatabaseSchema) -> Fact {
    let rels: Vec<&RelationSchema> = schema.relations().collect();
    let rel = rels[rng.gen_range(0..rels.len())];
    Fact::new(&rel.name, rel.columns.iter().map(|&ty| random_value(rng, ty)).collect())
}

pub fn random_instance(rng: &mut impl Rng, schema: &DatabaseSchema, max_facts: usize) -> DatabaseInstance {
    let mut db = DatabaseInstance::new();
    for _ in 0..rng.gen_range(0..=max_facts) {
        db.insert(random_fact(rng, schema));
    }
    db
}

const INT_VARS: [&str; 3] = ["x", "y", "z"];
const STR_VARS: [&str; 2] = ["u", "v"];

fn random_term(rng: &mut impl Rng, ty: DataType, scope: &[Variable]) -> Term {
    let vars: Vec<&Variable> = scope.iter().filter(|v| v.ty == ty).collect();
    if !vars.is_empty() && rng.gen_bool(0.75) {
        Term::Var(vars[rng.gen_range(0..vars.len())].clone())
    } else {
        Term::Val(random_value(rng, ty))
    }
}

fn random_atom(rng: &mut impl Rng, schema: &DatabaseSchema, scope: &[Variable]) -> Query {
    match rng.gen_range(0..10) {
        0..=5 => {
            let rels: Vec<&RelationSchema> = schema.relations().collect();
            let rel = rels[rng.gen_range(0..rels.len())];
            Query::rel(&rel.name, rel.columns.iter().map(|&ty| random_term(rng, ty, scope)).collect::<Vec<_>>())
        }
        6 => Query::pred(Predicate::StrEq, [random_term(rng, DataType::String, scope), random_term(rng, DataType::String, scope)]),
        7 => Query::eq(random_term(rng, DataType::Int, scope), random_term(rng, DataType::Int, scope)),
        8 => {
            let p = if rng.gen() { Predicate::IntLt } else { Predicate::Succ };
            Query::pred(p, [random_term(rng, DataType::Int, scope), random_term(rng, DataType::Int, scope)])
        }
        _ => Query::True,
    }
}

fn random_var(rng: &mut impl Rng) -> Variable {
    if rng.gen_bool(0.6) {
        int(INT_VARS[rng.gen_range(0..INT_VARS.len())])
    } else {
        string(STR_VARS[rng.gen_range(0..STR_VARS.len())])
    }
}

/// A well-typed formula of depth at most `depth` whose free variables come from `scope`.
pub fn random_formula(rng: &mut impl Rng, schema: &DatabaseSchema, depth: usize, scope: &mut Vec<Variable>) -> Query {
    if depth <= 1 || rng.gen_bool(0.25) {
        return random_atom(rng, schema, scope);
    }
    match rng.gen_range(0..5) {
        0 => Query::not(random_formula(rng, schema, depth - 1, scope)),
        1 => Query::and(random_formula(rng, schema, depth - 1, scope), random_formula(rng, schema, depth - 1, scope)),
        2 => Query::or(random_formula(rng, schema, depth - 1, scope), random_formula(rng, schema, depth - 1, scope)),
        k => {
            let v = random_var(rng);
            scope.push(v.clone());
            let body = random_formula(rng, schema, depth - 1, scope);
            scope.pop();
            if k == 3 {
                Query::exists([v], body)
            } else {
                Query::forall([v], body)
            }
        }
    }
}

/// A random query with its free variables, in shuffled order, as parameters.
pub fn random_query(rng: &mut impl Rng, schema: &DatabaseSchema, depth: usize) -> NamedQuery {
    let mut scope: Vec<Variable> = INT_VARS.iter().map(|v| int(v)).chain(STR_VARS.iter().map(|v| string(v))).collect();
    scope.shuffle(rng);
    scope.truncate(rng.gen_range(0..=3));
    let body = random_formula(rng, schema, depth, &mut scope.clone());
    let mut params: Vec<Variable> = free_vars(&body).into_iter().collect();
    params.shuffle(rng);
    NamedQuery::new("Q", params, body).expect("parameters are the free variables")
}

// ---- bottom-up evaluator

pub type Row = BTreeMap<Variable, Value>;

pub fn free_vars(q: &Query) -> BTreeSet<Variable> {
    match q {
        Query::True => BTreeSet::new(),
        Query::Rel { args, .. } | Query::Pred { args, .. } => args.iter().filter_map(|a| a.as_var().cloned()).collect(),
        Query::Not { body } => free_vars(body),
        Query::And { left, right } | Query::Or { left, right } => {
            free_vars(left).union(&free_vars(right)).cloned().collect()
        }
        Query::Exists { var, body } | Query::Forall { var, body } => {
            let mut fv = free_vars(body);
            fv.remove(var);
            fv
        }
    }
}

/// Values of each type occurring in the instance.
pub fn adom_by_type(db: &DatabaseInstance) -> BTreeMap<DataType, BTreeSet<Value>> {
    let mut out: BTreeMap<DataType, BTreeSet<Value>> = BTreeMap::new();
    for fact in db.facts() {
        for v in fact.tuple {
            out.entry(v.data_type()).or_default().insert(v);
        }
    }
    out
}

fn all_rows(vars: &BTreeSet<Variable>, adom: &BTreeMap<DataType, BTreeSet<Value>>) -> BTreeSet<Row> {
    let mut rows = BTreeSet::from([Row::new()]);
    let empty = BTreeSet::new();
    for v in vars {
        let values = adom.get(&v.ty).unwrap_or(&empty);
        rows = rows
            .into_iter()
            .flat_map(|r| {
                values.iter().map(move |val| {
                    let mut r = r.clone();
                    r.insert(v.clone(), val.clone());
                    r
                })
            })
            .collect();
    }
    rows
}

fn term_value(t: &Term, row: &Row) -> Value {
    match t {
        Term::Val(v) => v.clone(),
        Term::Var(x) => row[x].clone(),
    }
}

fn predicate_holds(p: Predicate, a: &Value, b: &Value) -> bool {
    match p {
        Predicate::StrEq | Predicate::IntEq | Predicate::RealEq | Predicate::BoolEq => a == b,
        Predicate::IntLt | Predicate::RealLt => a < b,
        Predicate::Succ => match (a, b) {
            (Value::Int(x), Value::Int(y)) => x + 1 == *y,
            _ => false,
        },
    }
}

/// The rows over `free_vars(q)`, drawn from the active domain, that satisfy `q`.
pub fn satisfying_rows(q: &Query, db: &DatabaseInstance, adom: &BTreeMap<DataType, BTreeSet<Value>>) -> BTreeSet<Row> {
    let fv = free_vars(q);
    match q {
        Query::True => BTreeSet::from([Row::new()]),
        Query::Rel { relation, args } => {
            let mut rows = BTreeSet::new();
            'tuples: for tuple in db.tuples(relation) {
                let mut row = Row::new();
                for (a, v) in args.iter().zip(tuple) {
                    match a {
                        Term::Val(c) if c != v => continue 'tuples,
                        Term::Val(_) => {}
                        Term::Var(x) => {
                            if row.get(x).is_some_and(|old| old != v) {
                                continue 'tuples;
                            }
                            row.insert(x.clone(), v.clone());
                        }
                    }
                }
                rows.insert(row);
            }
            rows
        }
        Query::Pred { pred, args } => all_rows(&fv, adom)
            .into_iter()
            .filter(|r| predicate_holds(*pred, &term_value(&args[0], r), &term_value(&args[1], r)))
            .collect(),
        Query::Not { body } => {
            let yes = satisfying_rows(body, db, adom);
            all_rows(&fv, adom).into_iter().filter(|r| !yes.contains(r)).collect()
        }
        Query::And { left, right } => {
            let l = satisfying_rows(left, db, adom);
            let r = satisfying_rows(right, db, adom);
            let mut out = BTreeSet::new();
            for a in &l {
                for b in &r {
                    if a.iter().all(|(k, v)| b.get(k).is_none_or(|w| w == v)) {
                        let mut joined = a.clone();
                        joined.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
                        out.insert(joined);
                    }
                }
            }
            out
        }
        Query::Or { left, right } => {
            let mut out = BTreeSet::new();
            for side in [left, right] {
                let rows = satisfying_rows(side, db, adom);
                let side_fv = free_vars(side);
                let missing: BTreeSet<Variable> = fv.difference(&side_fv).cloned().collect();
                for r in rows {
                    for ext in all_rows(&missing, adom) {
                        let mut full = r.clone();
                        full.extend(ext);
                        out.insert(full);
                    }
                }
            }
            out
        }
        Query::Exists { var, body } => {
            let rows = satisfying_rows(body, db, adom);
            let nonempty = adom.get(&var.ty).is_some_and(|d| !d.is_empty());
            rows.into_iter()
                .filter(|r| r.contains_key(var) || nonempty)
                .map(|mut r| {
                    r.remove(var);
                    r
                })
                .collect()
        }
        Query::Forall { var, body } => {
            let flipped = Query::not(Query::exists([var.clone()], Query::not((**body).clone())));
            satisfying_rows(&flipped, db, adom)
        }
    }
}

/// Answers by tabulating every subformula.
pub fn oracle_answers(q: &NamedQuery, db: &DatabaseInstance) -> BTreeSet<Tuple> {
    let adom = adom_by_type(db);
    let rows = satisfying_rows(&q.body, db, &adom);
    let fv = free_vars(&q.body);
    let unused: BTreeSet<Variable> = q.params.iter().filter(|p| !fv.contains(p)).cloned().collect();
    let mut out = BTreeSet::new();
    for r in rows {
        for ext in all_rows(&unused, &adom) {
            let mut full = r.clone();
            full.extend(ext);
            out.insert(q.params.iter().map(|p| full[p].clone()).collect());
        }
    }
    out
}

pub fn oracle_holds(q: &Query, db: &DatabaseInstance) -> bool {
    !satisfying_rows(q, db, &adom_by_type(db)).is_empty()
}

// ---- key constraints

/// `forall k, v1, v2 . Rel(.., k, .., v1, ..) and Rel(.., k, .., v2, ..) -> v1 = v2`
/// for a binary relation keyed on column `key`.
pub fn key_constraint(rel: &RelationSchema, key: usize) -> Query {
    let other = 1 - key;
    let k = Variable::new("k", rel.columns[key]);
    let v1 = Variable::new("v1", rel.columns[other]);
    let v2 = Variable::new("v2", rel.columns[other]);
    let atom = |v: &Variable| {
        let mut args = vec![Term::Var(k.clone()), Term::Var(k.clone())];
        args[other] = Term::Var(v.clone());
        Query::rel(&rel.name, args)
    };
    Query::forall(
        [k.clone(), v1.clone(), v2.clone()],
        Query::implies(Query::and(atom(&v1), atom(&v2)), Query::pred(rel.columns[other].equality(), [v1.into(), v2.into()])),
    )
}

/// Direct check of a key: no two tuples agree on `key` and differ elsewhere.
pub fn key_holds(db: &DatabaseInstance, relation: &str, key: usize) -> bool {
    let mut seen: BTreeMap<&Value, &Tuple> = BTreeMap::new();
    for t in db.tuples(relation) {
        if let Some(old) = seen.insert(&t[key], t) {
            if old != t {
                return false;
            }
        }
    }
    true
}

// ---- random documents

const REL_NAMES: [&str; 4] = ["Emp", "Owns", "Log", "Flag"];
const PLACE_NAMES: [&str; 5] = ["p", "q", "Queue", "Done", "Idle"];
const TRANSITION_NAMES: [&str; 4] = ["t", "go", "step_2", "Reset"];
const TVAR_NAMES: [&str; 4] = ["a", "b", "c", "d"];

fn doc_value(rng: &mut impl Rng, ty: DataType) -> Value {
    match ty {
        DataType::String => {
            let pool = ["x", "two words", "quote\"d", "back\\slash", "ν1", "line\nbreak", "tab\tbed", ""];
            Value::str(pool[rng.gen_range(0..pool.len())])
        }
        DataType::Int => Value::int(rng.gen_range(-20..50)),
        other => random_value(rng, other),
    }
}

fn doc_term(rng: &mut impl Rng, ty: DataType, scope: &[Variable]) -> Term {
    // only variables not shadowed by a later binder of the same name
    let vars: Vec<&Variable> = scope
        .iter()
        .enumerate()
        .filter(|(i, v)| v.ty == ty && !scope[i + 1..].iter().any(|w| w.name == v.name))
        .map(|(_, v)| v)
        .collect();
    if !vars.is_empty() && rng.gen_bool(0.7) {
        Term::Var(vars[rng.gen_range(0..vars.len())].clone())
    } else {
        Term::Val(doc_value(rng, ty))
    }
}

fn doc_atom(rng: &mut impl Rng, types: &[DataType], schema: &DatabaseSchema, scope: &[Variable], relations: bool) -> Query {
    let rels: Vec<&RelationSchema> = schema.relations().collect();
    if relations && !rels.is_empty() && rng.gen_bool(0.5) {
        let rel = rels[rng.gen_range(0..rels.len())];
        return Query::rel(&rel.name, rel.columns.iter().map(|&ty| doc_term(rng, ty, scope)).collect::<Vec<_>>());
    }
    let ty = types[rng.gen_range(0..types.len())];
    let mut preds = vec![ty.equality()];
    preds.extend(ty.less_than());
    if ty == DataType::Int {
        preds.push(Predicate::Succ);
    }
    match rng.gen_range(0..6) {
        0 => Query::True,
        _ => {
            let p = preds[rng.gen_range(0..preds.len())];
            Query::pred(p, [doc_term(rng, ty, scope), doc_term(rng, ty, scope)])
        }
    }
}

fn doc_formula(
    rng: &mut impl Rng,
    types: &[DataType],
    schema: &DatabaseSchema,
    depth: usize,
    scope: &mut Vec<Variable>,
    quantifiers: bool,
) -> Query {
    if depth <= 1 || rng.gen_bool(0.3) {
        return doc_atom(rng, types, schema, scope, quantifiers);
    }
    let kinds = if quantifiers { 5 } else { 3 };
    match rng.gen_range(0..kinds) {
        0 => Query::not(doc_formula(rng, types, schema, depth - 1, scope, quantifiers)),
        1 => Query::and(
            doc_formula(rng, types, schema, depth - 1, scope, quantifiers),
            doc_formula(rng, types, schema, depth - 1, scope, quantifiers),
        ),
        2 => Query::or(
            doc_formula(rng, types, schema, depth - 1, scope, quantifiers),
            doc_formula(rng, types, schema, depth - 1, scope, quantifiers),
        ),
        k => {
            let v = Variable::new(["x", "y", "t"][rng.gen_range(0..3)], types[rng.gen_range(0..types.len())]);
            scope.push(v.clone());
            let body = doc_formula(rng, types, schema, depth - 1, scope, quantifiers);
            scope.pop();
            if k == 3 {
                Query::exists([v], body)
            } else {
                Query::forall([v], body)
            }
        }
    }
}

fn color(rng: &mut impl Rng, types: &[DataType], max: usize) -> Vec<DataType> {
    (0..rng.gen_range(0..=max)).map(|_| types[rng.gen_range(0..types.len())]).collect()
}

fn tuple_for(rng: &mut impl Rng, color: &[DataType], scope: &[Variable]) -> Vec<Term> {
    color.iter().map(|&ty| doc_term(rng, ty, scope)).collect()
}

/// A random document in the shape the parser produces. Not necessarily a
/// well-formed net: names and types are consistent, references may dangle.
pub fn random_document(rng: &mut impl Rng) -> NetDocument {
    let mut types = vec![DataType::String, DataType::Int];
    for extra in [DataType::Real, DataType::Bool] {
        if rng.gen_bool(0.4) {
            types.push(extra);
        }
    }
    let domain = TypeDomain::new(types.iter().copied());

    let mut schema = DatabaseSchema::new();
    for name in REL_NAMES.iter().take(rng.gen_range(1..=REL_NAMES.len())) {
        let mut columns = color(rng, &types, 3);
        if columns.is_empty() {
            columns.push(types[0]);
        }
        schema.add(RelationSchema::new(name, columns)).expect("distinct names");
    }

    let mut constraints = Vec::new();
    for i in 0..rng.gen_range(0..3) {
        let query = doc_formula(rng, &types, &schema, 4, &mut Vec::new(), true);
        constraints.push(Constraint { name: format!("c{i}").as_str().into(), query });
    }

    let mut logic = DataLogicLayer::new();
    let mut query_names = Vec::new();
    for i in 0..rng.gen_range(0..3) {
        let scope: Vec<Variable> = ["e", "f"].iter().map(|n| Variable::new(n, types[rng.gen_range(0..types.len())])).collect();
        let body = doc_formula(rng, &types, &schema, 4, &mut scope.clone(), true);
        let mut params: Vec<Variable> = free_vars(&body).into_iter().collect();
        params.shuffle(rng);
        let name = format!("Q{i}");
        query_names.push((name.clone(), params.iter().map(|p| p.ty).collect::<Vec<_>>()));
        logic = logic.with_query(NamedQuery::new(&name, params, body).expect("free variables as parameters"));
    }
    let mut action_names = Vec::new();
    for name in ["reg", "drop"].iter().take(rng.gen_range(0..=2)) {
        let params: Vec<Variable> =
            ["m", "n", "o"].iter().take(rng.gen_range(0..=3)).map(|n| Variable::new(n, types[rng.gen_range(0..types.len())])).collect();
        let mut action = Action::new(name, params.clone());
        let rels: Vec<RelationSchema> = schema.relations().cloned().collect();
        for _ in 0..rng.gen_range(0..3) {
            let rel = &rels[rng.gen_range(0..rels.len())];
            action = action.del(FactTemplate::new(&rel.name, tuple_for(rng, &rel.columns, &params)));
        }
        for _ in 0..rng.gen_range(0..3) {
            let rel = &rels[rng.gen_range(0..rels.len())];
            action = action.add(FactTemplate::new(&rel.name, tuple_for(rng, &rel.columns, &params)));
        }
        action_names.push(name.to_string());
        logic = logic.with_action(action);
    }

    let mut control = ControlLayer::default();
    let mut places = Vec::new();
    for name in PLACE_NAMES.iter().take(rng.gen_range(1..=PLACE_NAMES.len())) {
        let c = color(rng, &types, 2);
        places.push((name.to_string(), c.clone()));
        control = control.with_place(Place::control(name, c));
    }
    if let Some((q, cols)) = query_names.first() {
        if rng.gen() {
            control = control.with_place(Place::view("View", cols.clone(), q));
            places.push(("View".into(), cols.clone()));
        }
    }
    for name in TRANSITION_NAMES.iter().take(rng.gen_range(0..=TRANSITION_NAMES.len())) {
        let vars: Vec<Variable> = TVAR_NAMES.iter().map(|n| Variable::new(n, types[rng.gen_range(0..types.len())])).collect();
        let fresh = [Variable::fresh("nu", if rng.gen() { DataType::Int } else { DataType::String })];
        let mut t = Transition::new(name);
        let mut out_scope = vars.clone();
        out_scope.extend(fresh.iter().cloned());
        for kind in 0..3 {
            for _ in 0..rng.gen_range(0..3) {
                let (p, c) = &places[rng.gen_range(0..places.len())];
                let scope = if kind == 0 { &vars } else { &out_scope };
                let n = if rng.gen_bool(0.8) { 1 } else { rng.gen_range(2..4) };
                let tuple = tuple_for(rng, c, scope);
                t = match kind {
                    0 => t.input(p, tuple, n),
                    1 => t.output(p, tuple, n),
                    _ => t.rollback(p, tuple, n),
                };
            }
        }
        if rng.gen() {
            let g = doc_formula(rng, &types, &schema, 3, &mut vars.clone(), false);
            t = t.guarded(Guard::new(g).expect("relation- and quantifier-free"));
        }
        if !action_names.is_empty() && rng.gen() {
            let a = &action_names[rng.gen_range(0..action_names.len())];
            let mut args = Vec::new();
            for _ in 0..rng.gen_range(0..3) {
                let ty = types[rng.gen_range(0..types.len())];
                args.push(doc_term(rng, ty, &out_scope));
            }
            t = t.invoking(a, args);
        }
        control = control.with_transition(t);
    }

    let mut facts = DatabaseInstance::new();
    for _ in 0..rng.gen_range(0..4) {
        let rels: Vec<&RelationSchema> = schema.relations().collect();
        let rel = rels[rng.gen_range(0..rels.len())];
        facts.insert(Fact::new(&rel.name, rel.columns.iter().map(|&ty| doc_value(rng, ty)).collect()));
    }
    let mut marking = Marking::new();
    for _ in 0..rng.gen_range(0..4) {
        let (p, c) = &places[rng.gen_range(0..places.len())];
        marking.add(p, c.iter().map(|&ty| doc_value(rng, ty)).collect(), rng.gen_range(1..4));
    }
    let mut domains = InputDomains::new();
    for &ty in &types {
        if rng.gen_bool(0.4) {
            domains.insert(ty, (0..rng.gen_range(1..4)).map(|_| doc_value(rng, ty)).collect::<Vec<_>>());
        }
    }
    let pick = |rng: &mut dyn rand::RngCore| if rng.gen_bool(0.5) { Some(rng.gen_range(0..100_000u64)) } else { None };
    let config = Config { seed: pick(rng), steps: pick(rng), max_states: pick(rng), max_depth: pick(rng), workers: pick(rng) };

    NetDocument {
        net: DbNet {
            types: domain,
            persistence: PersistenceLayer { schema, constraints },
            logic,
            control,
        },
        init: Init { facts, marking },
        domains,
        config,
    }
}
