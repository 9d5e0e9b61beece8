//! Typed relational schemas, database instances and constraint compliance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::query::{self, Query};
use crate::types::{DataType, Name, Value};

pub type Tuple = Vec<Value>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RelationSchema {
    pub name: Name,
    pub columns: Vec<DataType>,
}

impl RelationSchema {
    pub fn new(name: &str, columns: impl IntoIterator<Item = DataType>) -> Self {
        RelationSchema { name: name.into(), columns: columns.into_iter().collect() }
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DatabaseSchema {
    relations: BTreeMap<Name, RelationSchema>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{relation}` has arity {expected}, found {found} argument(s)")]
    Arity { relation: String, expected: usize, found: usize },
    #[error("column {column} of `{relation}` has type {expected}, found {found}")]
    ColumnType { relation: String, column: usize, expected: DataType, found: DataType },
    #[error("relation `{0}` is declared twice")]
    Duplicate(String),
    #[error("relation `{0}` must have at least one column")]
    Nullary(String),
}

impl DatabaseSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, rel: RelationSchema) -> Result<(), SchemaError> {
        if rel.columns.is_empty() {
            return Err(SchemaError::Nullary(rel.name.to_string()));
        }
        if self.relations.contains_key(&rel.name) {
            return Err(SchemaError::Duplicate(rel.name.to_string()));
        }
        self.relations.insert(rel.name.clone(), rel);
        Ok(())
    }

    pub fn with(mut self, rel: RelationSchema) -> Self {
        self.add(rel).expect("valid relation schema");
        self
    }

    pub fn get(&self, name: &str) -> Option<&RelationSchema> {
        self.relations.get(name)
    }

    pub fn relations(&self) -> impl Iterator<Item = &RelationSchema> {
        self.relations.values()
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Checks a ground fact against its relation schema.
    pub fn check_fact(&self, relation: &str, tuple: &[Value]) -> Result<(), SchemaError> {
        let rel = self
            .get(relation)
            .ok_or_else(|| SchemaError::UnknownRelation(relation.to_string()))?;
        check_columns(rel, tuple.iter().map(Value::data_type))
    }

    pub fn check_instance(&self, instance: &DatabaseInstance) -> Result<(), SchemaError> {
        instance.facts().try_for_each(|f| self.check_fact(&f.relation, &f.tuple))
    }
}

pub(crate) fn check_columns(
    rel: &RelationSchema,
    types: impl ExactSizeIterator<Item = DataType>,
) -> Result<(), SchemaError> {
    if types.len() != rel.arity() {
        return Err(SchemaError::Arity {
            relation: rel.name.to_string(),
            expected: rel.arity(),
            found: types.len(),
        });
    }
    for (i, (found, &expected)) in types.zip(&rel.columns).enumerate() {
        if found != expected {
            return Err(SchemaError::ColumnType {
                relation: rel.name.to_string(),
                column: i + 1,
                expected,
                found,
            });
        }
    }
    Ok(())
}

/// A ground fact `R(o1, ..., on)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Fact {
    pub relation: Name,
    pub tuple: Tuple,
}

impl Fact {
    pub fn new(relation: &str, tuple: Tuple) -> Self {
        Fact { relation: relation.into(), tuple }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "relation": &*self.relation,
            "tuple": self.tuple.iter().map(Value::to_json).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, v) in self.tuple.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// A finite set of facts, grouped by relation in canonical order.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DatabaseInstance {
    relations: BTreeMap<Name, BTreeSet<Tuple>>,
}

impl DatabaseInstance {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if the fact was already present.
    pub fn insert(&mut self, fact: Fact) -> bool {
        self.relations.entry(fact.relation).or_default().insert(fact.tuple)
    }

    pub fn remove(&mut self, fact: &Fact) -> bool {
        let Some(tuples) = self.relations.get_mut(&fact.relation) else {
            return false;
        };
        let removed = tuples.remove(&fact.tuple);
        if tuples.is_empty() {
            self.relations.remove(&fact.relation);
        }
        removed
    }

    pub fn contains(&self, relation: &str, tuple: &[Value]) -> bool {
        self.relations.get(relation).is_some_and(|t| t.contains(tuple))
    }

    pub fn contains_fact(&self, fact: &Fact) -> bool {
        self.contains(&fact.relation, &fact.tuple)
    }

    pub fn tuples(&self, relation: &str) -> impl Iterator<Item = &Tuple> {
        self.relations.get(relation).into_iter().flatten()
    }

    /// Facts in canonical (relation name, tuple) order.
    pub fn facts(&self) -> impl Iterator<Item = Fact> + '_ {
        self.relations
            .iter()
            .flat_map(|(r, ts)| ts.iter().map(move |t| Fact { relation: r.clone(), tuple: t.clone() }))
    }

    pub fn len(&self) -> usize {
        self.relations.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = &Value> {
        self.relations.values().flatten().flatten()
    }

    pub fn active_domain(&self) -> ActiveDomain {
        ActiveDomain::from_values(self.values())
    }

    /// `(self \ deleted) ∪ added`.
    pub fn apply_update<'a>(
        &self,
        deleted: impl IntoIterator<Item = &'a Fact>,
        added: impl IntoIterator<Item = &'a Fact>,
    ) -> DatabaseInstance {
        let mut out = self.clone();
        for f in deleted {
            out.remove(f);
        }
        for f in added {
            out.insert(f.clone());
        }
        out
    }

    /// One fact per line in `Rel(v1, v2)` form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for fact in self.facts() {
            out.push_str(&fact.to_string());
            out.push('\n');
        }
        out
    }

    /// Parses the line-oriented text form. Values are typed by their literal syntax.
    pub fn from_text(text: &str) -> Result<DatabaseInstance, crate::dsl::Diagnostics> {
        crate::dsl::parse_facts(text)
    }

    /// `{ relation: [[v1, v2], ...] }`
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.relations
                .iter()
                .map(|(r, ts)| {
                    let rows = ts
                        .iter()
                        .map(|t| serde_json::Value::Array(t.iter().map(Value::to_json).collect()))
                        .collect();
                    (r.to_string(), serde_json::Value::Array(rows))
                })
                .collect(),
        )
    }

    /// Reads the JSON form back, typing columns by the schema.
    pub fn from_json(schema: &DatabaseSchema, json: &serde_json::Value) -> Result<DatabaseInstance, SchemaError> {
        let mut out = DatabaseInstance::new();
        let Some(obj) = json.as_object() else {
            return Ok(out);
        };
        for (name, rows) in obj {
            let rel = schema.get(name).ok_or_else(|| SchemaError::UnknownRelation(name.clone()))?;
            for row in rows.as_array().into_iter().flatten() {
                let cells = row.as_array().map(Vec::as_slice).unwrap_or_default();
                if cells.len() != rel.arity() {
                    return Err(SchemaError::Arity {
                        relation: name.clone(),
                        expected: rel.arity(),
                        found: cells.len(),
                    });
                }
                let mut tuple = Vec::with_capacity(cells.len());
                for (i, (cell, &ty)) in cells.iter().zip(&rel.columns).enumerate() {
                    let v = Value::from_json(ty, cell).ok_or_else(|| SchemaError::ColumnType {
                        relation: name.clone(),
                        column: i + 1,
                        expected: ty,
                        found: json_type_guess(cell),
                    })?;
                    tuple.push(v);
                }
                out.insert(Fact { relation: rel.name.clone(), tuple });
            }
        }
        Ok(out)
    }
}

fn json_type_guess(v: &serde_json::Value) -> DataType {
    match v {
        serde_json::Value::Bool(_) => DataType::Bool,
        serde_json::Value::Number(n) if n.is_i64() => DataType::Int,
        serde_json::Value::Number(_) => DataType::Real,
        _ => DataType::String,
    }
}

impl FromIterator<Fact> for DatabaseInstance {
    fn from_iter<I: IntoIterator<Item = Fact>>(iter: I) -> Self {
        let mut out = DatabaseInstance::new();
        for f in iter {
            out.insert(f);
        }
        out
    }
}

impl Serialize for DatabaseInstance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

/// Values occurring in an instance (or marking), grouped by type in ascending order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActiveDomain {
    by_type: BTreeMap<DataType, Vec<Value>>,
}

impl ActiveDomain {
    pub fn from_values<'a>(values: impl IntoIterator<Item = &'a Value>) -> Self {
        let mut sets: BTreeMap<DataType, BTreeSet<&Value>> = BTreeMap::new();
        for v in values {
            sets.entry(v.data_type()).or_default().insert(v);
        }
        ActiveDomain {
            by_type: sets
                .into_iter()
                .map(|(t, vs)| (t, vs.into_iter().cloned().collect()))
                .collect(),
        }
    }

    pub fn of_type(&self, ty: DataType) -> &[Value] {
        self.by_type.get(&ty).map(Vec::as_slice).unwrap_or_default()
    }

    pub fn contains(&self, v: &Value) -> bool {
        self.of_type(v.data_type()).binary_search(v).is_ok()
    }

    pub fn extend<'a>(&mut self, values: impl IntoIterator<Item = &'a Value>) {
        let mut all: BTreeSet<Value> = self.by_type.values().flatten().cloned().collect();
        all.extend(values.into_iter().cloned());
        *self = ActiveDomain::from_values(all.iter());
    }

    pub fn all(&self) -> impl Iterator<Item = &Value> {
        self.by_type.values().flatten()
    }
}

/// The `ty`-typed values occurring in `instance`.
pub fn active_domain(instance: &DatabaseInstance, ty: DataType) -> BTreeSet<Value> {
    instance.values().filter(|v| v.has_type(ty)).cloned().collect()
}

/// A named boolean query over the schema.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Constraint {
    pub name: Name,
    pub query: Query,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PersistenceLayer {
    pub schema: DatabaseSchema,
    pub constraints: Vec<Constraint>,
}

/// Outcome of a compliance check: the names of violated constraints, in declaration order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ComplianceReport {
    pub violated: Vec<Name>,
}

impl ComplianceReport {
    pub fn is_ok(&self) -> bool {
        self.violated.is_empty()
    }
}

impl PersistenceLayer {
    pub fn new(schema: DatabaseSchema) -> Self {
        PersistenceLayer { schema, constraints: Vec::new() }
    }

    pub fn with_constraint(mut self, name: &str, query: Query) -> Self {
        self.constraints.push(Constraint { name: name.into(), query });
        self
    }

    /// Fast path used by firing: stops at the first violated constraint.
    pub fn complies(&self, instance: &DatabaseInstance) -> bool {
        let adom = instance.active_domain();
        self.constraints.iter().all(|c| query::holds_with(&c.query, instance, &adom))
    }
}

/// Checks that `instance` is well-typed and satisfies every constraint of `layer`.
pub fn check_compliance(
    layer: &PersistenceLayer,
    instance: &DatabaseInstance,
) -> Result<ComplianceReport, SchemaError> {
    layer.schema.check_instance(instance)?;
    let adom = instance.active_domain();
    let violated = layer
        .constraints
        .iter()
        .filter(|c| !query::holds_with(&c.query, instance, &adom))
        .map(|c| c.name.clone())
        .collect();
    Ok(ComplianceReport { violated })
}
