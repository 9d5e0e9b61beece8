//! Parameterized add/delete actions and the query/action interface exposed to the net.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::persistence::{
    check_columns, DatabaseInstance, DatabaseSchema, Fact, PersistenceLayer, SchemaError,
};
use crate::query::NamedQuery;
use crate::types::{Name, Substitution, Term, TypeDomain, TypeError, Variable};

/// A fact pattern `R(y1, ..., yn)` whose arguments are values or action parameters.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct FactTemplate {
    pub relation: Name,
    pub args: Vec<Term>,
}

impl FactTemplate {
    pub fn new(relation: &str, args: impl IntoIterator<Item = Term>) -> Self {
        FactTemplate { relation: relation.into(), args: args.into_iter().collect() }
    }

    pub fn ground(&self, theta: &Substitution) -> Result<Fact, TypeError> {
        Ok(Fact { relation: self.relation.clone(), tuple: theta.apply_all(&self.args)? })
    }
}

impl fmt::Display for FactTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Action {
    pub name: Name,
    pub params: Vec<Variable>,
    pub adds: Vec<FactTemplate>,
    pub dels: Vec<FactTemplate>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ActionError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("parameter `{0}` is declared twice")]
    DuplicateParam(String),
    #[error("parameter `{0}` must be a normal variable")]
    FreshParam(String),
    #[error("`{0}` is not a parameter of the action")]
    NotAParam(String),
    #[error("binding does not cover parameter `{0}`")]
    MissingBinding(String),
    #[error("type {0} is not part of the type domain")]
    TypeNotInDomain(crate::types::DataType),
    #[error("binding mentions `{0}`, which is not a parameter")]
    ExtraBinding(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
}

impl Action {
    pub fn new(name: &str, params: Vec<Variable>) -> Self {
        Action { name: name.into(), params, adds: Vec::new(), dels: Vec::new() }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(mut self, template: FactTemplate) -> Self {
        self.adds.push(template);
        self
    }

    pub fn del(mut self, template: FactTemplate) -> Self {
        self.dels.push(template);
        self
    }

    /// Checks parameters and templates against the schema.
    pub fn check(&self, schema: &DatabaseSchema, domain: &TypeDomain) -> Result<(), ActionError> {
        let mut seen = BTreeSet::new();
        for p in &self.params {
            if !seen.insert(&p.name) {
                return Err(ActionError::DuplicateParam(p.name.to_string()));
            }
            if p.is_fresh() {
                return Err(ActionError::FreshParam(p.name.to_string()));
            }
            if !domain.contains(p.ty) {
                return Err(ActionError::TypeNotInDomain(p.ty));
            }
        }
        for t in self.adds.iter().chain(&self.dels) {
            let rel = schema
                .get(&t.relation)
                .ok_or_else(|| SchemaError::UnknownRelation(t.relation.to_string()))?;
            check_columns(rel, t.args.iter().map(Term::data_type))?;
            for v in t.args.iter().filter_map(Term::as_var) {
                if !self.params.contains(v) {
                    return Err(ActionError::NotAParam(v.name.to_string()));
                }
            }
        }
        Ok(())
    }
}

/// An action with all parameters bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionInstance {
    pub action: Arc<Action>,
    pub grounding: Substitution,
    deletions: BTreeSet<Fact>,
    additions: BTreeSet<Fact>,
}

impl ActionInstance {
    /// Grounded `F-` of the instance.
    pub fn deletions(&self) -> &BTreeSet<Fact> {
        &self.deletions
    }

    /// Grounded `F+` of the instance.
    pub fn additions(&self) -> &BTreeSet<Fact> {
        &self.additions
    }

    pub fn is_noop(&self) -> bool {
        self.deletions.is_empty() && self.additions.is_empty()
    }
}

impl fmt::Display for ActionInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.action.name)?;
        for (i, p) in self.action.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match self.grounding.get(p) {
                Some(v) => write!(f, "{v}")?,
                None => f.write_str("?")?,
            }
        }
        f.write_str(")")
    }
}

/// Grounds `action` with `theta`, which must bind exactly the action's parameters.
pub fn instantiate(action: &Arc<Action>, theta: &Substitution) -> Result<ActionInstance, ActionError> {
    for p in &action.params {
        if !theta.contains(p) {
            return Err(ActionError::MissingBinding(p.name.to_string()));
        }
    }
    if let Some(extra) = theta.vars().find(|v| !action.params.contains(v)) {
        return Err(ActionError::ExtraBinding(extra.name.to_string()));
    }
    let ground = |ts: &[FactTemplate]| -> Result<BTreeSet<Fact>, TypeError> {
        ts.iter().map(|t| t.ground(theta)).collect()
    };
    Ok(ActionInstance {
        action: action.clone(),
        grounding: theta.clone(),
        deletions: ground(&action.dels)?,
        additions: ground(&action.adds)?,
    })
}

/// `(I \ F-) ∪ F+`: additions win over deletions.
pub fn apply_raw(instance_of: &ActionInstance, db: &DatabaseInstance) -> DatabaseInstance {
    db.apply_update(&instance_of.deletions, &instance_of.additions)
}

/// Applies the instance and commits only if the result complies with `layer`.
/// On rollback the input instance is returned unchanged.
pub fn apply_transactional(
    layer: &PersistenceLayer,
    action: &ActionInstance,
    db: &DatabaseInstance,
) -> (DatabaseInstance, bool) {
    let updated = apply_raw(action, db);
    if layer.complies(&updated) {
        (updated, true)
    } else {
        (db.clone(), false)
    }
}

/// Queries and actions exposed by the data logic.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DataLogicLayer {
    pub queries: BTreeMap<Name, NamedQuery>,
    pub actions: BTreeMap<Name, Arc<Action>>,
}

impl DataLogicLayer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_query(mut self, q: NamedQuery) -> Self {
        self.queries.insert(q.name.clone(), q);
        self
    }

    pub fn with_action(mut self, a: Action) -> Self {
        self.actions.insert(a.name.clone(), Arc::new(a));
        self
    }

    pub fn query(&self, name: &str) -> Option<&NamedQuery> {
        self.queries.get(name)
    }

    pub fn action(&self, name: &str) -> Option<&Arc<Action>> {
        self.actions.get(name)
    }
}
