//! Static structure of the control layer and whole-net validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::datalogic::DataLogicLayer;
use crate::multiset::Multiset;
use crate::persistence::PersistenceLayer;
use crate::query::{Guard, Query};
use crate::types::{DataType, Name, Term, TypeDomain, Variable};

/// Multiset of term tuples labelling an arc.
pub type Inscription = Multiset<Vec<Term>>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PlaceKind {
    Control,
    /// Read-only place whose tokens are the answers of the named query.
    View { query: Name },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Place {
    pub name: Name,
    pub color: Vec<DataType>,
    pub kind: PlaceKind,
}

impl Place {
    pub fn control(name: &str, color: impl IntoIterator<Item = DataType>) -> Self {
        Place { name: name.into(), color: color.into_iter().collect(), kind: PlaceKind::Control }
    }

    pub fn view(name: &str, color: impl IntoIterator<Item = DataType>, query: &str) -> Self {
        Place {
            name: name.into(),
            color: color.into_iter().collect(),
            kind: PlaceKind::View { query: query.into() },
        }
    }

    pub fn is_view(&self) -> bool {
        matches!(self.kind, PlaceKind::View { .. })
    }

    pub fn query(&self) -> Option<&Name> {
        match &self.kind {
            PlaceKind::View { query } => Some(query),
            PlaceKind::Control => None,
        }
    }
}

/// The action invoked by a transition, with its actual parameters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ActionBinding {
    pub action: Name,
    pub args: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub name: Name,
    pub inputs: BTreeMap<Name, Inscription>,
    pub outputs: BTreeMap<Name, Inscription>,
    pub rollbacks: BTreeMap<Name, Inscription>,
    pub guard: Guard,
    pub action: Option<ActionBinding>,
}

fn inscription_vars<'a>(arcs: impl IntoIterator<Item = &'a Inscription>) -> BTreeSet<Variable> {
    arcs.into_iter()
        .flat_map(|ins| ins.elements())
        .flatten()
        .filter_map(Term::as_var)
        .cloned()
        .collect()
}

fn add_arc(arcs: &mut BTreeMap<Name, Inscription>, place: &str, tuple: Vec<Term>, n: u64) {
    if n > 0 {
        arcs.entry(place.into()).or_default().insert(tuple, n);
    }
}

impl Transition {
    pub fn new(name: &str) -> Self {
        Transition {
            name: name.into(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            rollbacks: BTreeMap::new(),
            guard: Guard::default(),
            action: None,
        }
    }

    pub fn input(mut self, place: &str, tuple: Vec<Term>, n: u64) -> Self {
        add_arc(&mut self.inputs, place, tuple, n);
        self
    }

    pub fn output(mut self, place: &str, tuple: Vec<Term>, n: u64) -> Self {
        add_arc(&mut self.outputs, place, tuple, n);
        self
    }

    pub fn rollback(mut self, place: &str, tuple: Vec<Term>, n: u64) -> Self {
        add_arc(&mut self.rollbacks, place, tuple, n);
        self
    }

    pub fn guarded(mut self, guard: Guard) -> Self {
        self.guard = guard;
        self
    }

    pub fn invoking(mut self, action: &str, args: Vec<Term>) -> Self {
        self.action = Some(ActionBinding { action: action.into(), args });
        self
    }

    /// Variables occurring on input arcs.
    pub fn in_vars(&self) -> BTreeSet<Variable> {
        inscription_vars(self.inputs.values())
    }

    /// Variables occurring in the action binding and on normal output arcs.
    pub fn out_vars(&self) -> BTreeSet<Variable> {
        let mut out = inscription_vars(self.outputs.values());
        if let Some(b) = &self.action {
            out.extend(b.args.iter().filter_map(Term::as_var).cloned());
        }
        out
    }

    /// Variables on rollback arcs. They are not part of the output variables
    /// proper, but a binding must cover them to route tokens on failure.
    pub fn rollback_vars(&self) -> BTreeSet<Variable> {
        inscription_vars(self.rollbacks.values())
    }

    pub fn fresh_vars(&self) -> BTreeSet<Variable> {
        self.out_vars().into_iter().filter(Variable::is_fresh).collect()
    }

    /// Variables not bound by input arcs: arbitrary or fresh external inputs.
    pub fn external_vars(&self) -> BTreeSet<Variable> {
        let ins = self.in_vars();
        self.vars().into_iter().filter(|v| !ins.contains(v)).collect()
    }

    /// Every variable a binding must assign.
    pub fn vars(&self) -> BTreeSet<Variable> {
        let mut all = self.in_vars();
        all.extend(self.out_vars());
        all.extend(self.rollback_vars());
        all
    }

    /// Every variable mentioned anywhere, including the guard.
    pub fn mentioned_vars(&self) -> BTreeSet<Variable> {
        let mut all = self.vars();
        all.extend(self.guard.vars());
        all
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ControlLayer {
    pub places: BTreeMap<Name, Place>,
    pub transitions: BTreeMap<Name, Transition>,
}

impl ControlLayer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_place(mut self, p: Place) -> Self {
        self.places.insert(p.name.clone(), p);
        self
    }

    pub fn with_transition(mut self, t: Transition) -> Self {
        self.transitions.insert(t.name.clone(), t);
        self
    }

    pub fn place(&self, name: &str) -> Option<&Place> {
        self.places.get(name)
    }

    pub fn transition(&self, name: &str) -> Option<&Transition> {
        self.transitions.get(name)
    }

    pub fn control_places(&self) -> impl Iterator<Item = &Place> {
        self.places.values().filter(|p| !p.is_view())
    }

    pub fn view_places(&self) -> impl Iterator<Item = &Place> {
        self.places.values().filter(|p| p.is_view())
    }
}

/// The four layers bundled together.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DbNet {
    pub types: TypeDomain,
    pub persistence: PersistenceLayer,
    pub logic: DataLogicLayer,
    pub control: ControlLayer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcKind {
    Input,
    Output,
    Rollback,
}

impl fmt::Display for ArcKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArcKind::Input => "in",
            ArcKind::Output => "out",
            ArcKind::Rollback => "rollback",
        })
    }
}

/// Where in a net a diagnostic applies.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Location {
    Net,
    Relation(Name),
    Constraint(Name),
    Query(Name),
    Action(Name),
    Place(Name),
    Transition(Name),
    Arc { transition: Name, place: Name, kind: ArcKind },
    Guard(Name),
    ActionBinding(Name),
    Init,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Net => f.write_str("net"),
            Location::Relation(n) => write!(f, "relation {n}"),
            Location::Constraint(n) => write!(f, "constraint {n}"),
            Location::Query(n) => write!(f, "query {n}"),
            Location::Action(n) => write!(f, "action {n}"),
            Location::Place(n) => write!(f, "place {n}"),
            Location::Transition(n) => write!(f, "transition {n}"),
            Location::Arc { transition, place, kind } => write!(f, "transition {transition}, {kind} arc {place}"),
            Location::Guard(n) => write!(f, "transition {n}, guard"),
            Location::ActionBinding(n) => write!(f, "transition {n}, action binding"),
            Location::Init => f.write_str("init"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NetDiagnostic {
    pub severity: Severity,
    pub location: Location,
    /// The well-formedness rule that was violated.
    pub clause: &'static str,
    pub message: String,
}

impl fmt::Display for NetDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}[{}]: {}: {}", self.clause, self.location, self.message)
    }
}

struct Validator<'a> {
    net: &'a DbNet,
    out: Vec<NetDiagnostic>,
}

impl Validator<'_> {
    fn error(&mut self, location: Location, clause: &'static str, message: impl Into<String>) {
        self.out.push(NetDiagnostic { severity: Severity::Error, location, clause, message: message.into() });
    }

    fn warn(&mut self, location: Location, clause: &'static str, message: impl Into<String>) {
        self.out.push(NetDiagnostic { severity: Severity::Warning, location, clause, message: message.into() });
    }

    fn persistence(&mut self) {
        let net = self.net;
        for rel in net.persistence.schema.relations() {
            for ty in &rel.columns {
                if !net.types.contains(*ty) {
                    self.error(Location::Relation(rel.name.clone()), "relation schema", format!("type {ty} is not in the type domain"));
                }
            }
        }
        for c in &net.persistence.constraints {
            let loc = Location::Constraint(c.name.clone());
            if let Err(e) = c.query.typecheck(&net.persistence.schema, &net.types) {
                self.error(loc.clone(), "persistence layer", e.to_string());
            }
            let free = c.query.free_vars();
            if !free.is_empty() {
                let names: Vec<_> = free.iter().map(|v| v.name.to_string()).collect();
                self.error(loc, "persistence layer", format!("constraint has free variable(s) {}", names.join(", ")));
            }
        }
    }

    fn logic(&mut self) {
        let net = self.net;
        for q in net.logic.queries.values() {
            let loc = Location::Query(q.name.clone());
            if let Err(e) = q.body.typecheck(&net.persistence.schema, &net.types) {
                self.error(loc.clone(), "query", e.to_string());
            }
            if let Err(e) = q.check_params() {
                self.error(loc, "query", e.to_string());
            }
        }
        for a in net.logic.actions.values() {
            if let Err(e) = a.check(&net.persistence.schema, &net.types) {
                self.error(Location::Action(a.name.clone()), "action", e.to_string());
            }
        }
    }

    fn places(&mut self) {
        let net = self.net;
        for p in net.control.places.values() {
            let loc = Location::Place(p.name.clone());
            for ty in &p.color {
                if !net.types.contains(*ty) {
                    self.error(loc.clone(), "color assignment", format!("type {ty} is not in the type domain"));
                }
            }
            if let Some(qname) = p.query() {
                match net.logic.query(qname) {
                    None => self.error(loc, "query assignment", format!("unknown query `{qname}`")),
                    Some(q) if q.column_types() != p.color => self.error(
                        loc,
                        "query assignment",
                        format!(
                            "color ({}) does not match the free variables of `{qname}` ({})",
                            show_types(&p.color),
                            show_types(&q.column_types())
                        ),
                    ),
                    Some(_) => {}
                }
            }
        }
    }

    fn arcs(&mut self, t: &Transition, kind: ArcKind) {
        let arcs = match kind {
            ArcKind::Input => &t.inputs,
            ArcKind::Output => &t.outputs,
            ArcKind::Rollback => &t.rollbacks,
        };
        let clause = match kind {
            ArcKind::Input => "input flow",
            ArcKind::Output | ArcKind::Rollback => "output flow",
        };
        for (pname, ins) in arcs {
            let loc = Location::Arc { transition: t.name.clone(), place: pname.clone(), kind };
            let Some(place) = self.net.control.place(pname) else {
                self.error(loc, clause, format!("unknown place `{pname}`"));
                continue;
            };
            if kind != ArcKind::Input && place.is_view() {
                self.error(loc.clone(), clause, format!("{kind} arcs may only target control places; `{pname}` is a view place"));
            }
            for (tuple, &n) in ins {
                let types: Vec<_> = tuple.iter().map(Term::data_type).collect();
                if types != place.color {
                    self.error(
                        loc.clone(),
                        clause,
                        format!("inscription ({}) is not compatible with color ({})", show_types(&types), show_types(&place.color)),
                    );
                }
                if kind == ArcKind::Input {
                    if let Some(v) = tuple.iter().filter_map(Term::as_var).find(|v| v.is_fresh()) {
                        self.error(loc.clone(), clause, format!("fresh variable `{}` cannot occur on an input arc", v.name));
                    }
                    if place.is_view() && n > 1 {
                        self.warn(
                            loc.clone(),
                            clause,
                            format!("read arc requires {n} copies of a view token, but view places hold answer sets; the arc can never be satisfied"),
                        );
                    }
                }
            }
        }
    }

    fn transition(&mut self, t: &Transition) {
        let net = self.net;
        self.arcs(t, ArcKind::Input);
        self.arcs(t, ArcKind::Output);
        self.arcs(t, ArcKind::Rollback);

        if !t.rollbacks.is_empty() && t.action.is_none() {
            self.error(
                Location::Transition(t.name.clone()),
                "output flow",
                "rollback arcs require an action binding; without an action the firing always succeeds",
            );
        }

        let mentioned = t.mentioned_vars();
        let mut seen: BTreeSet<&Name> = BTreeSet::new();
        for v in &mentioned {
            if !seen.insert(&v.name) {
                self.error(
                    Location::Transition(t.name.clone()),
                    "variable typing",
                    format!("variable `{}` is used with two different types or flavors", v.name),
                );
            }
        }
        for v in t.fresh_vars() {
            if !v.ty.is_infinite() {
                self.error(Location::Transition(t.name.clone()), "control layer", format!("fresh variable `{}` has finite type {}", v.name, v.ty));
            }
        }
        for v in t.rollback_vars() {
            if v.is_fresh() && !t.out_vars().contains(&v) {
                self.error(
                    Location::Transition(t.name.clone()),
                    "output flow",
                    format!("fresh variable `{}` occurs only on rollback arcs", v.name),
                );
            }
        }

        let gloc = Location::Guard(t.name.clone());
        if let Err(e) = t.guard.formula().check_guard_fragment() {
            self.error(gloc.clone(), "guard", e.to_string());
        } else if let Err(e) = t.guard.formula().typecheck(&net.persistence.schema, &net.types) {
            self.error(gloc.clone(), "guard", e.to_string());
        }
        let ins = t.in_vars();
        for v in t.guard.vars() {
            if !ins.contains(&v) {
                self.error(gloc.clone(), "transition guard assignment", format!("guard var `{}` ∉ InVars", v.name));
            }
        }

        if let Some(b) = &t.action {
            let loc = Location::ActionBinding(t.name.clone());
            match net.logic.action(&b.action) {
                None => self.error(loc, "action assignment", format!("unknown action `{}`", b.action)),
                Some(a) => {
                    if a.params.len() != b.args.len() {
                        self.error(
                            loc,
                            "action assignment",
                            format!("`{}` takes {} parameter(s), binding has {}", a.name, a.params.len(), b.args.len()),
                        );
                    } else {
                        for (i, (arg, p)) in b.args.iter().zip(&a.params).enumerate() {
                            if arg.data_type() != p.ty {
                                self.error(
                                    loc.clone(),
                                    "action assignment",
                                    format!("argument {} has type {}, parameter `{}` expects {}", i + 1, arg.data_type(), p.name, p.ty),
                                );
                            }
                        }
                    }
                }
            }
        }
    }
}

fn show_types(ts: &[DataType]) -> String {
    ts.iter().map(|t| t.name()).collect::<Vec<_>>().join(" >< ")
}

/// All well-formedness violations of `net`; an empty list means the net is valid.
pub fn validate_net(net: &DbNet) -> Vec<NetDiagnostic> {
    let mut v = Validator { net, out: Vec::new() };
    v.persistence();
    v.logic();
    v.places();
    for t in net.control.transitions.values() {
        v.transition(t);
    }
    v.out
}

pub fn has_errors(diags: &[NetDiagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}

/// Query used as a guard: `true` when the transition has none.
pub fn guard_query(t: &Transition) -> &Query {
    t.guard.formula()
}
