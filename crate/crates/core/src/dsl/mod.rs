//! Textual `.dbnet` format: parser, canonical printer and snapshot loading.
//!
//! The grammar is described in `docs/dsl.md`.

mod diagnostics;
mod lexer;
mod parser;
mod printer;

use serde::Serialize;
use thiserror::Error;

use crate::control::{has_errors, validate_net, DbNet, Location, NetDiagnostic};
use crate::persistence::{check_compliance, DatabaseInstance, Fact, SchemaError};
use crate::query::Query;
use crate::semantics::{InputDomains, Marking, Snapshot};
use crate::types::{Name, Variable};

pub use diagnostics::{Diagnostic, Diagnostics, SourceMap, Span};
pub use printer::serialize;

/// Initial database facts and control-place tokens.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Init {
    pub facts: DatabaseInstance,
    pub marking: Marking,
}

/// Run settings stored with a scenario. Command-line flags take precedence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Config {
    pub seed: Option<u64>,
    pub steps: Option<u64>,
    pub max_states: Option<u64>,
    pub max_depth: Option<u64>,
    pub workers: Option<u64>,
}

/// A parsed scenario: the net, its initial snapshot, input domains and settings.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct NetDocument {
    pub net: DbNet,
    pub init: Init,
    pub domains: InputDomains,
    pub config: Config,
}

impl NetDocument {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("documents serialize to JSON")
    }
}

pub fn parse(text: &str) -> Result<NetDocument, Diagnostics> {
    parse_with_map(text).map(|(doc, _)| doc)
}

/// Parses and also returns the source positions used to locate validation diagnostics.
pub fn parse_with_map(text: &str) -> Result<(NetDocument, SourceMap), Diagnostics> {
    let mut p = parser::Parser::new(text).map_err(Diagnostics::single)?;
    let doc = p.document().map_err(Diagnostics::single)?;
    Ok((doc, p.map))
}

/// Parses facts such as `Emp("ann"); Ticket(1, "bug")`, typed by literal syntax.
pub fn parse_facts(text: &str) -> Result<DatabaseInstance, Diagnostics> {
    let run = || {
        let mut p = parser::Parser::new(text)?;
        let facts = p.facts()?;
        p.expect_eof()?;
        Ok(facts.into_iter().map(|(f, _)| f).collect::<Vec<_>>())
    };
    let facts = run().map_err(Diagnostics::single)?;
    let mut out = DatabaseInstance::new();
    for f in facts {
        out.insert(f);
    }
    Ok(out)
}

/// Parses a formula whose free variables are drawn from `scope`.
pub fn parse_query(text: &str, scope: &[Variable]) -> Result<Query, Diagnostics> {
    parser::parse_formula(text, scope).map_err(Diagnostics::single)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LoadError {
    #[error("the net is not well-formed:\n{}", render_net(.0))]
    Invalid(Vec<NetDiagnostic>),
    #[error("initial fact {fact}: {source}")]
    Fact { fact: Fact, source: SchemaError },
    #[error("initial instance violates constraint(s) {}", .0.join(", "))]
    NonCompliant(Vec<Name>),
    #[error("initial marking names unknown place `{0}`")]
    UnknownPlace(Name),
    #[error("initial marking gives tokens to view place `{0}`; view places are computed from the database")]
    ViewPlace(Name),
    #[error("token {token} does not match the color of place `{place}`")]
    IllTypedToken { place: Name, token: String },
}

fn render_net(diags: &[NetDiagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

fn show_tuple(t: &[crate::types::Value]) -> String {
    format!("<{}>", t.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "))
}

/// Problems with the init section of an otherwise valid document.
pub fn check_init(doc: &NetDocument) -> Vec<LoadError> {
    let net = &doc.net;
    let mut out = Vec::new();
    let mut typed = true;
    for fact in doc.init.facts.facts() {
        if let Err(source) = net.persistence.schema.check_fact(&fact.relation, &fact.tuple) {
            typed = false;
            out.push(LoadError::Fact { fact, source });
        }
    }
    if typed {
        if let Ok(report) = check_compliance(&net.persistence, &doc.init.facts) {
            if !report.is_ok() {
                out.push(LoadError::NonCompliant(report.violated));
            }
        }
    }
    for (p, tokens) in doc.init.marking.iter() {
        match net.control.place(p) {
            None => out.push(LoadError::UnknownPlace(p.clone())),
            Some(place) if place.is_view() => out.push(LoadError::ViewPlace(p.clone())),
            Some(place) => {
                for t in tokens.elements() {
                    let ok = t.len() == place.color.len() && t.iter().zip(&place.color).all(|(v, ty)| v.has_type(*ty));
                    if !ok {
                        out.push(LoadError::IllTypedToken { place: p.clone(), token: show_tuple(t) });
                    }
                }
            }
        }
    }
    out
}

/// Validation diagnostics for a parsed document, located in its source.
pub fn check_document(doc: &NetDocument, map: &SourceMap) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = validate_net(&doc.net)
        .into_iter()
        .map(|d| Diagnostic {
            severity: d.severity,
            span: map.span(&d.location),
            message: format!("{}: {}", d.location, d.message),
            clause: d.clause.to_string(),
        })
        .collect();
    for e in check_init(doc) {
        let span = match &e {
            LoadError::Fact { fact, .. } => map.fact(fact),
            LoadError::UnknownPlace(p) | LoadError::ViewPlace(p) | LoadError::IllTypedToken { place: p, .. } => {
                map.marking_entry(p)
            }
            _ => map.span(&Location::Init),
        };
        out.push(Diagnostic::error(span, "initial snapshot", e.to_string()));
    }
    out
}

/// The net and its initial snapshot, with view places computed from the initial facts.
pub fn load_snapshot(doc: &NetDocument) -> Result<(DbNet, Snapshot), LoadError> {
    let diags = validate_net(&doc.net);
    if has_errors(&diags) {
        return Err(LoadError::Invalid(diags));
    }
    if let Some(e) = check_init(doc).into_iter().next() {
        return Err(e);
    }
    let s0 = Snapshot::new(&doc.net, doc.init.facts.clone(), doc.init.marking.clone());
    Ok((doc.net.clone(), s0))
}
