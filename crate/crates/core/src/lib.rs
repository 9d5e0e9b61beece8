//! Colored Petri nets coupled to a constraint-checked relational database.
//!
//! A net is built from four layers: a [type domain](types::TypeDomain), a
//! [persistence layer](persistence::PersistenceLayer) of relations and
//! constraints, a [data logic](datalogic::DataLogicLayer) of queries and
//! actions, and a [control layer](control::ControlLayer) of places and
//! transitions. Nets are usually written in the `.dbnet` format read by
//! [`dsl::parse`]; [`semantics`] fires them, [`sim`] runs them and
//! [`explore`] searches their state space.

pub mod cli;
pub mod control;
pub mod datalogic;
pub mod dsl;
pub mod explore;
pub mod multiset;
pub mod persistence;
pub mod query;
pub mod semantics;
pub mod sim;
pub mod types;

/// Scenario files shipped with the crate.
pub mod scenarios {
    /// Ticket handling by two employees, with a one-ticket-per-employee constraint.
    pub const TICKET: &str = include_str!("../scenarios/ticket.dbnet");
    /// Fresh-name creation and passing over one string type, with no data logic.
    pub const NAMES: &str = include_str!("../scenarios/names.dbnet");
    /// A single black token moving from `p` to `q`.
    pub const BLACK_TOKEN: &str = include_str!("../scenarios/black_token.dbnet");
    /// A net whose guard reads a variable that no input arc binds.
    pub const GUARD_VIOLATION: &str = include_str!("../scenarios/guard_violation.dbnet");

    /// Every bundled scenario with its file name.
    pub const ALL: &[(&str, &str)] = &[
        ("ticket.dbnet", TICKET),
        ("names.dbnet", NAMES),
        ("black_token.dbnet", BLACK_TOKEN),
        ("guard_violation.dbnet", GUARD_VIOLATION),
    ];
}
