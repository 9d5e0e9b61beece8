//! Markings, snapshots, enablement, firing and state-space construction.

mod firing;
mod lts;
mod marking;

pub use firing::{
    enabled_firings, enumerate_bindings, fire, fire_named, induced_action_instance, inscription_binding, is_enabled,
    FireOutcome, Firing, InputDomains, SemanticsError,
};
pub use lts::{build_lts, replay, Bounds, Edge, Lts, Monitors};
pub use marking::{align_view_places, marking_delta, Marking, Snapshot};
