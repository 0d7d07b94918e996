//! Priority-based assignment of indivisible objects.
//!
//! Runs the fixed-priority top trading cycles rule and agent-proposing
//! deferred acceptance, classifies priority structures by their cycle
//! conditions, audits rules over finite preference domains, and verifies or
//! synthesizes extensive-form mechanisms for obvious, strongly obvious and
//! simple strategy-proofness.

pub mod apda;
pub mod audit;
pub mod error;
pub mod json;
pub mod mechanism;
pub mod model;
pub mod priority;
pub mod rule;
pub mod search;
pub mod ttc;

pub use error::{Error, Result};
pub use model::{
    AgentId, Allocation, DomainKind, Item, Market, ObjectId, Preference, PreferenceDomain,
    PreferenceProfile, PriorityOrder, PriorityStructure, OUTSIDE_TOKEN,
};
pub use rule::RuleTable;
