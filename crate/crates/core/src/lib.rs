//! Assume-guarantee contracts for control systems, modular refinement
//! checking, and contract-driven simulation testing of an autonomous ferry's
//! collision avoidance.
//!
//! Layout:
//! - [`contract`]: clause template, predicate vocabulary and entailment.
//! - [`model`]: component tree, dependency links and ODD record.
//! - [`refinement`]: discharge map, guarantee inheritance and cycle checks.
//! - [`identification`]: responsibility structure rules and causal-factor
//!   driven clause stubs.
//! - [`assurance`]: evidence, claims and report rendering.
//! - [`sim`]: deterministic transit simulator (SITAW, DP, MPCS).
//! - [`sbt`]: parameter spaces, monitors, verdicts and campaigns.

pub mod assurance;
pub mod contract;
pub mod finding;
pub mod fixtures;
pub mod identification;
pub mod model;
pub mod refinement;
pub mod sbt;
pub mod sim;

pub use contract::{entails, validate_contract, Clause, ClauseId, ClauseKind, Contract, PredicateSpec};
pub use finding::{Finding, Rule};
pub use model::{Component, ComponentKind, DependencyLink, RiskSource, SystemModel};
