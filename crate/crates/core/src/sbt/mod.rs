//! Simulation-based testing of one component against its contract: the
//! parameter space comes from the assumptions, monitors from the clauses,
//! and campaigns sample the space, classify traces and refine near the
//! safety boundary.

pub mod campaign;
pub mod lhs;
pub mod monitor;
pub mod space;
pub mod verdict;

use thiserror::Error;

use crate::finding::Finding;
use crate::sim::ScenarioError;

pub use campaign::{run_campaign, CampaignPlan, CampaignReport};
pub use lhs::{lhs_sample, lhs_unit};
pub use monitor::{monitors_for, ClauseMonitor, MonitorError, MonitorOutcome, MonitorSet};
pub use space::{derive_parameter_space, Dimension, ParameterSpace, Target};
pub use verdict::{classify_verdict, Classification, ScenarioVerdict};

#[derive(Debug, Error)]
pub enum SbtError {
    #[error("unknown component {0}")]
    UnknownComponent(String),
    #[error("{0}: no testable assumptions")]
    NoTestableAssumptions(String),
    #[error("{0}: no ODD record on the enclosing composite")]
    NoOdd(String),
    #[error("model has structural findings: {}", .0.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; "))]
    Structure(Vec<Finding>),
    #[error("route {0} is not part of the ODD")]
    NoRoute(String),
    #[error("{0}: no separation bound to monitor")]
    NoSeparation(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Monitor(#[from] MonitorError),
    #[error("invalid campaign plan: {0}")]
    Plan(String),
}
