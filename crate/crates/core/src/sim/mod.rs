//! Deterministic 2-D transit simulator: true own-ship and obstacle motion,
//! SITAW estimation, DP setpoint tracking and the MPCS speed decision.

pub mod dp;
pub mod geometry;
pub mod mpcs;
pub mod scenario;
pub mod sitaw;

pub use dp::{dp_step, dp_step_with, DpParams, PathState, Route, TrackingSpec};
pub use geometry::{predict_cpa, Vec2, VesselState};
pub use mpcs::{mpcs_decide, MpcsConfig, MpcsVariant, PlanningContext, Setpoint};
pub use scenario::{
    run_scenario, Behaviour, ControllerParams, ObstacleSpec, ScenarioError, ScenarioParams, TickRecord, Trace,
};
pub use sitaw::{sitaw_observe, Accuracies, BeliefState, NoiseMode, ObstacleEstimate, SignalAccuracy};
