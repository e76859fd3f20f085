//! Clause monitors: evaluate one contract clause over a simulation trace.
//!
//! Every check yields a signed slack per tick (bound minus observed value,
//! negative when the clause fails). A clause is violated when any slack of
//! any of its predicates drops below `-TOLERANCE`; the reported worst value
//! is the smallest slack and the first tick is where it first went negative.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{Clause, ClauseId, ClauseKind, PredicateSpec, Signal, Subject};
use crate::model::SystemModel;
use crate::refinement::DischargeMap;
use crate::sim::geometry::{angle_diff, VesselState};
use crate::sim::mpcs::{best_admissible, clearance, MpcsVariant, PlanningContext};
use crate::sim::scenario::{TickRecord, Trace};
use crate::sim::sitaw::SignalAccuracy;

use super::space::assumption_closure;
use super::SbtError;

/// Slack below which a check counts as violated; absorbs rounding in the
/// noise model (e.g. a disk sample at exactly the accuracy radius).
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum MonitorOutcome {
    Held,
    Violated { first_tick: u64, worst_value: f64 },
    NotApplicable,
}

impl MonitorOutcome {
    pub fn is_violated(&self) -> bool {
        matches!(self, MonitorOutcome::Violated { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonitorError {
    #[error("monitor {clause} needs signal {signal}, which the trace does not record")]
    SignalAbsent { clause: ClauseId, signal: String },
    #[error("monitored assumption {0} is not discharged in the discharge map")]
    Undischarged(ClauseId),
}

/// A clause turned into an executable check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClauseMonitor {
    pub clause_id: ClauseId,
    pub kind: ClauseKind,
    pub predicates: Vec<PredicateSpec>,
}

/// Running minimum of slacks with the first violating tick.
#[derive(Debug, Default)]
struct Acc {
    worst: Option<f64>,
    first_violation: Option<u64>,
}

impl Acc {
    fn push(&mut self, tick: u64, slack: f64) {
        self.worst = Some(self.worst.map_or(slack, |w| w.min(slack)));
        if slack < -TOLERANCE && self.first_violation.is_none() {
            self.first_violation = Some(tick);
        }
    }

    fn merge(&mut self, other: Acc) {
        if let Some(w) = other.worst {
            self.worst = Some(self.worst.map_or(w, |x| x.min(w)));
        }
        self.first_violation = match (self.first_violation, other.first_violation) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
    }

    fn outcome(self) -> MonitorOutcome {
        match (self.worst, self.first_violation) {
            (None, _) => MonitorOutcome::NotApplicable,
            (Some(w), Some(first_tick)) => MonitorOutcome::Violated {
                first_tick,
                worst_value: w,
            },
            (Some(_), None) => MonitorOutcome::Held,
        }
    }
}

fn declared(acc: &SignalAccuracy, signal: Signal) -> f64 {
    match signal {
        Signal::PositionM => acc.position_m,
        Signal::SpeedMps => acc.speed_mps,
        Signal::HeadingRad => acc.heading_rad,
        Signal::CourseRad => acc.course_rad,
        Signal::DimensionsM => acc.dimensions_m,
    }
}

/// Estimation error of one signal.
pub fn state_error(signal: Signal, truth: &VesselState, est: &VesselState) -> f64 {
    match signal {
        Signal::PositionM => (est.position - truth.position).norm(),
        Signal::SpeedMps => (est.speed - truth.speed).abs(),
        Signal::HeadingRad => angle_diff(est.heading, truth.heading).abs(),
        Signal::CourseRad => angle_diff(est.course, truth.course).abs(),
        Signal::DimensionsM => unreachable!("dimension error is not a state error"),
    }
}

/// Per-tick view of the context the decision was taken in.
pub fn planning_context<'a>(trace: &'a Trace, cfg: &'a crate::sim::mpcs::MpcsConfig) -> PlanningContext<'a> {
    PlanningContext {
        route: &trace.params.route,
        own_dimensions: [trace.params.own_length_m, trace.params.own_beam_m],
        dp_accuracy: trace.params.dp.accuracy,
        config: cfg,
    }
}

impl ClauseMonitor {
    pub fn from_clause(c: &Clause) -> Self {
        Self {
            clause_id: c.id.clone(),
            kind: c.kind,
            predicates: c.predicates.clone(),
        }
    }

    /// Evaluate over every tick of `trace`.
    pub fn evaluate(&self, trace: &Trace) -> Result<MonitorOutcome, MonitorError> {
        let mut total = Acc::default();
        for p in &self.predicates {
            total.merge(self.evaluate_predicate(p, trace)?);
        }
        Ok(total.outcome())
    }

    fn evaluate_predicate(&self, p: &PredicateSpec, trace: &Trace) -> Result<Acc, MonitorError> {
        let mut acc = Acc::default();
        let params = &trace.params;
        match p {
            PredicateSpec::StateErrorBound {
                signal,
                subject,
                epsilon,
            } => {
                if *subject == Subject::Own && *signal == Signal::DimensionsM {
                    return Err(MonitorError::SignalAbsent {
                        clause: self.clause_id.clone(),
                        signal: "own.dimensions_m".into(),
                    });
                }
                let decl = match subject {
                    Subject::Own => declared(&params.accuracy.own, *signal),
                    Subject::Obstacle => declared(&params.accuracy.obstacle, *signal),
                };
                let agreed = epsilon - decl;
                for r in &trace.ticks {
                    match subject {
                        Subject::Own => {
                            let e = state_error(*signal, &r.own, &r.own_est);
                            acc.push(r.tick, agreed.min(decl - e));
                        }
                        Subject::Obstacle => {
                            for o in &r.obstacles {
                                let e = match signal {
                                    Signal::DimensionsM => (o.est_dimensions[0] - o.dimensions[0])
                                        .abs()
                                        .max((o.est_dimensions[1] - o.dimensions[1]).abs()),
                                    s => state_error(*s, &o.truth, &o.estimate),
                                };
                                acc.push(r.tick, agreed.min(decl - e));
                            }
                        }
                    }
                }
            }
            PredicateSpec::SeparationBound { d_min } => {
                for r in &trace.ticks {
                    for o in &r.obstacles {
                        acc.push(r.tick, o.separation_m - d_min);
                    }
                }
            }
            PredicateSpec::TrackingBound {
                eps_pos,
                eps_speed,
                settle_time,
            } => {
                let mut since = 0.0;
                let mut prev: Option<f64> = None;
                for r in &trace.ticks {
                    acc.push(r.tick, eps_pos - r.cross_track_m.abs());
                    // own speed at this tick reflects commands up to the previous tick
                    if let Some(cmd) = prev {
                        if r.t - since >= settle_time - 1e-9 {
                            acc.push(r.tick, eps_speed - (r.own.speed - cmd).abs());
                        }
                    }
                    if prev != Some(r.command_mps) {
                        since = r.t;
                    }
                    prev = Some(r.command_mps);
                }
            }
            PredicateSpec::ConfigValid { route_id, d_min } => {
                let tick = trace.ticks.first().map_or(0, |r| r.tick);
                let slack = if &params.route.id == route_id {
                    params.d_min - d_min
                } else {
                    -1.0
                };
                acc.push(tick, slack);
            }
            PredicateSpec::SafeSetpointRule { horizon_s } => {
                let mut cfg = params.mpcs_config();
                cfg.variant = MpcsVariant::Nominal;
                cfg.horizon_s = *horizon_s;
                let ctx = planning_context(trace, &cfg);
                for r in trace.ticks.iter().filter(|r| r.decided) {
                    acc.push(r.tick, setpoint_slack(r, trace, &ctx));
                }
            }
            PredicateSpec::ObstacleBehaviour {
                max_speed,
                max_turn_rate,
                ..
            } => {
                let dt = params.dt_s;
                let mut prev: Option<&TickRecord> = None;
                for r in &trace.ticks {
                    for (i, o) in r.obstacles.iter().enumerate() {
                        acc.push(r.tick, max_speed - o.truth.speed);
                        if let Some(q) = prev.and_then(|p| p.obstacles.get(i)) {
                            let rate = angle_diff(o.truth.course, q.truth.course).abs() / dt;
                            acc.push(r.tick, max_turn_rate - rate);
                            // constant velocity: speed does not change
                            acc.push(r.tick, -(o.truth.speed - q.truth.speed).abs());
                        }
                    }
                    prev = Some(r);
                }
            }
        }
        Ok(acc)
    }
}

/// Slack of the setpoint rule at one decision tick: the clearance of the
/// issued command, or zero when the command is the zero fallback and no
/// candidate was admissible.
fn setpoint_slack(r: &TickRecord, trace: &Trace, ctx: &PlanningContext<'_>) -> f64 {
    let belief = r.belief(&trace.params.accuracy);
    let cmd = r.command_mps;
    let c = clearance(&belief, ctx, cmd);
    if c >= 0.0 {
        // no obstacles gives +inf clearance; report a zero slack instead
        return if c.is_finite() { c } else { 0.0 };
    }
    match best_admissible(&belief, ctx) {
        None if cmd == 0.0 => 0.0,
        _ => c,
    }
}

/// Monitors for testing one component: its formal assumptions plus those of
/// its providers (transitively), and its formal guarantees plus every
/// composite guarantee it inherits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSet {
    pub component: String,
    pub assumptions: Vec<ClauseMonitor>,
    pub guarantees: Vec<ClauseMonitor>,
}

impl MonitorSet {
    pub fn guarantee_ids(&self) -> Vec<ClauseId> {
        self.guarantees.iter().map(|m| m.clause_id.clone()).collect()
    }

    pub fn assumption_ids(&self) -> Vec<ClauseId> {
        self.assumptions.iter().map(|m| m.clause_id.clone()).collect()
    }

    /// Check the precondition that every monitored assumption is resolved.
    pub fn check_discharged(&self, map: &DischargeMap) -> Result<(), MonitorError> {
        for m in &self.assumptions {
            if let Some(d) = map.entries.get(&m.clause_id) {
                if !d.is_resolved() {
                    return Err(MonitorError::Undischarged(m.clause_id.clone()));
                }
            }
        }
        Ok(())
    }
}

pub fn monitors_for(model: &SystemModel, component: &str, map: &DischargeMap) -> Result<MonitorSet, SbtError> {
    let idx = model.index();
    let comp = idx
        .component(component)
        .ok_or_else(|| SbtError::UnknownComponent(component.to_string()))?;
    let assumptions = assumption_closure(&idx, map, component)
        .into_iter()
        .filter(|a| !a.is_informal())
        .map(ClauseMonitor::from_clause)
        .collect();
    let mut guarantees = Vec::new();
    for g in &comp.component.contract.guarantees {
        if let Some(parent_id) = &g.inherits {
            if let Some(pg) = idx.clause(parent_id) {
                if !pg.clause.is_informal() {
                    guarantees.push(ClauseMonitor::from_clause(pg.clause));
                }
            }
        }
        if !g.is_informal() {
            guarantees.push(ClauseMonitor::from_clause(g));
        }
    }
    Ok(MonitorSet {
        component: component.to_string(),
        assumptions,
        guarantees,
    })
}
