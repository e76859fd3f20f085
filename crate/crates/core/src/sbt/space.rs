//! Test parameter space derived from a component's contract assumptions and
//! the ODD record of its composite.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::contract::{Clause, PredicateSpec, Signal, Subject};
use crate::model::{ModelIndex, OddRecord, SystemModel};
use crate::refinement::{build_discharge_map, Discharge, DischargeMap};
use crate::sim::dp::{DpParams, Route, TrackingSpec};
use crate::sim::mpcs::MpcsVariant;
use crate::sim::scenario::{Behaviour, ControllerParams, ObstacleSpec, ScenarioParams};
use crate::sim::sitaw::{Accuracies, NoiseMode, SignalAccuracy};

use super::SbtError;

/// Where a sampled value goes in the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "snake_case")]
pub enum Target {
    ObstacleRange { obstacle: usize },
    ObstacleBearing { obstacle: usize },
    ObstacleSpeed { obstacle: usize },
    ObstacleCourse { obstacle: usize },
    ManeuverTime { obstacle: usize },
    ManeuverCourseChange { obstacle: usize },
    Accuracy { subject: Subject, signal: Signal },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub unit: String,
    pub lower: f64,
    pub upper: f64,
    /// Clause id the range comes from, or "environment".
    pub source: String,
    pub target: Target,
}

impl Dimension {
    pub fn value(&self, u: f64) -> f64 {
        self.lower + u.clamp(0.0, 1.0) * (self.upper - self.lower)
    }

    pub fn unit_of(&self, v: f64) -> f64 {
        ((v - self.lower) / (self.upper - self.lower)).clamp(0.0, 1.0)
    }
}

pub const ENVIRONMENT: &str = "environment";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    pub component: String,
    pub dimensions: Vec<Dimension>,
    /// Constants pinned by assumptions (route, d_min, DP accuracy, ...).
    pub fixed: BTreeMap<String, serde_json::Value>,
    /// Scenario every sample starts from.
    pub base: ScenarioParams,
}

impl ParameterSpace {
    pub fn dim(&self) -> usize {
        self.dimensions.len()
    }

    /// Scenario for a point of the unit hypercube.
    pub fn instantiate(&self, unit: &[f64], id: String, seed: u64) -> ScenarioParams {
        let mut p = self.base.clone();
        p.id = id;
        p.seed = seed;
        let mut course_change = vec![None; p.obstacles.len()];
        let mut turn_time = vec![None; p.obstacles.len()];
        for (d, &u) in self.dimensions.iter().zip(unit) {
            let v = d.value(u);
            match d.target {
                Target::ObstacleRange { obstacle } => p.obstacles[obstacle].range_m = v,
                Target::ObstacleBearing { obstacle } => p.obstacles[obstacle].bearing_rad = v,
                Target::ObstacleSpeed { obstacle } => p.obstacles[obstacle].speed_mps = v,
                Target::ObstacleCourse { obstacle } => p.obstacles[obstacle].course_rad = v,
                Target::ManeuverTime { obstacle } => turn_time[obstacle] = Some(v),
                Target::ManeuverCourseChange { obstacle } => course_change[obstacle] = Some(v),
                Target::Accuracy { subject, signal } => {
                    let acc = match subject {
                        Subject::Own => &mut p.accuracy.own,
                        Subject::Obstacle => &mut p.accuracy.obstacle,
                    };
                    *accuracy_field(acc, signal) = v;
                }
            }
        }
        for (i, o) in p.obstacles.iter_mut().enumerate() {
            if let (Some(turn_time_s), Some(change)) = (turn_time[i], course_change[i]) {
                o.behaviour = Behaviour::Maneuver {
                    turn_time_s,
                    new_course_rad: crate::sim::geometry::wrap_angle(o.course_rad + change),
                };
            }
        }
        p
    }

    /// Add per-obstacle maneuver dimensions. Maneuvering obstacles break the
    /// constant-velocity assumption on purpose.
    pub fn with_maneuvers(mut self) -> Self {
        let duration = self.base.duration_s;
        for i in 0..self.base.obstacles.len() {
            self.dimensions.push(Dimension {
                name: format!("obstacle[{i}].turn_time_s"),
                unit: "s".into(),
                lower: 0.0,
                upper: 0.9 * duration,
                source: ENVIRONMENT.into(),
                target: Target::ManeuverTime { obstacle: i },
            });
            self.dimensions.push(Dimension {
                name: format!("obstacle[{i}].course_change_rad"),
                unit: "rad".into(),
                lower: 0.3,
                upper: 1.2,
                source: ENVIRONMENT.into(),
                target: Target::ManeuverCourseChange { obstacle: i },
            });
        }
        self
    }

    pub fn with_noise(mut self, mode: NoiseMode) -> Self {
        self.base.noise_mode = mode;
        self
    }

    pub fn with_variant(mut self, variant: MpcsVariant) -> Self {
        self.base.controller.variant = variant;
        self
    }
}

pub fn accuracy_field(acc: &mut SignalAccuracy, signal: Signal) -> &mut f64 {
    match signal {
        Signal::PositionM => &mut acc.position_m,
        Signal::SpeedMps => &mut acc.speed_mps,
        Signal::HeadingRad => &mut acc.heading_rad,
        Signal::CourseRad => &mut acc.course_rad,
        Signal::DimensionsM => &mut acc.dimensions_m,
    }
}

/// Assumptions of `component` followed by the assumptions of every
/// component providing one of them, transitively, in discovery order.
pub fn assumption_closure<'a>(idx: &ModelIndex<'a>, map: &DischargeMap, component: &str) -> Vec<&'a Clause> {
    let mut out: Vec<&Clause> = Vec::new();
    let mut queue = vec![component.to_string()];
    let mut visited = Vec::new();
    while let Some(c) = queue.pop() {
        if visited.contains(&c) {
            continue;
        }
        visited.push(c.clone());
        let Some(r) = idx.component(&c) else { continue };
        let mut providers = Vec::new();
        for a in &r.component.contract.assumptions {
            out.push(a);
            if let Some(Discharge::DischargedBy { provider, .. }) = map.entries.get(&a.id) {
                if let Some(owner) = provider.rsplit_once('.').map(|(o, _)| o.to_string()) {
                    providers.push(owner);
                }
            }
        }
        // keep discovery order stable: visit providers in clause order
        providers.reverse();
        queue.extend(providers);
    }
    out
}

fn provider_predicate<'a>(
    idx: &ModelIndex<'a>,
    map: &DischargeMap,
    assumption: &str,
    key: &PredicateSpec,
) -> Option<&'a PredicateSpec> {
    let Some(Discharge::DischargedBy { provider, .. }) = map.entries.get(assumption) else {
        return None;
    };
    idx.clause(provider)?
        .clause
        .predicates
        .iter()
        .find(|p| p.same_key(key))
}

fn interval_dim(name: String, unit: &str, lower: f64, upper: f64, source: &str, target: Target) -> Dimension {
    Dimension {
        name,
        unit: unit.into(),
        lower,
        upper,
        source: source.into(),
        target,
    }
}

/// Derive the parameter space for testing `component_id`.
pub fn derive_parameter_space(model: &SystemModel, component_id: &str) -> Result<ParameterSpace, SbtError> {
    let idx = model.index();
    let comp = idx
        .component(component_id)
        .ok_or_else(|| SbtError::UnknownComponent(component_id.to_string()))?
        .component;
    if comp.contract.assumptions.iter().all(|a| a.is_informal()) {
        return Err(SbtError::NoTestableAssumptions(component_id.to_string()));
    }
    let odd = idx
        .odd_for(component_id)
        .ok_or_else(|| SbtError::NoOdd(component_id.to_string()))?;
    let map = build_discharge_map(model).map_err(SbtError::Structure)?;
    let clauses = assumption_closure(&idx, &map, component_id);

    let mut fixed: BTreeMap<String, serde_json::Value> = BTreeMap::new();
    let mut route_id = odd.routes.first().map(|r| r.id.clone());
    let mut d_min = None;
    let mut tracking: Option<TrackingSpec> = None;
    let mut speed_cap: Option<(f64, String)> = None;
    let mut course_source = ENVIRONMENT.to_string();
    let mut accuracy_dims: Vec<Dimension> = Vec::new();

    for a in &clauses {
        for p in &a.predicates {
            match p {
                PredicateSpec::StateErrorBound {
                    signal,
                    subject,
                    epsilon,
                } => {
                    let provided = provider_predicate(&idx, &map, &a.id, p).and_then(|pp| match pp {
                        PredicateSpec::StateErrorBound { epsilon, .. } => Some(*epsilon),
                        _ => None,
                    });
                    let upper = provided.map_or(*epsilon, |e| e.min(*epsilon));
                    let name = format!("sitaw.{}.{}", subject.name(), signal.name());
                    if let Some(existing) = accuracy_dims.iter_mut().find(|d| d.name == name) {
                        existing.upper = existing.upper.min(upper);
                    } else if upper > 0.0 {
                        accuracy_dims.push(interval_dim(
                            name,
                            signal.unit(),
                            0.0,
                            upper,
                            &a.id,
                            Target::Accuracy {
                                subject: *subject,
                                signal: *signal,
                            },
                        ));
                    }
                }
                PredicateSpec::ConfigValid {
                    route_id: r,
                    d_min: d,
                } => {
                    route_id = Some(r.clone());
                    d_min = Some(*d);
                    fixed.insert("route_id".into(), r.clone().into());
                    fixed.insert("d_min".into(), (*d).into());
                }
                PredicateSpec::TrackingBound { .. } => {
                    let spec = match provider_predicate(&idx, &map, &a.id, p).unwrap_or(p) {
                        PredicateSpec::TrackingBound {
                            eps_pos,
                            eps_speed,
                            settle_time,
                        } => TrackingSpec {
                            eps_pos: *eps_pos,
                            eps_speed: *eps_speed,
                            settle_time: *settle_time,
                        },
                        _ => unreachable!("same_key keeps the variant"),
                    };
                    fixed.insert("dp.eps_pos".into(), spec.eps_pos.into());
                    fixed.insert("dp.eps_speed".into(), spec.eps_speed.into());
                    fixed.insert("dp.settle_time".into(), spec.settle_time.into());
                    tracking = Some(spec);
                }
                PredicateSpec::ObstacleBehaviour { max_speed, .. } => {
                    if speed_cap.as_ref().is_none_or(|(s, _)| *max_speed < *s) {
                        speed_cap = Some((*max_speed, a.id.clone()));
                    }
                    course_source = a.id.clone();
                }
                PredicateSpec::SeparationBound { .. } | PredicateSpec::SafeSetpointRule { .. } => {}
            }
        }
    }

    let route_spec = odd
        .routes
        .iter()
        .find(|r| Some(&r.id) == route_id.as_ref())
        .ok_or_else(|| SbtError::NoRoute(route_id.clone().unwrap_or_default()))?;
    let d_min = d_min
        .or_else(|| composite_d_min(model))
        .ok_or_else(|| SbtError::NoSeparation(component_id.to_string()))?;
    let tracking = tracking.unwrap_or(TrackingSpec {
        eps_pos: 0.0,
        eps_speed: 0.0,
        settle_time: 0.0,
    });

    let mut dims = Vec::new();
    let (speed_upper, speed_source) = match &speed_cap {
        Some((cap, src)) => (odd.obstacle_speed_mps.upper.min(*cap), src.clone()),
        None => (odd.obstacle_speed_mps.upper, ENVIRONMENT.to_string()),
    };
    for i in 0..odd.obstacle_count {
        dims.push(interval_dim(
            format!("obstacle[{i}].range_m"),
            "m",
            odd.initial_range_m.lower,
            odd.initial_range_m.upper,
            ENVIRONMENT,
            Target::ObstacleRange { obstacle: i },
        ));
        dims.push(interval_dim(
            format!("obstacle[{i}].bearing_rad"),
            "rad",
            odd.initial_bearing_rad.lower,
            odd.initial_bearing_rad.upper,
            ENVIRONMENT,
            Target::ObstacleBearing { obstacle: i },
        ));
        dims.push(interval_dim(
            format!("obstacle[{i}].speed_mps"),
            "m/s",
            odd.obstacle_speed_mps.lower,
            speed_upper,
            &speed_source,
            Target::ObstacleSpeed { obstacle: i },
        ));
        dims.push(interval_dim(
            format!("obstacle[{i}].course_rad"),
            "rad",
            odd.obstacle_course_rad.lower,
            odd.obstacle_course_rad.upper,
            &course_source,
            Target::ObstacleCourse { obstacle: i },
        ));
    }
    dims.extend(accuracy_dims);
    dims.retain(|d| d.upper > d.lower);

    let base = base_scenario(odd, route_spec, d_min, tracking, &dims);
    fixed.insert("route_id".into(), route_spec.id.clone().into());
    fixed.insert("d_min".into(), d_min.into());
    fixed.insert("v_max".into(), route_spec.v_max_mps.into());
    Ok(ParameterSpace {
        component: component_id.to_string(),
        dimensions: dims,
        fixed,
        base,
    })
}

fn composite_d_min(model: &SystemModel) -> Option<f64> {
    let root = model.composite.as_ref()?;
    root.contract.guarantees.iter().flat_map(|g| &g.predicates).find_map(|p| match p {
        PredicateSpec::SeparationBound { d_min } => Some(*d_min),
        _ => None,
    })
}

fn base_scenario(
    odd: &OddRecord,
    route: &crate::model::RouteSpec,
    d_min: f64,
    tracking: TrackingSpec,
    dims: &[Dimension],
) -> ScenarioParams {
    let sim = &odd.simulation;
    // Unsampled accuracies default to zero error.
    let mut accuracy = Accuracies::default();
    for d in dims {
        if let Target::Accuracy { subject, signal } = d.target {
            let acc = match subject {
                Subject::Own => &mut accuracy.own,
                Subject::Obstacle => &mut accuracy.obstacle,
            };
            *accuracy_field(acc, signal) = d.upper;
        }
    }
    let obstacles = (0..odd.obstacle_count)
        .map(|_| ObstacleSpec {
            range_m: odd.initial_range_m.midpoint(),
            bearing_rad: odd.initial_bearing_rad.midpoint(),
            speed_mps: odd.obstacle_speed_mps.midpoint(),
            course_rad: odd.obstacle_course_rad.midpoint(),
            length_m: odd.obstacle_length_m,
            beam_m: odd.obstacle_beam_m,
            behaviour: Behaviour::ConstantVelocity,
        })
        .collect();
    ScenarioParams {
        id: "base".into(),
        route: Route {
            id: route.id.clone(),
            start: route.start.into(),
            end: route.end.into(),
        },
        v_max: route.v_max_mps,
        d_min,
        duration_s: sim.duration_s,
        dt_s: sim.dt_s,
        own_length_m: odd.own_length_m,
        own_beam_m: odd.own_beam_m,
        accuracy,
        dp: DpParams {
            time_constant_s: sim.dp_time_constant_s,
            accuracy: tracking,
            disturbance_speed_mps2: sim.dp_disturbance_speed_mps2,
            disturbance_cross_track_mps: sim.dp_disturbance_cross_track_mps,
        },
        controller: ControllerParams {
            control_period_s: sim.control_period_s,
            horizon_s: sim.horizon_s,
            dv_mps: sim.dv_mps,
            lookahead_dt_s: sim.lookahead_dt_s,
            variant: MpcsVariant::Nominal,
            braking_contingency: sim.braking_contingency,
        },
        obstacles,
        noise_mode: NoiseMode::Bounded,
        seed: 0,
    }
}

/// Scenario with every sampled dimension at its midpoint; a convenient
/// nominal transit for the CLI and tests.
pub fn nominal_scenario(space: &ParameterSpace, seed: u64) -> ScenarioParams {
    let unit = vec![0.5; space.dim()];
    space.instantiate(&unit, format!("{}-nominal", space.component), seed)
}
