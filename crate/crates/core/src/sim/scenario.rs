//! Scenario parameters, the fixed-step transit loop and trace output.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dp::{dp_step, DpParams, PathState, Route};
use super::geometry::{half_extent, separation, Vec2, VesselState};
use super::mpcs::{mpcs_decide, MpcsConfig, MpcsVariant, PlanningContext};
use super::sitaw::{sitaw_observe, Accuracies, BeliefState, NoiseMode, ObstacleTruth};

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Behaviour {
    #[default]
    ConstantVelocity,
    /// Instant course change at `turn_time_s`, speed unchanged.
    Maneuver { turn_time_s: f64, new_course_rad: f64 },
}

/// Initial obstacle placement relative to the route start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub range_m: f64,
    /// Maritime bearing from the route start.
    pub bearing_rad: f64,
    pub speed_mps: f64,
    pub course_rad: f64,
    pub length_m: f64,
    pub beam_m: f64,
    #[serde(default)]
    pub behaviour: Behaviour,
}

impl ObstacleSpec {
    pub fn initial_position(&self, route: &Route) -> Vec2 {
        route.start + Vec2::from_bearing(self.bearing_rad) * self.range_m
    }

    /// True obstacle at time `t`.
    pub fn truth_at(&self, route: &Route, t: f64) -> ObstacleTruth {
        let p0 = self.initial_position(route);
        let v0 = Vec2::from_bearing(self.course_rad) * self.speed_mps;
        let state = match self.behaviour {
            Behaviour::Maneuver {
                turn_time_s,
                new_course_rad,
            } if t > turn_time_s => {
                let v1 = Vec2::from_bearing(new_course_rad) * self.speed_mps;
                VesselState::new(p0 + v0 * turn_time_s + v1 * (t - turn_time_s), self.speed_mps, new_course_rad)
            }
            _ => VesselState::new(p0 + v0 * t, self.speed_mps, self.course_rad),
        };
        ObstacleTruth {
            state,
            length_m: self.length_m,
            beam_m: self.beam_m,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerParams {
    pub control_period_s: f64,
    pub horizon_s: f64,
    pub dv_mps: f64,
    pub lookahead_dt_s: f64,
    #[serde(default)]
    pub variant: MpcsVariant,
    /// Also require each candidate to be safe when followed by a stop one
    /// control period later.
    #[serde(default)]
    pub braking_contingency: bool,
}

/// One simulated transit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub id: String,
    pub route: Route,
    pub v_max: f64,
    pub d_min: f64,
    pub duration_s: f64,
    pub dt_s: f64,
    pub own_length_m: f64,
    pub own_beam_m: f64,
    /// Accuracies the SITAW component declares (and, in bounded mode, meets).
    pub accuracy: Accuracies,
    pub dp: DpParams,
    pub controller: ControllerParams,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario {id} is invalid: {}", problems.join("; "))]
    Invalid { id: String, problems: Vec<String> },
}

impl ScenarioParams {
    pub fn mpcs_config(&self) -> MpcsConfig {
        MpcsConfig {
            d_min: self.d_min,
            v_max: self.v_max,
            horizon_s: self.controller.horizon_s,
            dv: self.controller.dv_mps,
            lookahead_dt: self.controller.lookahead_dt_s,
            variant: self.controller.variant,
            stop_after_s: self
                .controller
                .braking_contingency
                .then_some(self.controller.control_period_s),
        }
    }

    pub fn tick_count(&self) -> u64 {
        (self.duration_s / self.dt_s).round() as u64
    }

    /// Ticks between control decisions.
    pub fn control_every(&self) -> u64 {
        ((self.controller.control_period_s / self.dt_s).round() as u64).max(1)
    }

    pub fn own_half_extent(&self) -> f64 {
        half_extent(self.own_length_m, self.own_beam_m)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut problems = Vec::new();
        positive(&mut problems, "dt_s", self.dt_s);
        positive(&mut problems, "duration_s", self.duration_s);
        positive(&mut problems, "d_min", self.d_min);
        positive(&mut problems, "own_length_m", self.own_length_m);
        positive(&mut problems, "own_beam_m", self.own_beam_m);
        positive(&mut problems, "dp.time_constant_s", self.dp.time_constant_s);
        positive(&mut problems, "controller.control_period_s", self.controller.control_period_s);
        positive(&mut problems, "controller.horizon_s", self.controller.horizon_s);
        positive(&mut problems, "controller.dv_mps", self.controller.dv_mps);
        positive(&mut problems, "controller.lookahead_dt_s", self.controller.lookahead_dt_s);
        positive(&mut problems, "route length", self.route.length());
        for (i, o) in self.obstacles.iter().enumerate() {
            positive(&mut problems, &format!("obstacles[{i}].length_m"), o.length_m);
            positive(&mut problems, &format!("obstacles[{i}].beam_m"), o.beam_m);
        }
        if let NoiseMode::Violating { scale } = self.noise_mode {
            positive(&mut problems, "noise_mode.scale", scale);
        }
        nonneg(&mut problems, "v_max", self.v_max);
        nonneg(&mut problems, "dp.accuracy.eps_pos", self.dp.accuracy.eps_pos);
        nonneg(&mut problems, "dp.accuracy.eps_speed", self.dp.accuracy.eps_speed);
        nonneg(&mut problems, "dp.accuracy.settle_time", self.dp.accuracy.settle_time);
        nonneg(&mut problems, "dp.disturbance_speed_mps2", self.dp.disturbance_speed_mps2);
        nonneg(&mut problems, "dp.disturbance_cross_track_mps", self.dp.disturbance_cross_track_mps);
        for (who, acc) in [("own", &self.accuracy.own), ("obstacle", &self.accuracy.obstacle)] {
            for (name, v) in acc.values() {
                nonneg(&mut problems, &format!("accuracy.{who}.{name}"), v);
            }
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            nonneg(&mut problems, &format!("obstacles[{i}].speed_mps"), o.speed_mps);
            for (name, v) in [("bearing_rad", o.bearing_rad), ("course_rad", o.course_rad)] {
                if !v.is_finite() {
                    problems.push(format!("obstacles[{i}].{name} must be finite"));
                }
            }
            if let Behaviour::Maneuver {
                turn_time_s,
                new_course_rad,
            } = o.behaviour
            {
                nonneg(&mut problems, &format!("obstacles[{i}].behaviour.turn_time_s"), turn_time_s);
                if !new_course_rad.is_finite() {
                    problems.push(format!("obstacles[{i}].behaviour.new_course_rad must be finite"));
                }
            }
        }
        if self.dt_s > 0.0 && self.dp.time_constant_s > 0.0 && self.dt_s >= self.dp.time_constant_s {
            problems.push("dt_s must be smaller than dp.time_constant_s".into());
        }
        if self.dt_s > 0.0 && self.controller.control_period_s > 0.0 {
            let ratio = self.controller.control_period_s / self.dt_s;
            if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-6 {
                problems.push("controller.control_period_s must be a positive multiple of dt_s".into());
            }
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if o.range_m.is_finite() && o.range_m <= self.d_min {
                problems.push(format!("obstacles[{i}].range_m must exceed d_min at t=0"));
            } else if !o.range_m.is_finite() {
                problems.push(format!("obstacles[{i}].range_m must be finite"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Invalid {
                id: self.id.clone(),
                problems,
            })
        }
    }
}

fn positive(problems: &mut Vec<String>, name: &str, v: f64) {
    if !(v.is_finite() && v > 0.0) {
        problems.push(format!("{name} must be finite and > 0 (got {v})"));
    }
}

fn nonneg(problems: &mut Vec<String>, name: &str, v: f64) {
    if !(v.is_finite() && v >= 0.0) {
        problems.push(format!("{name} must be finite and >= 0 (got {v})"));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleRecord {
    pub id: usize,
    pub truth: VesselState,
    pub estimate: VesselState,
    /// True (length, beam).
    pub dimensions: [f64; 2],
    /// Estimated (length, beam).
    pub est_dimensions: [f64; 2],
    /// True edge-to-edge separation from own ship.
    pub separation_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    pub own: VesselState,
    pub own_est: VesselState,
    pub progress_m: f64,
    pub cross_track_m: f64,
    pub command_mps: f64,
    /// Whether MPCS issued a new setpoint at this tick.
    pub decided: bool,
    pub obstacles: Vec<ObstacleRecord>,
    /// Smallest true separation this tick; absent without obstacles.
    pub sep_min_m: Option<f64>,
    /// `sep_min_m - d_min`.
    pub margin_m: Option<f64>,
}

impl TickRecord {
    /// Belief as MPCS saw it at this tick.
    pub fn belief(&self, declared: &Accuracies) -> BeliefState {
        BeliefState {
            own: self.own_est,
            obstacles: self
                .obstacles
                .iter()
                .map(|o| super::sitaw::ObstacleEstimate {
                    id: o.id,
                    state: o.estimate,
                    dimensions: o.est_dimensions,
                })
                .collect(),
            declared: *declared,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub ticks: u64,
    /// Minimum true separation over the run; absent without obstacles.
    pub min_separation_m: Option<f64>,
    pub final_progress_m: f64,
    pub final_speed_mps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub params: ScenarioParams,
    pub ticks: Vec<TickRecord>,
    pub summary: TraceSummary,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TraceLine {
    Header { schema_version: u32, params: Box<ScenarioParams> },
    Tick(Box<TickRecord>),
    Summary(TraceSummary),
}

impl Trace {
    /// Minimum true separation, `+inf` without obstacles.
    pub fn min_separation(&self) -> f64 {
        self.summary.min_separation_m.unwrap_or(f64::INFINITY)
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        let mut push = |line: TraceLine| {
            out.push_str(&serde_json::to_string(&line).expect("trace serializes"));
            out.push('\n');
        };
        push(TraceLine::Header {
            schema_version: TRACE_SCHEMA_VERSION,
            params: Box::new(self.params.clone()),
        });
        for t in &self.ticks {
            push(TraceLine::Tick(Box::new(t.clone())));
        }
        push(TraceLine::Summary(self.summary.clone()));
        out
    }

    pub fn from_ndjson(s: &str) -> Result<Trace, serde_json::Error> {
        let mut params = None;
        let mut ticks = Vec::new();
        let mut summary = None;
        for line in s.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str::<TraceLine>(line)? {
                TraceLine::Header { params: p, .. } => params = Some(*p),
                TraceLine::Tick(t) => ticks.push(*t),
                TraceLine::Summary(s) => summary = Some(s),
            }
        }
        let missing = |what: &str| <serde_json::Error as serde::de::Error>::custom(format!("trace has no {what} line"));
        Ok(Trace {
            params: params.ok_or_else(|| missing("header"))?,
            ticks,
            summary: summary.ok_or_else(|| missing("summary"))?,
        })
    }

    /// Per-tick CSV summary.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "sep_min", "margin", "cmd_speed", "own_speed", "progress_m"])
            .expect("in-memory csv");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.ticks {
            w.write_record([
                format!("{:.3}", r.t),
                opt(r.sep_min_m),
                opt(r.margin_m),
                format!("{:.6}", r.command_mps),
                format!("{:.6}", r.own.speed),
                format!("{:.6}", r.progress_m),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }
}

/// Run one transit. Deterministic in `p`: every random draw comes from a
/// stream keyed by (seed, tick, object).
pub fn run_scenario(p: &ScenarioParams) -> Result<Trace, ScenarioError> {
    p.validate()?;
    let cfg = p.mpcs_config();
    let ctx = PlanningContext {
        route: &p.route,
        own_dimensions: [p.own_length_m, p.own_beam_m],
        dp_accuracy: p.dp.accuracy,
        config: &cfg,
    };
    let own_he = p.own_half_extent();
    let n = p.tick_count();
    let every = p.control_every();
    let mut path = PathState {
        along_m: 0.0,
        cross_m: 0.0,
        speed: 0.0,
    };
    let mut command = 0.0;
    let mut ticks = Vec::with_capacity(n as usize + 1);
    let mut min_sep = f64::INFINITY;

    for k in 0..=n {
        let t = k as f64 * p.dt_s;
        let own = path.vessel_state(&p.route);
        let truths: Vec<ObstacleTruth> = p.obstacles.iter().map(|o| o.truth_at(&p.route, t)).collect();
        let belief = sitaw_observe(&own, &truths, &p.accuracy, p.noise_mode, p.seed, k);
        let decided = k % every == 0;
        if decided {
            command = mpcs_decide(&belief, &ctx).path_speed_command;
        }
        let obstacles: Vec<ObstacleRecord> = truths
            .iter()
            .zip(&belief.obstacles)
            .map(|(tr, est)| ObstacleRecord {
                id: est.id,
                truth: tr.state,
                estimate: est.state,
                dimensions: [tr.length_m, tr.beam_m],
                est_dimensions: est.dimensions,
                separation_m: separation(
                    own.position,
                    own_he,
                    tr.state.position,
                    half_extent(tr.length_m, tr.beam_m),
                ),
            })
            .collect();
        let sep = obstacles.iter().map(|o| o.separation_m).reduce(f64::min);
        if let Some(s) = sep {
            min_sep = min_sep.min(s);
        }
        ticks.push(TickRecord {
            tick: k,
            t,
            own,
            own_est: belief.own,
            progress_m: path.along_m,
            cross_track_m: path.cross_m,
            command_mps: command,
            decided,
            obstacles,
            sep_min_m: sep,
            margin_m: sep.map(|s| s - p.d_min),
        });
        if k < n {
            path = dp_step(&path, command, &p.dp, &p.route, p.dt_s, p.seed, k);
        }
    }
    let last = ticks.last().expect("at least one tick");
    let summary = TraceSummary {
        ticks: n + 1,
        min_separation_m: min_sep.is_finite().then_some(min_sep),
        final_progress_m: last.progress_m,
        final_speed_mps: last.own.speed,
    };
    Ok(Trace {
        params: p.clone(),
        ticks,
        summary,
    })
}
