//! Motion planning: speed-only collision avoidance on a fixed crossing path.
//!
//! Every candidate speed on a `dv` grid is checked against the predicted
//! obstacle tracks over the horizon. A candidate is admissible when the
//! predicted centre distance to every obstacle stays at or above the
//! required distance [`required_distance`] at every lookahead sample; the
//! largest admissible candidate wins and zero is the fallback.
//!
//! With `stop_after_s` set, a candidate must also be admissible when it is
//! held only for that long and followed by a stop. Every position the ferry
//! can come to rest at has then been checked over the horizon, so falling
//! back to zero never parks it on a predicted obstacle track.

use serde::{Deserialize, Serialize};

use super::dp::{Route, TrackingSpec};
use super::geometry::{half_extent, Vec2};
use super::sitaw::{BeliefState, ObstacleEstimate};

/// Decision rule variant. `DropAccuracyMargins` is a deliberately faulty
/// planner that ignores every SITAW and DP accuracy term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MpcsVariant {
    #[default]
    Nominal,
    DropAccuracyMargins,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcsConfig {
    pub d_min: f64,
    pub v_max: f64,
    pub horizon_s: f64,
    pub dv: f64,
    /// Spacing of lookahead samples.
    pub lookahead_dt: f64,
    #[serde(default)]
    pub variant: MpcsVariant,
    /// Hold time of the braking contingency; `None` checks constant speed only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_after_s: Option<f64>,
}

/// Everything the planner knows besides the belief.
#[derive(Debug, Clone, Copy)]
pub struct PlanningContext<'a> {
    pub route: &'a Route,
    /// Own (length, beam).
    pub own_dimensions: [f64; 2],
    pub dp_accuracy: TrackingSpec,
    pub config: &'a MpcsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setpoint {
    pub path_speed_command: f64,
    pub path_id: String,
}

/// Candidate speeds 0, dv, 2dv, ... up to and including v_max.
pub fn candidate_speeds(v_max: f64, dv: f64) -> Vec<f64> {
    if v_max <= 0.0 || dv <= 0.0 {
        return vec![0.0];
    }
    let n = (v_max / dv + 1e-9).floor() as usize;
    let mut out: Vec<f64> = (0..=n).map(|k| k as f64 * dv).collect();
    if out.last().is_some_and(|&v| v < v_max - 1e-9) {
        out.push(v_max);
    }
    out
}

/// Lookahead sample times 0, dt, 2dt, ... up to the horizon.
pub fn lookahead_times(horizon_s: f64, dt: f64) -> impl Iterator<Item = f64> {
    let n = (horizon_s / dt + 1e-9).floor() as usize;
    (0..=n).map(move |j| j as f64 * dt)
}

/// Upper bound on the obstacle's half-extent given the estimated
/// dimensions and their accuracy.
pub fn obstacle_half_extent_bound(o: &ObstacleEstimate, eps_dim: f64) -> f64 {
    half_extent(o.dimensions[0] + eps_dim, o.dimensions[1] + eps_dim)
}

/// Required centre distance to obstacle `o` at lookahead `t`:
///
/// d_min + e_pos_own + e_pos_obs + dp.eps_pos
///       + (e_speed_own + e_vel_obs) * t + own half-extent + obstacle half-extent bound
///
/// where e_vel_obs = e_speed_obs + (v_obs_est + e_speed_obs) * e_course_obs bounds
/// the obstacle velocity error from both its speed and course errors.
pub fn required_distance(t: f64, belief: &BeliefState, o: &ObstacleEstimate, ctx: &PlanningContext<'_>) -> f64 {
    let (base, slope) = required_distance_terms(belief, o, ctx);
    base + slope * t
}

/// `required_distance` as `base + slope * t`.
pub fn required_distance_terms(belief: &BeliefState, o: &ObstacleEstimate, ctx: &PlanningContext<'_>) -> (f64, f64) {
    let own_he = half_extent(ctx.own_dimensions[0], ctx.own_dimensions[1]);
    let d_min = ctx.config.d_min;
    match ctx.config.variant {
        MpcsVariant::DropAccuracyMargins => (d_min + own_he + half_extent(o.dimensions[0], o.dimensions[1]), 0.0),
        MpcsVariant::Nominal => {
            let own = &belief.declared.own;
            let obs = &belief.declared.obstacle;
            let e_vel_obs = obs.speed_mps + (o.state.speed + obs.speed_mps) * obs.course_rad;
            let base = d_min
                + own.position_m
                + obs.position_m
                + ctx.dp_accuracy.eps_pos
                + own_he
                + obstacle_half_extent_bound(o, obs.dimensions_m);
            (base, own.speed_mps + e_vel_obs)
        }
    }
}

/// Own position predicted along the route at constant speed `v`.
pub fn own_prediction(belief: &BeliefState, route: &Route, v: f64, t: f64) -> Vec2 {
    own_prediction_held(belief, route, v, t, None)
}

/// Own position when holding `v` for `hold` seconds (forever if `None`) and
/// standing still afterwards.
pub fn own_prediction_held(belief: &BeliefState, route: &Route, v: f64, t: f64, hold: Option<f64>) -> Vec2 {
    let (s, _) = route.project(belief.own.position);
    let moving = hold.map_or(t, |h| t.min(h));
    route.point_at(s + v * moving, 0.0)
}

/// Per-decision precomputation: route frame, own along-track start and,
/// per obstacle, position, velocity and the required-distance terms.
struct Scene {
    start: Vec2,
    tangent: Vec2,
    length: f64,
    s0: f64,
    obstacles: Vec<(Vec2, Vec2, f64, f64)>,
    times: Vec<f64>,
    holds: Vec<Option<f64>>,
}

impl Scene {
    fn new(belief: &BeliefState, ctx: &PlanningContext<'_>) -> Self {
        let route = ctx.route;
        let length = route.length();
        Scene {
            start: route.start,
            tangent: route.end - route.start,
            length,
            s0: route.project(belief.own.position).0,
            obstacles: belief
                .obstacles
                .iter()
                .map(|o| {
                    let (base, slope) = required_distance_terms(belief, o, ctx);
                    (o.state.position, o.state.velocity(), base, slope)
                })
                .collect(),
            times: lookahead_times(ctx.config.horizon_s, ctx.config.lookahead_dt).collect(),
            holds: std::iter::once(None).chain(ctx.config.stop_after_s.map(Some)).collect(),
        }
    }

    fn own_at(&self, v: f64, t: f64, hold: Option<f64>) -> Vec2 {
        let moving = hold.map_or(t, |h| t.min(h));
        let s = (self.s0 + v * moving).clamp(0.0, self.length);
        if self.length > 0.0 {
            self.start + self.tangent * (s / self.length)
        } else {
            self.start
        }
    }

    /// Gaps (distance minus required distance) of every sample, in order.
    fn gaps(&self, v: f64) -> impl Iterator<Item = f64> + '_ {
        self.holds.iter().flat_map(move |&hold| {
            self.times.iter().flat_map(move |&t| {
                let own = self.own_at(v, t, hold);
                self.obstacles
                    .iter()
                    .map(move |&(p, vel, base, slope)| (p + vel * t - own).norm() - (base + slope * t))
            })
        })
    }
}

/// Smallest (predicted distance - required distance) over all obstacles,
/// lookahead samples and checked profiles; `+inf` with no obstacles.
pub fn clearance(belief: &BeliefState, ctx: &PlanningContext<'_>, v: f64) -> f64 {
    Scene::new(belief, ctx).gaps(v).fold(f64::INFINITY, f64::min)
}

/// Same answer as `clearance(..) >= 0.0`, stopping at the first violation.
pub fn is_admissible(belief: &BeliefState, ctx: &PlanningContext<'_>, v: f64) -> bool {
    Scene::new(belief, ctx).gaps(v).all(|g| g >= 0.0)
}

/// Largest admissible candidate, if any.
pub fn best_admissible(belief: &BeliefState, ctx: &PlanningContext<'_>) -> Option<f64> {
    let scene = Scene::new(belief, ctx);
    candidate_speeds(ctx.config.v_max, ctx.config.dv)
        .into_iter()
        .rev()
        .find(|&v| scene.gaps(v).all(|g| g >= 0.0))
}

/// Largest admissible candidate speed, or zero when none is admissible.
pub fn mpcs_decide(belief: &BeliefState, ctx: &PlanningContext<'_>) -> Setpoint {
    let command = best_admissible(belief, ctx).unwrap_or(0.0);
    Setpoint {
        path_speed_command: command,
        path_id: ctx.route.id.clone(),
    }
}
