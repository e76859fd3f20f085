//! Dynamic positioning: tracks the path-speed setpoint with a first-order
//! lag and keeps the vessel within a cross-track corridor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{Vec2, VesselState};
use super::sitaw::rng_for;

/// Straight crossing path between two waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub id: String,
    pub start: Vec2,
    pub end: Vec2,
}

impl Route {
    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    /// Maritime course from start to end.
    pub fn course(&self) -> f64 {
        (self.end - self.start).bearing()
    }

    fn tangent(&self) -> Vec2 {
        let d = self.end - self.start;
        d * (1.0 / d.norm())
    }

    /// Unit normal to starboard of the direction of travel.
    fn normal(&self) -> Vec2 {
        let t = self.tangent();
        Vec2::new(t.north, -t.east)
    }

    /// Point at along-track distance `s` (clamped to the route) and signed
    /// cross-track offset `cross`.
    pub fn point_at(&self, s: f64, cross: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        self.start + self.tangent() * s + self.normal() * cross
    }

    /// (along-track, cross-track) coordinates of `p`.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let d = p - self.start;
        (d.dot(self.tangent()), d.dot(self.normal()))
    }
}

/// Tracking accuracy of the DP component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingSpec {
    pub eps_pos: f64,
    pub eps_speed: f64,
    pub settle_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpParams {
    pub time_constant_s: f64,
    /// What the DP component achieves; cross-track error is held within
    /// `accuracy.eps_pos`.
    pub accuracy: TrackingSpec,
    /// Bound on the per-second speed disturbance (m/s^2).
    pub disturbance_speed_mps2: f64,
    /// Bound on the lateral drift rate (m/s).
    pub disturbance_cross_track_mps: f64,
}

/// Own-ship state in route coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathState {
    pub along_m: f64,
    pub cross_m: f64,
    pub speed: f64,
}

impl PathState {
    pub fn vessel_state(&self, route: &Route) -> VesselState {
        VesselState::new(route.point_at(self.along_m, self.cross_m), self.speed, route.course())
    }
}

/// One disturbance sample: speed perturbation (m/s^2) and lateral drift (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Disturbance {
    pub speed_mps2: f64,
    pub cross_track_mps: f64,
}

pub const DP_STREAM: u64 = u64::MAX;

/// Draw this tick's disturbance uniformly within its bounds.
pub fn draw_disturbance(p: &DpParams, seed: u64, tick: u64) -> Disturbance {
    let mut rng = rng_for(seed, tick, DP_STREAM);
    let mut sym = |b: f64| if b > 0.0 { rng.random_range(-b..=b) } else { 0.0 };
    Disturbance {
        speed_mps2: sym(p.disturbance_speed_mps2),
        cross_track_mps: sym(p.disturbance_cross_track_mps),
    }
}

/// Advance by `dt` under an explicit disturbance.
pub fn dp_step_with(
    state: &PathState,
    command: f64,
    p: &DpParams,
    route: &Route,
    dt: f64,
    w: Disturbance,
) -> PathState {
    let tau = p.time_constant_s;
    let speed = (state.speed + dt * (command - state.speed) / tau + w.speed_mps2 * dt).max(0.0);
    let eps = p.accuracy.eps_pos;
    let cross = (state.cross_m + w.cross_track_mps * dt).clamp(-eps, eps);
    let along = state.along_m + 0.5 * (state.speed + speed) * dt;
    let length = route.length();
    if along >= length {
        PathState {
            along_m: length,
            cross_m: cross,
            speed: 0.0,
        }
    } else {
        PathState {
            along_m: along,
            cross_m: cross,
            speed,
        }
    }
}

/// Advance by `dt` with the disturbance drawn from the scenario stream.
pub fn dp_step(
    state: &PathState,
    command: f64,
    p: &DpParams,
    route: &Route,
    dt: f64,
    seed: u64,
    tick: u64,
) -> PathState {
    dp_step_with(state, command, p, route, dt, draw_disturbance(p, seed, tick))
}
