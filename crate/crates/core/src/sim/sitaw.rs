//! Situational awareness: turns true states into estimates with bounded
//! (or deliberately unbounded) error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{wrap_angle, Vec2, VesselState};

/// Per-signal accuracy of one subject class.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SignalAccuracy {
    pub position_m: f64,
    pub speed_mps: f64,
    pub heading_rad: f64,
    pub course_rad: f64,
    pub dimensions_m: f64,
}

impl SignalAccuracy {
    pub fn values(&self) -> [(&'static str, f64); 5] {
        [
            ("position_m", self.position_m),
            ("speed_mps", self.speed_mps),
            ("heading_rad", self.heading_rad),
            ("course_rad", self.course_rad),
            ("dimensions_m", self.dimensions_m),
        ]
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            position_m: self.position_m * k,
            speed_mps: self.speed_mps * k,
            heading_rad: self.heading_rad * k,
            course_rad: self.course_rad * k,
            dimensions_m: self.dimensions_m * k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Accuracies {
    pub own: SignalAccuracy,
    pub obstacle: SignalAccuracy,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseMode {
    /// Errors uniform within the declared accuracy.
    #[default]
    Bounded,
    /// Errors uniform within `scale` times the declared accuracy.
    Violating { scale: f64 },
}

impl NoiseMode {
    fn factor(self) -> f64 {
        match self {
            NoiseMode::Bounded => 1.0,
            NoiseMode::Violating { scale } => scale,
        }
    }
}

/// True state of one obstacle as seen by the sensor model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleTruth {
    pub state: VesselState,
    pub length_m: f64,
    pub beam_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleEstimate {
    pub id: usize,
    pub state: VesselState,
    /// Estimated (length, beam).
    pub dimensions: [f64; 2],
}

impl ObstacleEstimate {
    /// Constant-velocity prediction `t` seconds ahead.
    pub fn predict(&self, t: f64) -> Vec2 {
        self.state.extrapolate(t)
    }
}

/// What the decision component sees at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub own: VesselState,
    pub obstacles: Vec<ObstacleEstimate>,
    /// Accuracies the SITAW component declares for these estimates.
    pub declared: Accuracies,
}

/// Derive an independent RNG seed for one (tick, stream) pair.
pub fn stream_seed(seed: u64, tick: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over a mixed key
    let mut z = seed
        ^ tick.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub const OWN_STREAM: u64 = 0;

pub fn obstacle_stream(id: usize) -> u64 {
    1 + id as u64
}

pub fn rng_for(seed: u64, tick: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, tick, stream))
}

fn sym<R: Rng>(rng: &mut R, eps: f64) -> f64 {
    if eps > 0.0 {
        rng.random_range(-eps..=eps)
    } else {
        0.0
    }
}

fn disk<R: Rng>(rng: &mut R, radius: f64) -> Vec2 {
    if radius <= 0.0 {
        return Vec2::ZERO;
    }
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random_range(0.0..std::f64::consts::TAU);
    Vec2::new(r * a.sin(), r * a.cos())
}

/// Perturb one vessel state. Position error is uniform over a disk of radius
/// `acc.position_m`; speed, heading and course errors are uniform on
/// symmetric intervals.
pub fn perturb_state<R: Rng>(truth: &VesselState, acc: &SignalAccuracy, rng: &mut R) -> VesselState {
    VesselState {
        position: truth.position + disk(rng, acc.position_m),
        speed: (truth.speed + sym(rng, acc.speed_mps)).max(0.0),
        heading: wrap_angle(truth.heading + sym(rng, acc.heading_rad)),
        course: wrap_angle(truth.course + sym(rng, acc.course_rad)),
    }
}

/// Estimate own ship and every obstacle at `tick`. Each object draws from its
/// own stream so adding an obstacle never changes another object's noise.
pub fn sitaw_observe(
    own: &VesselState,
    obstacles: &[ObstacleTruth],
    declared: &Accuracies,
    noise: NoiseMode,
    seed: u64,
    tick: u64,
) -> BeliefState {
    let k = noise.factor();
    let own_acc = declared.own.scaled(k);
    let obs_acc = declared.obstacle.scaled(k);
    let mut rng = rng_for(seed, tick, OWN_STREAM);
    let own_est = perturb_state(own, &own_acc, &mut rng);
    let obstacles = obstacles
        .iter()
        .enumerate()
        .map(|(id, o)| {
            let mut rng = rng_for(seed, tick, obstacle_stream(id));
            let state = perturb_state(&o.state, &obs_acc, &mut rng);
            let length = (o.length_m + sym(&mut rng, obs_acc.dimensions_m)).max(0.0);
            let beam = (o.beam_m + sym(&mut rng, obs_acc.dimensions_m)).max(0.0);
            ObstacleEstimate {
                id,
                state,
                dimensions: [length, beam],
            }
        })
        .collect();
    BeliefState {
        own: own_est,
        obstacles,
        declared: *declared,
    }
}
