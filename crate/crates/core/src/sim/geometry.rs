//! Planar kinematics in an east/north frame with maritime angles: course and
//! heading are measured clockwise from north, so a course `c` at speed `v`
//! moves the vessel by `(v sin c, v cos c)` per second.

use std::f64::consts::TAU;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// (east, north) in metres, serialized as `[east, north]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub east: f64,
    pub north: f64,
}

impl From<[f64; 2]> for Vec2 {
    fn from(v: [f64; 2]) -> Self {
        Vec2::new(v[0], v[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.east, v.north]
    }
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { east: 0.0, north: 0.0 };

    pub fn new(east: f64, north: f64) -> Self {
        Self { east, north }
    }

    /// Unit vector along a maritime angle.
    pub fn from_bearing(angle: f64) -> Self {
        Vec2::new(angle.sin(), angle.cos())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.east * o.east + self.north * o.north
    }

    pub fn norm(self) -> f64 {
        self.east.hypot(self.north)
    }

    /// Maritime angle of this vector in [0, 2π).
    pub fn bearing(self) -> f64 {
        wrap_angle(self.east.atan2(self.north))
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.east + o.east, self.north + o.north)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.east - o.east, self.north - o.north)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.east * k, self.north * k)
    }
}

/// Wrap an angle into [0, 2π).
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Smallest signed difference `a - b` in (-π, π].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    if d > std::f64::consts::PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VesselState {
    pub position: Vec2,
    pub speed: f64,
    pub heading: f64,
    pub course: f64,
}

impl VesselState {
    pub fn new(position: Vec2, speed: f64, course: f64) -> Self {
        Self {
            position,
            speed,
            heading: wrap_angle(course),
            course: wrap_angle(course),
        }
    }

    /// Velocity over ground.
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_bearing(self.course) * self.speed
    }

    /// Constant-velocity extrapolation `t` seconds ahead.
    pub fn extrapolate(&self, t: f64) -> Vec2 {
        self.position + self.velocity() * t
    }
}

/// Time and distance of closest approach of two constant-velocity
/// extrapolations within `[0, horizon_s]`.
pub fn predict_cpa(a: &VesselState, b: &VesselState, horizon_s: f64) -> (f64, f64) {
    let dp = b.position - a.position;
    let dv = b.velocity() - a.velocity();
    let vv = dv.dot(dv);
    let t = if vv <= f64::EPSILON {
        0.0
    } else {
        (-dp.dot(dv) / vv).clamp(0.0, horizon_s.max(0.0))
    };
    let d = (dp + dv * t).norm();
    (t, d.max(0.0))
}

/// Half-diagonal of a length x beam rectangle, used as its circular extent.
pub fn half_extent(length: f64, beam: f64) -> f64 {
    0.5 * length.hypot(beam)
}

/// Edge-to-edge separation of two vessels modelled as circles of their
/// half-diagonals, clamped at zero.
pub fn separation(a: Vec2, a_half_extent: f64, b: Vec2, b_half_extent: f64) -> f64 {
    ((b - a).norm() - a_half_extent - b_half_extent).max(0.0)
}
