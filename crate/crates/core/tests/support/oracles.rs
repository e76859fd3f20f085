//! Brute-force reference implementations used by the integration and
//! acceptance tests. Everything here is written from the definitions, not
//! from the library code it checks.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use ada_core::contract::{PredicateSpec, Signal, Subject};
use ada_core::sbt::{ClauseMonitor, MonitorOutcome};
use ada_core::sim::geometry::{Vec2, VesselState};
use ada_core::sim::mpcs::{MpcsConfig, MpcsVariant, PlanningContext};
use ada_core::sim::scenario::{TickRecord, Trace};
use ada_core::sim::sitaw::{BeliefState, SignalAccuracy};
use ada_core::sim::TrackingSpec;

pub const SLACK_TOL: f64 = 1e-9;

/// East/north velocity from a maritime course (clockwise from north).
pub fn velocity(s: &VesselState) -> (f64, f64) {
    (s.speed * s.course.sin(), s.speed * s.course.cos())
}

/// Minimum distance over `[0, horizon]` sampled every `step` seconds.
pub fn cpa_brute(a: &VesselState, b: &VesselState, horizon: f64, step: f64) -> (f64, f64) {
    let (ave, avn) = velocity(a);
    let (bve, bvn) = velocity(b);
    let n = (horizon / step).ceil() as usize;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..=n {
        let t = (i as f64 * step).min(horizon);
        let de = (b.position.east + bve * t) - (a.position.east + ave * t);
        let dn = (b.position.north + bvn * t) - (a.position.north + avn * t);
        let d = (de * de + dn * dn).sqrt();
        if d < best.1 {
            best = (t, d);
        }
    }
    best
}

pub fn angle_error(a: f64, b: f64) -> f64 {
    ((a - b + PI).rem_euclid(TAU) - PI).abs()
}

fn half_diag(l: f64, b: f64) -> f64 {
    0.5 * (l * l + b * b).sqrt()
}

/// Smallest (distance - required distance) of one speed profile, sampled
/// every `dt` over the horizon; `hold` stops the ferry after that long.
pub fn gap_for_profile(belief: &BeliefState, ctx: &PlanningContext<'_>, v: f64, dt: f64, hold: Option<f64>) -> f64 {
    let cfg = ctx.config;
    let route = ctx.route;
    let (re, rn) = (route.end.east - route.start.east, route.end.north - route.start.north);
    let len = (re * re + rn * rn).sqrt();
    let (ue, un) = (re / len, rn / len);
    let s0 = (belief.own.position.east - route.start.east) * ue + (belief.own.position.north - route.start.north) * un;
    let own_he = half_diag(ctx.own_dimensions[0], ctx.own_dimensions[1]);
    let steps = (cfg.horizon_s / dt + 1e-9).floor() as usize;
    let mut worst = f64::INFINITY;
    for j in 0..=steps {
        let t = j as f64 * dt;
        let moved = match hold {
            Some(h) => v * t.min(h),
            None => v * t,
        };
        let s = (s0 + moved).clamp(0.0, len);
        let (oe, on) = (route.start.east + ue * s, route.start.north + un * s);
        for o in &belief.obstacles {
            let (ve, vn) = velocity(&o.state);
            let (pe, pn) = (o.state.position.east + ve * t, o.state.position.north + vn * t);
            let dist = ((pe - oe).powi(2) + (pn - on).powi(2)).sqrt();
            let req = match cfg.variant {
                MpcsVariant::DropAccuracyMargins => cfg.d_min + own_he + half_diag(o.dimensions[0], o.dimensions[1]),
                MpcsVariant::Nominal => {
                    let own = &belief.declared.own;
                    let obs = &belief.declared.obstacle;
                    let vel_err = obs.speed_mps + (o.state.speed + obs.speed_mps) * obs.course_rad;
                    cfg.d_min
                        + own.position_m
                        + obs.position_m
                        + ctx.dp_accuracy.eps_pos
                        + (own.speed_mps + vel_err) * t
                        + own_he
                        + half_diag(o.dimensions[0] + obs.dimensions_m, o.dimensions[1] + obs.dimensions_m)
                }
            };
            worst = worst.min(dist - req);
        }
    }
    worst
}

/// Smallest gap over every profile the configuration checks.
pub fn gap(belief: &BeliefState, ctx: &PlanningContext<'_>, v: f64, dt: f64) -> f64 {
    let mut g = gap_for_profile(belief, ctx, v, dt, None);
    if let Some(h) = ctx.config.stop_after_s {
        g = g.min(gap_for_profile(belief, ctx, v, dt, Some(h)));
    }
    g
}

/// Speeds k*step for k = 0.. while <= v_max (plus v_max itself).
pub fn speed_grid(v_max: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let v = k as f64 * step;
        if v > v_max + 1e-9 {
            break;
        }
        out.push(v.min(v_max));
        k += 1;
    }
    if out.last().is_some_and(|&v| v < v_max - 1e-9) {
        out.push(v_max);
    }
    out
}

/// Exhaustive choice on the fine grid (speeds every dv/10, lookahead every
/// dt/10), restricted to multiples of dv so it is comparable with the
/// planner's candidate set. Returns the choice and the fine gap of each
/// dv-multiple candidate.
pub fn fine_grid_choice(belief: &BeliefState, ctx: &PlanningContext<'_>) -> (f64, Vec<(f64, f64)>) {
    let cfg = ctx.config;
    let fine_dt = cfg.lookahead_dt / 10.0;
    let fine: Vec<f64> = speed_grid(cfg.v_max, cfg.dv / 10.0);
    let mut gaps = Vec::new();
    for (i, &v) in fine.iter().enumerate() {
        let on_coarse = i % 10 == 0 || (v - cfg.v_max).abs() < 1e-9;
        if on_coarse {
            gaps.push((v, gap(belief, ctx, v, fine_dt)));
        }
    }
    let choice = gaps
        .iter()
        .rev()
        .find(|(_, g)| *g >= 0.0)
        .map_or(0.0, |(v, _)| *v);
    (choice, gaps)
}

/// Upper bound on how far the gap can dip between two lookahead samples
/// `dt` apart.
pub fn inter_sample_dip(belief: &BeliefState, cfg: &MpcsConfig) -> f64 {
    let max_obs = belief.obstacles.iter().map(|o| o.state.speed).fold(0.0, f64::max);
    let d = &belief.declared;
    let slope = d.own.speed_mps + d.obstacle.speed_mps + (max_obs + d.obstacle.speed_mps) * d.obstacle.course_rad;
    (cfg.v_max + max_obs + slope) * cfg.lookahead_dt / 2.0
}

// ---- monitor oracle ----------------------------------------------------

struct Tally {
    worst: Option<f64>,
    first: Option<u64>,
}

impl Tally {
    fn new() -> Self {
        Tally { worst: None, first: None }
    }

    fn add(&mut self, tick: u64, value: f64) {
        self.worst = Some(match self.worst {
            Some(w) if w <= value => w,
            _ => value,
        });
        if value < -SLACK_TOL && self.first.map_or(true, |f| tick < f) {
            self.first = Some(tick);
        }
    }

    fn outcome(&self) -> MonitorOutcome {
        match (self.worst, self.first) {
            (None, _) => MonitorOutcome::NotApplicable,
            (Some(w), Some(f)) => MonitorOutcome::Violated {
                first_tick: f,
                worst_value: w,
            },
            (Some(_), None) => MonitorOutcome::Held,
        }
    }
}

fn declared_value(acc: &SignalAccuracy, s: Signal) -> f64 {
    match s {
        Signal::PositionM => acc.position_m,
        Signal::SpeedMps => acc.speed_mps,
        Signal::HeadingRad => acc.heading_rad,
        Signal::CourseRad => acc.course_rad,
        Signal::DimensionsM => acc.dimensions_m,
    }
}

fn signal_error(s: Signal, truth: &VesselState, est: &VesselState) -> f64 {
    match s {
        Signal::PositionM => {
            let de = est.position.east - truth.position.east;
            let dn = est.position.north - truth.position.north;
            (de * de + dn * dn).sqrt()
        }
        Signal::SpeedMps => (est.speed - truth.speed).abs(),
        Signal::HeadingRad => angle_error(est.heading, truth.heading),
        Signal::CourseRad => angle_error(est.course, truth.course),
        Signal::DimensionsM => unreachable!(),
    }
}

fn own_gap_planner(r: &TickRecord, trace: &Trace, cfg: &MpcsConfig, tracking: TrackingSpec, v: f64) -> f64 {
    let belief = r.belief(&trace.params.accuracy);
    let ctx = PlanningContext {
        route: &trace.params.route,
        own_dimensions: [trace.params.own_length_m, trace.params.own_beam_m],
        dp_accuracy: tracking,
        config: cfg,
    };
    gap(&belief, &ctx, v, cfg.lookahead_dt)
}

/// Per-tick re-evaluation of one monitor's predicates. `None` when the
/// predicate needs a signal the trace does not carry.
pub fn monitor_oracle(m: &ClauseMonitor, trace: &Trace) -> Option<MonitorOutcome> {
    let p = &trace.params;
    let mut tally = Tally::new();
    for pred in &m.predicates {
        match pred {
            PredicateSpec::StateErrorBound {
                signal,
                subject,
                epsilon,
            } => {
                let decl = match subject {
                    Subject::Own => {
                        if *signal == Signal::DimensionsM {
                            return None;
                        }
                        declared_value(&p.accuracy.own, *signal)
                    }
                    Subject::Obstacle => declared_value(&p.accuracy.obstacle, *signal),
                };
                for r in &trace.ticks {
                    let errors: Vec<f64> = match subject {
                        Subject::Own => vec![signal_error(*signal, &r.own, &r.own_est)],
                        Subject::Obstacle => r
                            .obstacles
                            .iter()
                            .map(|o| {
                                if *signal == Signal::DimensionsM {
                                    let dl = (o.est_dimensions[0] - o.dimensions[0]).abs();
                                    let db = (o.est_dimensions[1] - o.dimensions[1]).abs();
                                    dl.max(db)
                                } else {
                                    signal_error(*signal, &o.truth, &o.estimate)
                                }
                            })
                            .collect(),
                    };
                    for e in errors {
                        tally.add(r.tick, (decl - e).min(epsilon - decl));
                    }
                }
            }
            PredicateSpec::SeparationBound { d_min } => {
                let own_he = half_diag(p.own_length_m, p.own_beam_m);
                for r in &trace.ticks {
                    for o in &r.obstacles {
                        let de = o.truth.position.east - r.own.position.east;
                        let dn = o.truth.position.north - r.own.position.north;
                        let sep = ((de * de + dn * dn).sqrt() - own_he - half_diag(o.dimensions[0], o.dimensions[1])).max(0.0);
                        tally.add(r.tick, sep - d_min);
                    }
                }
            }
            PredicateSpec::TrackingBound {
                eps_pos,
                eps_speed,
                settle_time,
            } => {
                let route = &p.route;
                let (re, rn) = (route.end.east - route.start.east, route.end.north - route.start.north);
                let len = (re * re + rn * rn).sqrt();
                for (k, r) in trace.ticks.iter().enumerate() {
                    let (de, dn) = (r.own.position.east - route.start.east, r.own.position.north - route.start.north);
                    let cross = (de * rn - dn * re) / len;
                    tally.add(r.tick, eps_pos - cross.abs());
                    if k == 0 {
                        continue;
                    }
                    let cmd = trace.ticks[k - 1].command_mps;
                    let mut j = k - 1;
                    while j > 0 && trace.ticks[j - 1].command_mps == cmd {
                        j -= 1;
                    }
                    if r.t - trace.ticks[j].t >= settle_time - 1e-9 {
                        tally.add(r.tick, eps_speed - (r.own.speed - cmd).abs());
                    }
                }
            }
            PredicateSpec::ConfigValid { route_id, d_min } => {
                let first = trace.ticks.first().map_or(0, |r| r.tick);
                let ok = p.route.id == *route_id;
                tally.add(first, if ok { p.d_min - d_min } else { -1.0 });
            }
            PredicateSpec::SafeSetpointRule { horizon_s } => {
                let mut cfg = p.mpcs_config();
                cfg.variant = MpcsVariant::Nominal;
                cfg.horizon_s = *horizon_s;
                let tracking = p.dp.accuracy;
                for r in trace.ticks.iter().filter(|r| r.decided) {
                    let cmd = r.command_mps;
                    let g = own_gap_planner(r, trace, &cfg, tracking, cmd);
                    let value = if g >= 0.0 {
                        if g.is_finite() {
                            g
                        } else {
                            0.0
                        }
                    } else {
                        let any = speed_grid(cfg.v_max, cfg.dv)
                            .into_iter()
                            .any(|v| own_gap_planner(r, trace, &cfg, tracking, v) >= 0.0);
                        if !any && cmd == 0.0 {
                            0.0
                        } else {
                            g
                        }
                    };
                    tally.add(r.tick, value);
                }
            }
            PredicateSpec::ObstacleBehaviour {
                max_speed,
                max_turn_rate,
                ..
            } => {
                for (k, r) in trace.ticks.iter().enumerate() {
                    for (i, o) in r.obstacles.iter().enumerate() {
                        tally.add(r.tick, max_speed - o.truth.speed);
                        if k > 0 {
                            let q = &trace.ticks[k - 1].obstacles[i];
                            let rate = angle_error(o.truth.course, q.truth.course) / p.dt_s;
                            tally.add(r.tick, max_turn_rate - rate);
                            tally.add(r.tick, -(o.truth.speed - q.truth.speed).abs());
                        }
                    }
                }
            }
        }
    }
    Some(tally.outcome())
}

/// Outcomes agree: same class, same first tick, worst values within `tol`.
pub fn outcomes_match(a: &MonitorOutcome, b: &MonitorOutcome, tol: f64) -> bool {
    match (a, b) {
        (MonitorOutcome::Held, MonitorOutcome::Held) => true,
        (MonitorOutcome::NotApplicable, MonitorOutcome::NotApplicable) => true,
        (
            MonitorOutcome::Violated {
                first_tick: fa,
                worst_value: wa,
            },
            MonitorOutcome::Violated {
                first_tick: fb,
                worst_value: wb,
            },
        ) => fa == fb && (wa - wb).abs() <= tol * (1.0 + wa.abs()),
        _ => false,
    }
}

/// A point in the plane `range` metres from `origin` on maritime `bearing`.
pub fn polar(origin: Vec2, range: f64, bearing: f64) -> Vec2 {
    Vec2::new(origin.east + range * bearing.sin(), origin.north + range * bearing.cos())
}
