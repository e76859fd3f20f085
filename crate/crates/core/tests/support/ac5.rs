//! Oracle checks shared by the core integration tests and the acceptance
//! runner. Each returns a one-line summary on success and the first
//! disagreement on failure.

#![allow(dead_code)]

use ada_core::contract::Signal;
use ada_core::fixtures::ferry_model;
use ada_core::sbt::{derive_parameter_space, ClauseMonitor, MonitorError, ParameterSpace};
use ada_core::sim::dp::{dp_step, dp_step_with, Disturbance, DpParams, PathState, Route, TrackingSpec};
use ada_core::sim::geometry::{predict_cpa, Vec2, VesselState};
use ada_core::sim::mpcs::{clearance, mpcs_decide, MpcsVariant, PlanningContext};
use ada_core::sim::sitaw::{perturb_state, sitaw_observe, NoiseMode, ObstacleEstimate, ObstacleTruth, SignalAccuracy};
use ada_core::sim::{run_scenario, BeliefState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracles::{self, angle_error};

pub type Check = Result<String, String>;

pub fn mpcs_space() -> ParameterSpace {
    derive_parameter_space(&ferry_model(), "MPCS").expect("ferry MPCS space")
}

fn random_state(rng: &mut ChaCha8Rng, extent: f64, v_max: f64) -> VesselState {
    VesselState::new(
        Vec2::new(rng.random_range(-extent..extent), rng.random_range(-extent..extent)),
        rng.random_range(0.0..v_max),
        rng.random_range(0.0..std::f64::consts::TAU),
    )
}

/// Closed-form CPA against a 1 ms time sweep.
pub fn check_cpa(pairs: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..pairs {
        let a = random_state(&mut rng, 1000.0, 6.0);
        let b = random_state(&mut rng, 1000.0, 6.0);
        let horizon = rng.random_range(1.0..300.0);
        let (t, d) = predict_cpa(&a, &b, horizon);
        let (_, d_ref) = oracles::cpa_brute(&a, &b, horizon, 1e-3);
        if !(0.0..=horizon).contains(&t) {
            return Err(format!("pair {i}: cpa time {t} outside [0, {horizon}]"));
        }
        let err = (d - d_ref).abs();
        if err > 1e-3 {
            return Err(format!("pair {i}: cpa distance {d} vs swept {d_ref}"));
        }
        worst = worst.max(err);
    }
    Ok(format!("{pairs} pairs, worst |d - d_sweep| = {worst:.2e} m"))
}

/// A belief near the crossing with 1 to 3 obstacles and accuracies drawn
/// below the ferry's declared values.
fn random_belief(rng: &mut ChaCha8Rng, route: &Route, base: &ada_core::sim::Accuracies) -> BeliefState {
    let s = rng.random_range(0.0..route.length());
    let own_pos = route.point_at(s, rng.random_range(-8.0..8.0));
    let own = VesselState::new(own_pos, rng.random_range(0.0..3.0), route.course());
    let n = rng.random_range(1..=3);
    let obstacles = (0..n)
        .map(|id| ObstacleEstimate {
            id,
            state: VesselState::new(
                oracles::polar(own_pos, rng.random_range(60.0..900.0), rng.random_range(0.0..std::f64::consts::TAU)),
                rng.random_range(0.0..6.0),
                rng.random_range(0.0..std::f64::consts::TAU),
            ),
            dimensions: [rng.random_range(10.0..60.0), rng.random_range(4.0..15.0)],
        })
        .collect();
    let mut declared = *base;
    for acc in [&mut declared.own, &mut declared.obstacle] {
        let k: f64 = rng.random_range(0.0..1.0);
        *acc = acc.scaled(k);
    }
    BeliefState {
        own,
        obstacles,
        declared,
    }
}

/// Planner choice against an exhaustive fine-grid search (dv/10, dt/10).
///
/// The fine lookahead grid contains every coarse sample, so the oracle can
/// only be more restrictive: its choice is never above the planner's. Where
/// it is strictly below, the candidates in between may only fail the fine
/// grid by less than the gap can move between two coarse samples.
pub fn check_mpcs(beliefs: usize, seed: u64) -> Check {
    let space = mpcs_space();
    let p = &space.base;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut equal, mut constrained) = (0, 0);
    for i in 0..beliefs {
        let belief = random_belief(&mut rng, &p.route, &p.accuracy);
        let mut cfg = p.mpcs_config();
        cfg.horizon_s = [60.0, 120.0, 300.0][rng.random_range(0..3)];
        cfg.variant = if rng.random_bool(0.25) {
            MpcsVariant::DropAccuracyMargins
        } else {
            MpcsVariant::Nominal
        };
        cfg.stop_after_s = rng.random_bool(0.5).then_some(p.controller.control_period_s);
        let ctx = PlanningContext {
            route: &p.route,
            own_dimensions: [p.own_length_m, p.own_beam_m],
            dp_accuracy: p.dp.accuracy,
            config: &cfg,
        };
        let chosen = mpcs_decide(&belief, &ctx).path_speed_command;
        let (oracle, gaps) = oracles::fine_grid_choice(&belief, &ctx);
        if chosen > 0.0 && clearance(&belief, &ctx, chosen) < 0.0 {
            return Err(format!("belief {i}: chosen speed {chosen} is not admissible on its own grid"));
        }
        if oracle > chosen + 1e-12 {
            return Err(format!("belief {i}: fine grid allows {oracle} but planner chose {chosen}"));
        }
        let dip = oracles::inter_sample_dip(&belief, &cfg);
        for &(v, g) in gaps.iter().filter(|(v, _)| *v > oracle && *v <= chosen + 1e-12) {
            if g < -dip {
                return Err(format!(
                    "belief {i}: candidate {v} fails the fine grid by {:.3} m, more than the {dip:.3} m sampling bound",
                    -g
                ));
            }
        }
        if oracle == chosen {
            equal += 1;
        }
        if chosen < cfg.v_max {
            constrained += 1;
        }
    }
    Ok(format!(
        "{beliefs} beliefs, {equal} identical choices, {constrained} below v_max, rest within the sampling bound"
    ))
}

/// Every formal clause of the ferry model monitored on random traces and
/// compared with a per-tick re-evaluation.
pub fn check_monitors(traces: usize, seed: u64) -> Check {
    let model = ferry_model();
    let idx = model.index();
    let monitors: Vec<ClauseMonitor> = idx
        .clauses()
        .filter(|c| !c.clause.is_informal())
        .map(|c| ClauseMonitor::from_clause(c.clause))
        .collect();
    let plain = mpcs_space();
    let maneuvering = plain.clone().with_maneuvers();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut compared, mut violated) = (0usize, 0usize);
    for i in 0..traces {
        let mut space = if rng.random_bool(0.3) { maneuvering.clone() } else { plain.clone() };
        if rng.random_bool(0.3) {
            space = space.with_noise(NoiseMode::Violating {
                scale: rng.random_range(1.5..3.0),
            });
        }
        if rng.random_bool(0.4) {
            space = space.with_variant(MpcsVariant::DropAccuracyMargins);
        }
        let unit: Vec<f64> = (0..space.dim()).map(|_| rng.random_range(0.0..1.0)).collect();
        let params = space.instantiate(&unit, format!("oracle-{i}"), rng.random());
        let trace = run_scenario(&params).map_err(|e| e.to_string())?;
        for m in &monitors {
            let got = m.evaluate(&trace);
            match (oracles::monitor_oracle(m, &trace), got) {
                (None, Err(MonitorError::SignalAbsent { .. })) => {}
                (Some(want), Ok(got)) => {
                    if !oracles::outcomes_match(&want, &got, 1e-6) {
                        return Err(format!("trace {i}, {}: monitor {got:?}, oracle {want:?}", m.clause_id));
                    }
                    compared += 1;
                    violated += usize::from(got.is_violated());
                }
                (want, got) => {
                    return Err(format!("trace {i}, {}: monitor {got:?}, oracle {want:?}", m.clause_id));
                }
            }
        }
    }
    Ok(format!(
        "{traces} traces x {} monitors, {compared} outcomes agree ({violated} violated)",
        monitors.len()
    ))
}

/// DP speed lag against the analytic first-order response, and cross-track
/// containment under worst-case disturbance.
pub fn check_dp() -> Check {
    let route = Route {
        id: "r".into(),
        start: Vec2::new(0.0, 0.0),
        end: Vec2::new(0.0, 1e6),
    };
    let tracking = TrackingSpec {
        eps_pos: 8.0,
        eps_speed: 0.15,
        settle_time: 10.0,
    };
    let tau = 2.0;
    let dt = 0.1;
    let p = DpParams {
        time_constant_s: tau,
        accuracy: tracking,
        disturbance_speed_mps2: 0.0,
        disturbance_cross_track_mps: 0.0,
    };
    let mut s = PathState {
        along_m: 0.0,
        cross_m: 0.0,
        speed: 0.0,
    };
    let mut worst_lag_err: f64 = 0.0;
    for k in 1..=100 {
        s = dp_step_with(&s, 2.0, &p, &route, dt, Disturbance::default());
        let t = k as f64 * dt;
        let analytic = 2.0 * (1.0 - (-t / tau).exp());
        worst_lag_err = worst_lag_err.max((s.speed - analytic).abs());
    }
    if worst_lag_err > 0.05 {
        return Err(format!("step response departs from 2(1 - exp(-t/tau)) by {worst_lag_err}"));
    }
    if (s.speed - 2.0).abs() > tracking.eps_speed {
        return Err(format!("speed {} after 5 tau is not within eps_speed of 2", s.speed));
    }
    let noisy = DpParams {
        disturbance_speed_mps2: 0.02,
        disturbance_cross_track_mps: 0.3,
        ..p
    };
    let mut worst_cross: f64 = 0.0;
    for seed in 0..20u64 {
        let mut s = PathState {
            along_m: 0.0,
            cross_m: 0.0,
            speed: 1.0,
        };
        for tick in 0..1000 {
            s = dp_step(&s, 2.0, &noisy, &route, dt, seed, tick);
            worst_cross = worst_cross.max(s.cross_m.abs());
        }
        // a steady push to one side must also stay inside
        let push = Disturbance {
            speed_mps2: 0.0,
            cross_track_mps: 0.3,
        };
        for _ in 0..1000 {
            s = dp_step_with(&s, 2.0, &noisy, &route, dt, push);
            worst_cross = worst_cross.max(s.cross_m.abs());
        }
    }
    if worst_cross > tracking.eps_pos + 1e-12 {
        return Err(format!("cross-track {worst_cross} exceeds eps_pos"));
    }
    Ok(format!(
        "step lag within {worst_lag_err:.3} of analytic, |v - 2| = {:.4} after 5 tau, max |cross| {worst_cross:.2} m",
        (s.speed - 2.0).abs()
    ))
}

fn errors(acc_truth: &VesselState, est: &VesselState) -> [(Signal, f64); 4] {
    let de = est.position.east - acc_truth.position.east;
    let dn = est.position.north - acc_truth.position.north;
    [
        (Signal::PositionM, (de * de + dn * dn).sqrt()),
        (Signal::SpeedMps, (est.speed - acc_truth.speed).abs()),
        (Signal::HeadingRad, angle_error(est.heading, acc_truth.heading)),
        (Signal::CourseRad, angle_error(est.course, acc_truth.course)),
    ]
}

fn bound(acc: &SignalAccuracy, s: Signal) -> f64 {
    match s {
        Signal::PositionM => acc.position_m,
        Signal::SpeedMps => acc.speed_mps,
        Signal::HeadingRad => acc.heading_rad,
        Signal::CourseRad => acc.course_rad,
        Signal::DimensionsM => acc.dimensions_m,
    }
}

/// Bounded noise never leaves the declared accuracy; scaled noise does.
pub fn check_sitaw(draws: usize, seed: u64) -> Check {
    let space = mpcs_space();
    let declared = space.base.accuracy;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..draws {
        let truth = random_state(&mut rng, 500.0, 5.0);
        let est = perturb_state(&truth, &declared.obstacle, &mut rng);
        for (s, e) in errors(&truth, &est) {
            let b = bound(&declared.obstacle, s);
            if e > b + 1e-9 {
                return Err(format!("bounded {s:?} error {e} exceeds declared {b}"));
            }
            if b > 0.0 {
                worst_ratio = worst_ratio.max(e / b);
            }
        }
    }
    let own = VesselState::new(Vec2::new(0.0, 0.0), 2.0, 0.0);
    let obstacles = [ObstacleTruth {
        state: VesselState::new(Vec2::new(300.0, 400.0), 3.0, 4.5),
        length_m: 40.0,
        beam_m: 8.0,
    }];
    let ticks = (draws / 10).max(100) as u64;
    let mut exceed = 0usize;
    let mut total = 0usize;
    for tick in 0..ticks {
        let b = sitaw_observe(&own, &obstacles, &declared, NoiseMode::Violating { scale: 3.0 }, seed, tick);
        let est = &b.obstacles[0];
        for (s, e) in errors(&obstacles[0].state, &est.state) {
            total += 1;
            exceed += usize::from(e > bound(&declared.obstacle, s) + 1e-9);
        }
    }
    if exceed == 0 {
        return Err("scale-3 noise never exceeded the declared accuracy".into());
    }
    Ok(format!(
        "{draws} bounded draws within declared (max ratio {worst_ratio:.4}); scale 3 exceeds in {exceed}/{total}"
    ))
}
