//! Property checks run through an explicit proptest runner so the same
//! definitions serve the integration tests and the acceptance runner.

#![allow(dead_code)]

use ada_core::contract::{entails, Clause, ClauseKind, ObstacleModel, PredicateSpec, Signal, Subject};
use ada_core::sbt::lhs_unit;
use ada_core::sim::geometry::{Vec2, VesselState};
use ada_core::sim::mpcs::{mpcs_decide, PlanningContext};
use ada_core::sim::sitaw::{Accuracies, BeliefState, ObstacleEstimate, SignalAccuracy};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use super::ac5::{mpcs_space, Check};

fn signal() -> impl Strategy<Value = Signal> {
    prop_oneof![
        Just(Signal::PositionM),
        Just(Signal::SpeedMps),
        Just(Signal::HeadingRad),
        Just(Signal::CourseRad),
        Just(Signal::DimensionsM),
    ]
}

fn subject() -> impl Strategy<Value = Subject> {
    prop_oneof![Just(Subject::Own), Just(Subject::Obstacle)]
}

/// Bounds come from a small set so that random pairs often share a key
/// and are comparable.
fn level() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(2.0), Just(3.0), 0.5f64..4.0]
}

fn predicate() -> impl Strategy<Value = PredicateSpec> {
    prop_oneof![
        (signal(), subject(), level()).prop_map(|(signal, subject, epsilon)| PredicateSpec::StateErrorBound {
            signal,
            subject,
            epsilon
        }),
        level().prop_map(|d| PredicateSpec::SeparationBound { d_min: 10.0 * d }),
        (level(), level(), level()).prop_map(|(p, s, t)| PredicateSpec::TrackingBound {
            eps_pos: p,
            eps_speed: s / 10.0,
            settle_time: 5.0 * t
        }),
        (prop_oneof![Just("r1"), Just("r2")], level()).prop_map(|(r, d)| PredicateSpec::ConfigValid {
            route_id: r.into(),
            d_min: 10.0 * d
        }),
        level().prop_map(|h| PredicateSpec::SafeSetpointRule { horizon_s: 30.0 * h }),
        (level(), level()).prop_map(|(s, r)| PredicateSpec::ObstacleBehaviour {
            model: ObstacleModel::ConstantVelocity,
            max_speed: s,
            max_turn_rate: r / 100.0
        }),
    ]
}

fn conjunction() -> impl Strategy<Value = Vec<PredicateSpec>> {
    prop::collection::vec(predicate(), 1..=3)
}

/// Scale every bound by `k`: stronger for `k` in [0, 1], weaker above one.
fn tighten(p: &PredicateSpec, k: f64) -> PredicateSpec {
    use PredicateSpec::*;
    match p.clone() {
        StateErrorBound {
            signal,
            subject,
            epsilon,
        } => StateErrorBound {
            signal,
            subject,
            epsilon: epsilon * k,
        },
        SeparationBound { d_min } => SeparationBound { d_min: d_min / k.max(1e-3) },
        TrackingBound {
            eps_pos,
            eps_speed,
            settle_time,
        } => TrackingBound {
            eps_pos: eps_pos * k,
            eps_speed: eps_speed * k,
            settle_time: settle_time * k,
        },
        ConfigValid { route_id, d_min } => ConfigValid {
            route_id,
            d_min: d_min / k.max(1e-3),
        },
        SafeSetpointRule { horizon_s } => SafeSetpointRule {
            horizon_s: horizon_s / k.max(1e-3),
        },
        ObstacleBehaviour {
            model,
            max_speed,
            max_turn_rate,
        } => ObstacleBehaviour {
            model,
            max_speed: max_speed * k,
            max_turn_rate: max_turn_rate * k,
        },
    }
}

fn guarantee(ps: &[PredicateSpec]) -> Clause {
    let mut c = Clause::new("P.G1", ClauseKind::Guarantee, "provider");
    c.predicates = ps.to_vec();
    c
}

fn assumption(ps: &[PredicateSpec]) -> Clause {
    let mut c = Clause::new("C.A1", ClauseKind::Assumption, "consumer");
    c.predicates = ps.to_vec();
    c
}

fn holds(p: &[PredicateSpec], c: &[PredicateSpec]) -> bool {
    entails(&guarantee(p), &assumption(c)).expect("kinds are right")
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// Reflexivity, transitivity and monotonicity of entailment.
pub fn check_entailment_laws(cases: u32) -> Check {
    run(cases, conjunction(), |p| {
        prop_assert!(holds(&p, &p));
        Ok(())
    })
    .map_err(|e| format!("reflexivity: {e}"))?;

    run(cases, (conjunction(), conjunction(), conjunction()), |(a, b, c)| {
        if holds(&a, &b) && holds(&b, &c) {
            prop_assert!(holds(&a, &c));
        }
        Ok(())
    })
    .map_err(|e| format!("transitivity (random): {e}"))?;

    run(cases, (conjunction(), 0.0f64..=1.0, 0.0f64..=1.0), |(c, k1, k2)| {
        let b: Vec<_> = c.iter().map(|p| tighten(p, k1)).collect();
        let a: Vec<_> = b.iter().map(|p| tighten(p, k2)).collect();
        prop_assert!(holds(&b, &c) && holds(&a, &b) && holds(&a, &c));
        Ok(())
    })
    .map_err(|e| format!("transitivity (chained): {e}"))?;

    run(
        cases,
        (conjunction(), conjunction(), 0.0f64..=1.0, 0.0f64..=1.0),
        |(p, c, k, extra)| {
            if holds(&p, &c) {
                let stronger: Vec<_> = p.iter().map(|x| tighten(x, k)).collect();
                prop_assert!(holds(&stronger, &c), "tightening the provider lost entailment");
                // factor above one relaxes every bound: a weaker consumer
                let weaker: Vec<_> = c.iter().map(|x| tighten(x, 1.0 + extra)).collect();
                prop_assert!(holds(&p, &weaker), "relaxing the consumer lost entailment");
                let mut more = p.clone();
                more.extend(c.iter().cloned());
                prop_assert!(holds(&more, &c), "adding provider conjuncts lost entailment");
            }
            Ok(())
        },
    )
    .map_err(|e| format!("monotonicity: {e}"))?;

    Ok(format!("reflexivity, transitivity and monotonicity hold over {cases} cases each"))
}

fn accuracy(max: &SignalAccuracy) -> impl Strategy<Value = SignalAccuracy> {
    let m = *max;
    (0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64).prop_map(move |(a, b, c, d, e)| {
        SignalAccuracy {
            position_m: m.position_m * a,
            speed_mps: m.speed_mps * b,
            heading_rad: m.heading_rad * c,
            course_rad: m.course_rad * d,
            dimensions_m: m.dimensions_m * e,
        }
    })
}

fn obstacle() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (60.0f64..900.0, 0.0f64..std::f64::consts::TAU, 0.0f64..6.0, 0.0f64..std::f64::consts::TAU)
}

/// Shrinking any declared accuracy never lowers the planner's speed.
pub fn check_mpcs_monotone_in_accuracy(cases: u32) -> Check {
    let space = mpcs_space();
    let p = space.base.clone();
    let cfg = p.mpcs_config();
    let ctx = PlanningContext {
        route: &p.route,
        own_dimensions: [p.own_length_m, p.own_beam_m],
        dp_accuracy: p.dp.accuracy,
        config: &cfg,
    };
    let declared = p.accuracy;
    let strategy = (
        0.0f64..2000.0,
        0.0f64..3.0,
        prop::collection::vec(obstacle(), 1..=2),
        accuracy(&declared.own),
        accuracy(&declared.obstacle),
        0.0f64..=1.0,
    );
    let constrained = std::cell::Cell::new(0u32);
    run(cases, strategy, |(s, v, obs, own_acc, obs_acc, k)| {
        let own_pos = p.route.point_at(s, 0.0);
        let obstacles = obs
            .iter()
            .enumerate()
            .map(|(id, &(r, b, speed, course))| ObstacleEstimate {
                id,
                state: VesselState::new(
                    Vec2::new(own_pos.east + r * b.sin(), own_pos.north + r * b.cos()),
                    speed,
                    course,
                ),
                dimensions: [40.0, 8.0],
            })
            .collect::<Vec<_>>();
        let loose = Accuracies {
            own: own_acc,
            obstacle: obs_acc,
        };
        let tight = Accuracies {
            own: own_acc.scaled(k),
            obstacle: obs_acc.scaled(k),
        };
        let belief = |declared| BeliefState {
            own: VesselState::new(own_pos, v, p.route.course()),
            obstacles: obstacles.clone(),
            declared,
        };
        let v_loose = mpcs_decide(&belief(loose), &ctx).path_speed_command;
        let v_tight = mpcs_decide(&belief(tight), &ctx).path_speed_command;
        prop_assert!(v_tight >= v_loose, "tighter accuracy chose {v_tight} < {v_loose}");
        if v_loose < cfg.v_max {
            constrained.set(constrained.get() + 1);
        }
        Ok(())
    })
    .map_err(|e| format!("planner monotonicity: {e}"))?;
    Ok(format!(
        "{cases} cases, speed never drops when accuracies tighten ({} constrained)",
        constrained.get()
    ))
}

/// Every dimension of an LHS design hits each of its n strata exactly once.
pub fn check_lhs_stratification(cases: u32) -> Check {
    run(cases, (1usize..200, 1usize..8, any::<u64>()), |(n, d, seed)| {
        let pts = lhs_unit(n, d, seed);
        prop_assert_eq!(pts.len(), n);
        for j in 0..d {
            let mut hit = vec![false; n];
            for p in &pts {
                prop_assert!((0.0..1.0).contains(&p[j]));
                let s = (p[j] * n as f64).floor() as usize;
                prop_assert!(!hit[s], "stratum {} of dimension {} hit twice", s, j);
                hit[s] = true;
            }
        }
        Ok(())
    })?;
    Ok(format!("{cases} random designs fill every stratum once per dimension"))
}
