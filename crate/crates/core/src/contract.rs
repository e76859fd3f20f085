//! Assume-guarantee contract template and the clause predicate vocabulary.
//!
//! A [`Contract`] carries the six template fields: responsibility, function,
//! inputs, outputs, assumptions and guarantees. Clauses are prose plus an
//! optional machine-checkable predicate. The predicate vocabulary is closed
//! ([`PredicateSpec`]) so that entailment between clauses is decidable: two
//! predicates are comparable only when they have the same variant and key,
//! and then the provider must be no looser than the consumer.
//!
//! A clause may carry several predicates; they are read as a conjunction.
//! A clause with no predicate is informal and can only be discharged by an
//! explicit dependency link.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::finding::{Finding, Rule};
use crate::model::ComponentKind;

pub type ClauseId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseKind {
    Assumption,
    Guarantee,
}

impl ClauseKind {
    /// The letter that prefixes the clause index in a clause id ("MPCS.A2").
    pub fn letter(self) -> char {
        match self {
            ClauseKind::Assumption => 'A',
            ClauseKind::Guarantee => 'G',
        }
    }
}

impl fmt::Display for ClauseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClauseKind::Assumption => f.write_str("assumption"),
            ClauseKind::Guarantee => f.write_str("guarantee"),
        }
    }
}

/// Vessel state signal bounded by a [`PredicateSpec::StateErrorBound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    PositionM,
    SpeedMps,
    HeadingRad,
    CourseRad,
    DimensionsM,
}

impl Signal {
    pub const ALL: [Signal; 5] = [
        Signal::PositionM,
        Signal::SpeedMps,
        Signal::HeadingRad,
        Signal::CourseRad,
        Signal::DimensionsM,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Signal::PositionM => "position_m",
            Signal::SpeedMps => "speed_mps",
            Signal::HeadingRad => "heading_rad",
            Signal::CourseRad => "course_rad",
            Signal::DimensionsM => "dimensions_m",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            Signal::PositionM | Signal::DimensionsM => "m",
            Signal::SpeedMps => "m/s",
            Signal::HeadingRad | Signal::CourseRad => "rad",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Own,
    Obstacle,
}

impl Subject {
    pub fn name(self) -> &'static str {
        match self {
            Subject::Own => "own",
            Subject::Obstacle => "obstacle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleModel {
    ConstantVelocity,
}

/// Machine-checkable clause predicate. Serialized as a tagged object
/// `{"variant": "state_error_bound", ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PredicateSpec {
    /// |estimate - truth| <= epsilon for one signal of one subject class.
    StateErrorBound {
        signal: Signal,
        subject: Subject,
        epsilon: f64,
    },
    /// True separation to every obstacle stays at or above `d_min`.
    SeparationBound { d_min: f64 },
    /// Cross-track error within `eps_pos`; speed within `eps_speed` of the
    /// command once the command has been constant for `settle_time`.
    TrackingBound {
        eps_pos: f64,
        eps_speed: f64,
        settle_time: f64,
    },
    /// The component is configured with route `route_id` and a minimum
    /// separation of at least `d_min`.
    ConfigValid { route_id: String, d_min: f64 },
    /// Every issued setpoint is admissible over `horizon_s` under the
    /// accuracy-inflated required distance.
    SafeSetpointRule { horizon_s: f64 },
    /// Obstacles follow `model` with bounded speed and turn rate.
    ObstacleBehaviour {
        model: ObstacleModel,
        max_speed: f64,
        max_turn_rate: f64,
    },
}

impl PredicateSpec {
    pub fn variant_name(&self) -> &'static str {
        match self {
            PredicateSpec::StateErrorBound { .. } => "state_error_bound",
            PredicateSpec::SeparationBound { .. } => "separation_bound",
            PredicateSpec::TrackingBound { .. } => "tracking_bound",
            PredicateSpec::ConfigValid { .. } => "config_valid",
            PredicateSpec::SafeSetpointRule { .. } => "safe_setpoint_rule",
            PredicateSpec::ObstacleBehaviour { .. } => "obstacle_behaviour",
        }
    }

    fn numbers(&self) -> Vec<(&'static str, f64)> {
        match self {
            PredicateSpec::StateErrorBound { epsilon, .. } => vec![("epsilon", *epsilon)],
            PredicateSpec::SeparationBound { d_min } => vec![("d_min", *d_min)],
            PredicateSpec::TrackingBound {
                eps_pos,
                eps_speed,
                settle_time,
            } => vec![
                ("eps_pos", *eps_pos),
                ("eps_speed", *eps_speed),
                ("settle_time", *settle_time),
            ],
            PredicateSpec::ConfigValid { d_min, .. } => vec![("d_min", *d_min)],
            PredicateSpec::SafeSetpointRule { horizon_s } => vec![("horizon_s", *horizon_s)],
            PredicateSpec::ObstacleBehaviour {
                max_speed,
                max_turn_rate,
                ..
            } => vec![("max_speed", *max_speed), ("max_turn_rate", *max_turn_rate)],
        }
    }

    /// Parameter problems, one message per offending parameter.
    pub fn parameter_errors(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, value) in self.numbers() {
            if !value.is_finite() {
                out.push(format!("{} parameter {name} is not finite", self.variant_name()));
            } else if value < 0.0 {
                out.push(format!("{} parameter {name} is negative", self.variant_name()));
            }
        }
        match self {
            PredicateSpec::SeparationBound { d_min } | PredicateSpec::ConfigValid { d_min, .. }
                if d_min.is_finite() && *d_min <= 0.0 =>
            {
                out.push(format!("{} d_min must be strictly positive", self.variant_name()));
            }
            _ => {}
        }
        out
    }

    /// True when both predicates constrain the same quantity, so that their
    /// bounds are comparable.
    pub fn same_key(&self, other: &PredicateSpec) -> bool {
        use PredicateSpec::*;
        match (self, other) {
            (
                StateErrorBound {
                    signal: s1,
                    subject: o1,
                    ..
                },
                StateErrorBound {
                    signal: s2,
                    subject: o2,
                    ..
                },
            ) => s1 == s2 && o1 == o2,
            (SeparationBound { .. }, SeparationBound { .. }) => true,
            (TrackingBound { .. }, TrackingBound { .. }) => true,
            (ConfigValid { route_id: r1, .. }, ConfigValid { route_id: r2, .. }) => r1 == r2,
            (SafeSetpointRule { .. }, SafeSetpointRule { .. }) => true,
            (ObstacleBehaviour { model: m1, .. }, ObstacleBehaviour { model: m2, .. }) => m1 == m2,
            _ => false,
        }
    }

    /// `self` (the provider) is at least as strong as `weaker` (the consumer).
    pub fn covers(&self, weaker: &PredicateSpec) -> bool {
        use PredicateSpec::*;
        if !self.same_key(weaker) {
            return false;
        }
        match (self, weaker) {
            (StateErrorBound { epsilon: p, .. }, StateErrorBound { epsilon: c, .. }) => p <= c,
            (SeparationBound { d_min: p }, SeparationBound { d_min: c }) => p >= c,
            (
                TrackingBound {
                    eps_pos: pp,
                    eps_speed: ps,
                    settle_time: pt,
                },
                TrackingBound {
                    eps_pos: cp,
                    eps_speed: cs,
                    settle_time: ct,
                },
            ) => pp <= cp && ps <= cs && pt <= ct,
            (ConfigValid { d_min: p, .. }, ConfigValid { d_min: c, .. }) => p >= c,
            (SafeSetpointRule { horizon_s: p }, SafeSetpointRule { horizon_s: c }) => p >= c,
            (
                ObstacleBehaviour {
                    max_speed: ps,
                    max_turn_rate: pr,
                    ..
                },
                ObstacleBehaviour {
                    max_speed: cs,
                    max_turn_rate: cr,
                    ..
                },
            ) => ps <= cs && pr <= cr,
            _ => false,
        }
    }

    /// Whether this predicate expresses an accuracy ("w.m.a.") qualifier.
    pub fn is_accuracy(&self) -> bool {
        matches!(
            self,
            PredicateSpec::StateErrorBound { .. } | PredicateSpec::TrackingBound { .. }
        )
    }
}

/// Conjunction coverage: every consumer predicate is covered by some
/// provider predicate. Informal clauses (no predicates) never cover.
pub fn predicates_cover(provider: &[PredicateSpec], consumer: &[PredicateSpec]) -> bool {
    !provider.is_empty()
        && !consumer.is_empty()
        && consumer
            .iter()
            .all(|c| provider.iter().any(|p| p.covers(c)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub id: ClauseId,
    pub kind: ClauseKind,
    pub text: String,
    #[serde(
        rename = "predicate",
        default,
        skip_serializing_if = "Vec::is_empty",
        serialize_with = "one_or_many::serialize",
        deserialize_with = "one_or_many::deserialize"
    )]
    pub predicates: Vec<PredicateSpec>,
    /// For a Decision guarantee: the parent composite guarantee whose
    /// responsibility it inherits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inherits: Option<ClauseId>,
}

impl Clause {
    pub fn new(id: &str, kind: ClauseKind, text: &str) -> Self {
        Self {
            id: id.to_string(),
            kind,
            text: text.to_string(),
            predicates: Vec::new(),
            inherits: None,
        }
    }

    pub fn with_predicate(mut self, p: PredicateSpec) -> Self {
        self.predicates.push(p);
        self
    }

    pub fn is_informal(&self) -> bool {
        self.predicates.is_empty()
    }

    /// Component part of the dotted id ("MPCS" for "MPCS.A2").
    pub fn owner_prefix(&self) -> Option<&str> {
        self.id.rsplit_once('.').map(|(owner, _)| owner)
    }

    /// Local part of the dotted id ("A2" for "MPCS.A2").
    pub fn local_id(&self) -> &str {
        self.id.rsplit_once('.').map(|(_, l)| l).unwrap_or(&self.id)
    }
}

mod one_or_many {
    use super::*;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(Box<PredicateSpec>),
        Many(Vec<PredicateSpec>),
    }

    pub fn serialize<S: Serializer>(v: &[PredicateSpec], s: S) -> Result<S::Ok, S::Error> {
        match v {
            [one] => one.serialize(s),
            many => many.serialize(s),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<PredicateSpec>, D::Error> {
        Ok(match Option::<OneOrMany>::deserialize(d)? {
            None => Vec::new(),
            Some(OneOrMany::One(p)) => vec![*p],
            Some(OneOrMany::Many(v)) => v,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Contract {
    /// R: the responsibility in understandable text.
    #[serde(default)]
    pub responsibility: String,
    /// F: how the responsibility is addressed.
    #[serde(default)]
    pub function: String,
    /// I: input interface ports.
    #[serde(default)]
    pub inputs: Vec<String>,
    /// O: output interface ports.
    #[serde(default)]
    pub outputs: Vec<String>,
    /// A
    #[serde(default)]
    pub assumptions: Vec<Clause>,
    /// G
    #[serde(default)]
    pub guarantees: Vec<Clause>,
}

impl Contract {
    pub fn clauses(&self) -> impl Iterator<Item = &Clause> {
        self.assumptions.iter().chain(self.guarantees.iter())
    }

    pub fn clause(&self, id: &str) -> Option<&Clause> {
        self.clauses().find(|c| c.id == id)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ContractError {
    #[error("entailment precondition: provider {provider} must be a guarantee and consumer {consumer} an assumption")]
    KindPrecondition { provider: String, consumer: String },
}

/// Whether `provider` (a guarantee) discharges `consumer` (an assumption) by
/// predicate entailment alone. Informal clauses never entail; the discharge
/// analysis accepts them only through an explicit link.
pub fn entails(provider: &Clause, consumer: &Clause) -> Result<bool, ContractError> {
    if provider.kind != ClauseKind::Guarantee || consumer.kind != ClauseKind::Assumption {
        return Err(ContractError::KindPrecondition {
            provider: provider.id.clone(),
            consumer: consumer.id.clone(),
        });
    }
    Ok(predicates_cover(&provider.predicates, &consumer.predicates))
}

fn local_id_ok(local: &str, kind: ClauseKind) -> bool {
    let mut chars = local.chars();
    chars.next() == Some(kind.letter())
        && local.len() > 1
        && chars.all(|c| c.is_ascii_alphanumeric())
}

/// Template well-formedness of one contract. Empty result means every
/// contract invariant holds.
pub fn validate_contract(contract: &Contract, kind: ComponentKind) -> Vec<Finding> {
    let mut findings = Vec::new();
    let sections = [
        ("assumptions", ClauseKind::Assumption, &contract.assumptions),
        ("guarantees", ClauseKind::Guarantee, &contract.guarantees),
    ];
    for (field, expected, clauses) in sections {
        for clause in clauses.iter() {
            if clause.kind != expected {
                findings.push(Finding::new(
                    Rule::KindMismatch,
                    &clause.id,
                    format!("{} clause listed under {field}", clause.kind),
                ));
            }
            if clause.owner_prefix().is_none() || !local_id_ok(clause.local_id(), clause.kind) {
                findings.push(Finding::new(
                    Rule::MalformedClauseId,
                    &clause.id,
                    format!(
                        "expected <component>.{}<index> for a {}",
                        clause.kind.letter(),
                        clause.kind
                    ),
                ));
            }
            for problem in clause.predicates.iter().flat_map(|p| p.parameter_errors()) {
                findings.push(Finding::new(Rule::InvalidParameter, &clause.id, problem));
            }
            if clause.inherits.is_some() && clause.kind != ClauseKind::Guarantee {
                findings.push(Finding::new(
                    Rule::KindMismatch,
                    &clause.id,
                    "only guarantees can inherit a responsibility",
                ));
            }
        }
    }
    if kind != ComponentKind::Resource && contract.guarantees.is_empty() {
        findings.push(Finding::new(
            Rule::MissingGuarantee,
            "guarantees",
            format!("{kind} component has no guarantee"),
        ));
    }
    findings
}
