//! Scenario classification with vacuity precedence: a run in which any
//! monitored assumption failed says nothing about the guarantees.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::contract::{ClauseId, PredicateSpec};
use crate::refinement::DischargeMap;
use crate::sim::scenario::Trace;

use super::monitor::{MonitorOutcome, MonitorSet};
use super::SbtError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Classification {
    Pass,
    Falsified { guarantees: Vec<ClauseId> },
    Vacuous { assumptions: Vec<ClauseId> },
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::Pass => "pass",
            Classification::Falsified { .. } => "falsified",
            Classification::Vacuous { .. } => "vacuous",
        }
    }

    pub fn is_falsified(&self) -> bool {
        matches!(self, Classification::Falsified { .. })
    }

    pub fn is_vacuous(&self) -> bool {
        matches!(self, Classification::Vacuous { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioVerdict {
    pub scenario_id: String,
    pub index: usize,
    pub outcomes: BTreeMap<ClauseId, MonitorOutcome>,
    pub classification: Classification,
    /// Minimum true separation; absent without obstacles.
    pub min_separation_m: Option<f64>,
    /// Distance to the safety boundary: the separation slack over the
    /// tightest separation bound, or the worst violated-guarantee value when
    /// falsified. `f64::MAX` when nothing bounds the run.
    pub margin_m: f64,
}

/// Evaluate every monitor and classify. Assumption monitors take
/// precedence: any assumption violation makes the verdict vacuous.
pub fn classify_verdict(trace: &Trace, monitors: &MonitorSet, map: &DischargeMap) -> Result<ScenarioVerdict, SbtError> {
    monitors.check_discharged(map)?;
    let mut outcomes = BTreeMap::new();
    let mut broken = Vec::new();
    for m in &monitors.assumptions {
        let o = m.evaluate(trace)?;
        if o.is_violated() {
            broken.push(m.clause_id.clone());
        }
        outcomes.insert(m.clause_id.clone(), o);
    }
    let mut failed = Vec::new();
    let mut worst_failed = f64::MAX;
    for m in &monitors.guarantees {
        let o = m.evaluate(trace)?;
        if let MonitorOutcome::Violated { worst_value, .. } = o {
            failed.push(m.clause_id.clone());
            worst_failed = worst_failed.min(worst_value);
        }
        outcomes.insert(m.clause_id.clone(), o);
    }

    let min_separation_m = trace.summary.min_separation_m;
    let d_min = monitors
        .guarantees
        .iter()
        .flat_map(|m| &m.predicates)
        .filter_map(|p| match p {
            PredicateSpec::SeparationBound { d_min } => Some(*d_min),
            _ => None,
        })
        .reduce(f64::max);
    let sep_margin = match (min_separation_m, d_min) {
        (Some(s), Some(d)) => s - d,
        _ => f64::MAX,
    };

    let (classification, margin_m) = if !broken.is_empty() {
        (Classification::Vacuous { assumptions: broken }, sep_margin)
    } else if !failed.is_empty() {
        (
            Classification::Falsified { guarantees: failed },
            worst_failed.min(sep_margin),
        )
    } else {
        (Classification::Pass, sep_margin)
    };
    Ok(ScenarioVerdict {
        scenario_id: trace.params.id.clone(),
        index: 0,
        outcomes,
        classification,
        min_separation_m,
        margin_m,
    })
}
