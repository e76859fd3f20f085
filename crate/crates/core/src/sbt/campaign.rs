//! Campaigns: Latin hypercube exploration, local refinement around the
//! smallest margins, counterexample shrinking and the resulting evidence.
//!
//! Scenarios are independent and run on the rayon pool; results are merged
//! by sample index, so a campaign report does not depend on the number of
//! workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assurance::{EvidenceItem, EvidenceKind, EvidenceResult};
use crate::model::SystemModel;
use crate::refinement::{build_discharge_map, DischargeMap};
use crate::sim::mpcs::MpcsVariant;
use crate::sim::scenario::{run_scenario, ScenarioParams, Trace};
use crate::sim::sitaw::{stream_seed, NoiseMode};

use super::lhs::{lhs_unit, sample_id, sample_seed};
use super::monitor::{monitors_for, MonitorSet};
use super::space::{ParameterSpace, Target};
use super::verdict::{classify_verdict, ScenarioVerdict};
use super::SbtError;

pub const CAMPAIGN_SCHEMA_VERSION: u32 = 1;

/// Cells per dimension of the coverage grid.
pub const COVERAGE_GRID: usize = 10;

const REFINE_STREAM: u64 = 0x7E;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignPlan {
    pub n: usize,
    pub k: usize,
    pub rounds: usize,
    pub seed: u64,
    pub sigma0: f64,
    pub decay: f64,
    /// Simulations allowed per shrunk counterexample.
    pub shrink_budget: usize,
    /// How many falsified scenarios get shrunk.
    pub shrink_count: usize,
    pub noise: NoiseMode,
    pub variant: MpcsVariant,
    pub maneuvers: bool,
}

impl Default for CampaignPlan {
    fn default() -> Self {
        Self {
            n: 1000,
            k: 10,
            rounds: 3,
            seed: 42,
            sigma0: 0.1,
            decay: 0.5,
            shrink_budget: 40,
            shrink_count: 3,
            noise: NoiseMode::Bounded,
            variant: MpcsVariant::Nominal,
            maneuvers: false,
        }
    }
}

impl CampaignPlan {
    pub fn validate(&self) -> Result<(), SbtError> {
        let mut problems = Vec::new();
        if self.n == 0 {
            problems.push("n must be >= 1".to_string());
        }
        if !(self.sigma0.is_finite() && self.sigma0 > 0.0) {
            problems.push(format!("sigma0 must be > 0 (got {})", self.sigma0));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            problems.push(format!("decay must be in (0, 1] (got {})", self.decay));
        }
        if let NoiseMode::Violating { scale } = self.noise {
            if !(scale.is_finite() && scale > 1.0) {
                problems.push(format!("violating noise scale must be > 1 (got {scale})"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SbtError::Plan(problems.join("; ")))
        }
    }

    pub fn campaign_id(&self, component: &str) -> String {
        let mut id = format!("{component}-seed{}-n{}-r{}k{}", self.seed, self.n, self.rounds, self.k);
        if self.variant == MpcsVariant::DropAccuracyMargins {
            id.push_str("-mutant");
        }
        if let NoiseMode::Violating { scale } = self.noise {
            id.push_str(&format!("-noise{scale}"));
        }
        if self.maneuvers {
            id.push_str("-maneuvers");
        }
        id
    }

    /// Apply noise mode, planner variant and maneuver dimensions to a space.
    pub fn configure(&self, space: &ParameterSpace) -> ParameterSpace {
        let mut s = space.clone().with_noise(self.noise).with_variant(self.variant);
        let has_maneuvers = s
            .dimensions
            .iter()
            .any(|d| matches!(d.target, Target::ManeuverTime { .. }));
        if self.maneuvers && !has_maneuvers {
            s = s.with_maneuvers();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleOrigin {
    Lhs,
    Refine { round: usize, parent: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub id: String,
    pub seed: u64,
    pub origin: SampleOrigin,
    /// Point in the unit cube; `space.instantiate` rebuilds the scenario.
    pub unit: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CampaignCounts {
    pub total: usize,
    pub pass: usize,
    pub falsified: usize,
    pub vacuous: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub index: usize,
    pub scenario_id: String,
    pub margin_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrunkCounterexample {
    pub scenario_id: String,
    pub index: usize,
    pub simulations: usize,
    pub original_unit: Vec<f64>,
    pub unit: Vec<f64>,
    pub params: ScenarioParams,
    pub verdict: ScenarioVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub schema_version: u32,
    pub id: String,
    pub component: String,
    pub master_seed: u64,
    pub plan: CampaignPlan,
    pub space: ParameterSpace,
    pub samples: Vec<SampleRecord>,
    pub verdicts: Vec<ScenarioVerdict>,
    pub counts: CampaignCounts,
    pub coverage: f64,
    /// The `k` smallest passing margins.
    pub boundary_estimate: Vec<BoundaryPoint>,
    /// Minimum true separation over the non-vacuous scenarios.
    pub min_separation_m: Option<f64>,
    pub shrunk: Vec<ShrunkCounterexample>,
    pub evidence: EvidenceItem,
}

impl CampaignReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("campaign report serializes")
    }

    pub fn falsified_ids(&self) -> Vec<String> {
        self.verdicts
            .iter()
            .filter(|v| v.classification.is_falsified())
            .map(|v| v.scenario_id.clone())
            .collect()
    }

    /// Recompute counts, coverage, boundary estimate, minimum separation
    /// and the evidence item from samples and verdicts.
    fn refresh(&mut self, guarantees: Vec<String>) {
        let mut c = CampaignCounts {
            total: self.verdicts.len(),
            ..Default::default()
        };
        for v in &self.verdicts {
            match v.classification {
                super::Classification::Pass => c.pass += 1,
                super::Classification::Falsified { .. } => c.falsified += 1,
                super::Classification::Vacuous { .. } => c.vacuous += 1,
            }
        }
        self.counts = c;
        let informative: Vec<&[f64]> = self
            .samples
            .iter()
            .zip(&self.verdicts)
            .filter(|(_, v)| !v.classification.is_vacuous())
            .map(|(s, _)| s.unit.as_slice())
            .collect();
        self.coverage = grid_coverage(&informative, self.space.dim());
        let mut passing: Vec<&ScenarioVerdict> = self
            .verdicts
            .iter()
            .filter(|v| matches!(v.classification, super::Classification::Pass))
            .collect();
        passing.sort_by(|a, b| a.margin_m.total_cmp(&b.margin_m).then(a.index.cmp(&b.index)));
        self.boundary_estimate = passing
            .iter()
            .take(self.plan.k)
            .map(|v| BoundaryPoint {
                index: v.index,
                scenario_id: v.scenario_id.clone(),
                margin_m: v.margin_m,
            })
            .collect();
        self.min_separation_m = self
            .verdicts
            .iter()
            .filter(|v| !v.classification.is_vacuous())
            .filter_map(|v| v.min_separation_m)
            .reduce(f64::min);
        let falsifying = self.falsified_ids();
        let result = if c.falsified > 0 {
            EvidenceResult::Refutes
        } else if c.pass > 0 {
            EvidenceResult::Supports
        } else {
            EvidenceResult::Inconclusive
        };
        self.evidence = EvidenceItem {
            id: format!("EV-{}", self.id),
            kind: EvidenceKind::Observation,
            target_clauses: guarantees,
            source: self.id.clone(),
            coverage: self.coverage,
            result,
            notes: format!(
                "{} scenarios: {} pass, {} falsified, {} vacuous",
                c.total, c.pass, c.falsified, c.vacuous
            ),
            falsifying_scenarios: falsifying,
        };
    }
}

/// Mean, over all pairs of dimensions, of the fraction of cells of a
/// `COVERAGE_GRID` x `COVERAGE_GRID` grid hit by at least one point (the
/// single-dimension fraction when `d == 1`).
pub fn grid_coverage(points: &[&[f64]], d: usize) -> f64 {
    let g = COVERAGE_GRID;
    let cell = |u: f64| ((u * g as f64) as usize).min(g - 1);
    if d == 0 || points.is_empty() {
        return 0.0;
    }
    if d == 1 {
        let mut hit = vec![false; g];
        for p in points {
            hit[cell(p[0])] = true;
        }
        return hit.iter().filter(|&&h| h).count() as f64 / g as f64;
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..d {
        for j in i + 1..d {
            let mut hit = vec![false; g * g];
            for p in points {
                hit[cell(p[i]) * g + cell(p[j])] = true;
            }
            total += hit.iter().filter(|&&h| h).count() as f64 / (g * g) as f64;
            pairs += 1;
        }
    }
    total / pairs as f64
}

/// Called with every simulated trace and its verdict (e.g. to keep traces).
pub type TraceSink<'a> = &'a (dyn Fn(&ScenarioVerdict, &Trace) + Sync);

#[derive(Debug, Error)]
#[error("campaign {} aborted after {} scenarios: {error}", partial.id, partial.verdicts.len())]
pub struct CampaignFailure {
    #[source]
    pub error: SbtError,
    /// Everything evaluated before the first failing scenario.
    pub partial: Box<CampaignReport>,
}

struct Harness<'a> {
    space: &'a ParameterSpace,
    monitors: MonitorSet,
    map: DischargeMap,
    sink: Option<TraceSink<'a>>,
}

impl<'a> Harness<'a> {
    fn new(model: &SystemModel, space: &'a ParameterSpace, sink: Option<TraceSink<'a>>) -> Result<Self, SbtError> {
        let map = build_discharge_map(model).map_err(SbtError::Structure)?;
        let monitors = monitors_for(model, &space.component, &map)?;
        monitors.check_discharged(&map)?;
        Ok(Self {
            space,
            monitors,
            map,
            sink,
        })
    }

    fn run(&self, index: usize, params: &ScenarioParams) -> Result<(ScenarioVerdict, Trace), SbtError> {
        let trace = run_scenario(params)?;
        let mut v = classify_verdict(&trace, &self.monitors, &self.map)?;
        v.index = index;
        Ok((v, trace))
    }

    fn evaluate(&self, s: &SampleRecord) -> Result<ScenarioVerdict, SbtError> {
        let params = self.space.instantiate(&s.unit, s.id.clone(), s.seed);
        let (v, trace) = self.run(s.index, &params)?;
        if let Some(sink) = self.sink {
            sink(&v, &trace);
        }
        Ok(v)
    }

    /// Evaluate a batch in parallel and append it in index order. Stops at
    /// the first failing sample, keeping everything before it.
    fn extend(&self, report: &mut CampaignReport, batch: Vec<SampleRecord>) -> Result<(), SbtError> {
        let results: Vec<Result<ScenarioVerdict, SbtError>> = batch.par_iter().map(|s| self.evaluate(s)).collect();
        for (s, r) in batch.into_iter().zip(results) {
            let v = r?;
            report.samples.push(s);
            report.verdicts.push(v);
        }
        Ok(())
    }
}

fn empty_report(space: &ParameterSpace, plan: &CampaignPlan) -> CampaignReport {
    let id = plan.campaign_id(&space.component);
    CampaignReport {
        schema_version: CAMPAIGN_SCHEMA_VERSION,
        id: id.clone(),
        component: space.component.clone(),
        master_seed: plan.seed,
        plan: plan.clone(),
        space: space.clone(),
        samples: Vec::new(),
        verdicts: Vec::new(),
        counts: CampaignCounts::default(),
        coverage: 0.0,
        boundary_estimate: Vec::new(),
        min_separation_m: None,
        shrunk: Vec::new(),
        evidence: EvidenceItem {
            id: format!("EV-{id}"),
            kind: EvidenceKind::Observation,
            target_clauses: Vec::new(),
            source: id,
            coverage: 0.0,
            result: EvidenceResult::Inconclusive,
            notes: String::new(),
            falsifying_scenarios: Vec::new(),
        },
    }
}

/// LHS exploration, `plan.rounds` refinement rounds, shrinking of the first
/// `plan.shrink_count` falsified scenarios, and the evidence item.
pub fn run_campaign(
    space: &ParameterSpace,
    plan: &CampaignPlan,
    model: &SystemModel,
    sink: Option<TraceSink<'_>>,
) -> Result<CampaignReport, CampaignFailure> {
    let space = plan.configure(space);
    let mut report = empty_report(&space, plan);
    let fail = |error: SbtError, report: CampaignReport| CampaignFailure {
        error,
        partial: Box::new(report),
    };
    if let Err(e) = plan.validate() {
        return Err(fail(e, report));
    }
    let harness = match Harness::new(model, &space, sink) {
        Ok(h) => h,
        Err(e) => return Err(fail(e, report)),
    };
    let guarantees = harness.monitors.guarantee_ids();

    let batch = lhs_unit(plan.n, space.dim(), plan.seed)
        .into_iter()
        .enumerate()
        .map(|(i, unit)| SampleRecord {
            index: i,
            id: sample_id(&space.component, i),
            seed: sample_seed(plan.seed, i),
            origin: SampleOrigin::Lhs,
            unit,
        })
        .collect();
    let result = harness
        .extend(&mut report, batch)
        .and_then(|_| refine_rounds(&harness, &mut report, plan.k, plan.rounds, plan.sigma0, plan.decay, plan.seed))
        .and_then(|_| {
            let targets: Vec<SampleRecord> = report
                .samples
                .iter()
                .zip(&report.verdicts)
                .filter(|(_, v)| v.classification.is_falsified())
                .take(plan.shrink_count)
                .map(|(s, _)| s.clone())
                .collect();
            for s in &targets {
                let shrunk = shrink_with(&harness, s, plan.shrink_budget)?;
                report.shrunk.push(shrunk);
            }
            Ok(())
        });
    report.refresh(guarantees);
    match result {
        Ok(()) => Ok(report),
        Err(e) => Err(fail(e, report)),
    }
}

fn refine_rounds(
    harness: &Harness<'_>,
    report: &mut CampaignReport,
    k: usize,
    rounds: usize,
    sigma0: f64,
    decay: f64,
    seed: u64,
) -> Result<(), SbtError> {
    for round in 0..rounds {
        let mut ranked: Vec<(f64, usize)> = report
            .verdicts
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.classification.is_vacuous())
            .map(|(pos, v)| (v.margin_m, pos))
            .collect();
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let sigma = sigma0 * decay.powi(round as i32);
        let normal = Normal::new(0.0, sigma).expect("sigma is positive");
        let next = report.samples.len();
        let batch: Vec<SampleRecord> = ranked
            .iter()
            .take(k)
            .enumerate()
            .map(|(j, &(_, pos))| {
                let parent = &report.samples[pos];
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed ^ REFINE_STREAM, round as u64, parent.index as u64));
                let unit = parent
                    .unit
                    .iter()
                    .map(|&u| (u + normal.sample(&mut rng)).clamp(0.0, 1.0 - 1e-12))
                    .collect();
                let index = next + j;
                SampleRecord {
                    index,
                    id: sample_id(&report.component, index),
                    seed: sample_seed(seed, index),
                    origin: SampleOrigin::Refine {
                        round,
                        parent: parent.index,
                    },
                    unit,
                }
            })
            .collect();
        harness.extend(report, batch)?;
    }
    Ok(())
}

/// Run `rounds` more refinement rounds on an existing report.
pub fn adaptive_refine(
    report: &mut CampaignReport,
    model: &SystemModel,
    k: usize,
    rounds: usize,
    sigma0: f64,
    seed: u64,
) -> Result<(), SbtError> {
    let space = report.space.clone();
    let harness = Harness::new(model, &space, None)?;
    let result = refine_rounds(&harness, report, k, rounds, sigma0, report.plan.decay, seed);
    report.refresh(harness.monitors.guarantee_ids());
    result
}

fn shrink_with(harness: &Harness<'_>, s: &SampleRecord, budget: usize) -> Result<ShrunkCounterexample, SbtError> {
    let space = harness.space;
    let mut unit = s.unit.clone();
    let mut used = 0usize;
    let instantiate = |u: &[f64]| space.instantiate(u, s.id.clone(), s.seed);
    let mut verdict = harness.run(s.index, &instantiate(&unit))?.0;
    let try_point = |u: &[f64], used: &mut usize| -> Result<Option<ScenarioVerdict>, SbtError> {
        *used += 1;
        let v = harness.run(s.index, &instantiate(u))?.0;
        Ok(v.classification.is_falsified().then_some(v))
    };
    'coords: for i in 0..unit.len() {
        if (unit[i] - 0.5).abs() < 1e-12 {
            continue;
        }
        if used >= budget {
            break;
        }
        let mut cand = unit.clone();
        cand[i] = 0.5;
        if let Some(v) = try_point(&cand, &mut used)? {
            unit = cand;
            verdict = v;
            continue;
        }
        // bisect between the falsifying value and the midpoint
        let (mut lo, mut hi) = (unit[i], 0.5);
        for _ in 0..3 {
            if used >= budget {
                break 'coords;
            }
            let mid = 0.5 * (lo + hi);
            cand[i] = mid;
            if let Some(v) = try_point(&cand, &mut used)? {
                lo = mid;
                unit[i] = mid;
                verdict = v;
            } else {
                hi = mid;
            }
        }
        cand[i] = unit[i];
    }
    Ok(ShrunkCounterexample {
        scenario_id: s.id.clone(),
        index: s.index,
        simulations: used,
        original_unit: s.unit.clone(),
        params: space.instantiate(&unit, s.id.clone(), s.seed),
        unit,
        verdict,
    })
}

/// Shrink one falsified sample of `report` toward the space midpoint.
/// Returns the original point unchanged when nothing smaller falsifies or
/// the budget is zero.
pub fn shrink_counterexample(
    report: &CampaignReport,
    model: &SystemModel,
    index: usize,
    budget: usize,
) -> Result<ShrunkCounterexample, SbtError> {
    let sample = report
        .samples
        .iter()
        .find(|s| s.index == index)
        .ok_or_else(|| SbtError::Plan(format!("no sample with index {index}")))?;
    let harness = Harness::new(model, &report.space, None)?;
    shrink_with(&harness, sample, budget)
}
