//! Evidence items, claims over guarantee clauses, and the assurance report
//! (markdown, JSON and a DOT graph of the discharge structure).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{Clause, ClauseId, PredicateSpec};
use crate::model::{AssuranceContext, SystemModel};
use crate::refinement::{Discharge, DischargeVia, RefinementReport};
use crate::sbt::CampaignReport;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceKind {
    /// Observed behaviour from testing.
    Observation,
    /// Analysis of the design or the code.
    Insight,
    /// Facts about the development process.
    Circumstantial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceResult {
    Supports,
    Refutes,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub id: String,
    pub kind: EvidenceKind,
    pub target_clauses: Vec<ClauseId>,
    /// Campaign id or document reference.
    pub source: String,
    pub coverage: f64,
    pub result: EvidenceResult,
    #[serde(default)]
    pub notes: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub falsifying_scenarios: Vec<String>,
}

impl EvidenceItem {
    pub fn validate(&self, model: &SystemModel) -> Result<(), AssuranceError> {
        if !(0.0..=1.0).contains(&self.coverage) {
            return Err(AssuranceError::InvalidEvidence {
                id: self.id.clone(),
                problem: format!("coverage {} outside [0, 1]", self.coverage),
            });
        }
        if self.target_clauses.is_empty() {
            return Err(AssuranceError::InvalidEvidence {
                id: self.id.clone(),
                problem: "no target clauses".into(),
            });
        }
        let idx = model.index();
        for c in &self.target_clauses {
            if idx.clause(c).is_none() {
                return Err(AssuranceError::UnresolvedReference(c.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimStatus {
    Supported,
    Refuted,
    Undetermined,
}

impl ClaimStatus {
    pub fn label(self) -> &'static str {
        match self {
            ClaimStatus::Supported => "supported",
            ClaimStatus::Refuted => "refuted",
            ClaimStatus::Undetermined => "undetermined",
        }
    }
}

/// A claim that one guarantee clause holds. `status` is filled in by
/// [`evaluate_claims`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimNode {
    pub clause: ClauseId,
    pub claim: String,
    #[serde(default)]
    pub children: Vec<ClaimNode>,
    #[serde(default)]
    pub evidence: Vec<String>,
    pub status: ClaimStatus,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssuranceError {
    #[error("claim {claim} cites unknown evidence {evidence}")]
    DanglingEvidence { claim: ClauseId, evidence: String },
    #[error("unresolved reference {0}")]
    UnresolvedReference(String),
    #[error("evidence {id}: {problem}")]
    InvalidEvidence { id: String, problem: String },
    #[error("threshold {0} outside (0, 1]")]
    InvalidThreshold(f64),
}

/// Status of one claim from its evidence and children.
///
/// Refuted if any attached item refutes. Supported if every child is
/// supported, the best coverage among supporting observations reaches
/// `threshold`, and the refinement check of the clause's component passed.
/// Undetermined otherwise. Children's statuses are recomputed here.
pub fn evaluate_claim_status(
    node: &ClaimNode,
    evidence: &BTreeMap<String, EvidenceItem>,
    refinement_passed: &dyn Fn(&ClauseId) -> bool,
    threshold: f64,
) -> Result<ClaimStatus, AssuranceError> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(AssuranceError::InvalidThreshold(threshold));
    }
    let mut items = Vec::new();
    for id in &node.evidence {
        let e = evidence.get(id).ok_or_else(|| AssuranceError::DanglingEvidence {
            claim: node.clause.clone(),
            evidence: id.clone(),
        })?;
        items.push(e);
    }
    let mut children_ok = true;
    for ch in &node.children {
        if evaluate_claim_status(ch, evidence, refinement_passed, threshold)? != ClaimStatus::Supported {
            children_ok = false;
        }
    }
    if items.iter().any(|e| e.result == EvidenceResult::Refutes) {
        return Ok(ClaimStatus::Refuted);
    }
    let coverage = items
        .iter()
        .filter(|e| e.kind == EvidenceKind::Observation && e.result == EvidenceResult::Supports)
        .map(|e| e.coverage)
        .fold(0.0, f64::max);
    if children_ok && coverage >= threshold && refinement_passed(&node.clause) {
        Ok(ClaimStatus::Supported)
    } else {
        Ok(ClaimStatus::Undetermined)
    }
}

/// Set `status` on a claim tree, bottom-up.
pub fn evaluate_claims(
    nodes: &mut [ClaimNode],
    evidence: &BTreeMap<String, EvidenceItem>,
    refinement_passed: &dyn Fn(&ClauseId) -> bool,
    threshold: f64,
) -> Result<(), AssuranceError> {
    for n in nodes {
        evaluate_claims(&mut n.children, evidence, refinement_passed, threshold)?;
        n.status = evaluate_claim_status(n, evidence, refinement_passed, threshold)?;
    }
    Ok(())
}

/// Whether the refinement check found nothing inside the subtree of the
/// component owning `clause`.
pub fn component_refinement_passed(model: &SystemModel, refinement: &RefinementReport, clause: &str) -> bool {
    let idx = model.index();
    let Some(c) = idx.clause(clause) else {
        return false;
    };
    let mut subtree = BTreeSet::new();
    let mut stack = vec![c.component];
    while let Some(x) = stack.pop() {
        subtree.insert(x.id.as_str());
        stack.extend(x.children.iter());
    }
    !refinement.findings.iter().any(|f| {
        let owner = f.location.rsplit_once('.').map_or(f.location.as_str(), |(o, _)| o);
        subtree.contains(owner)
    })
}

/// Claim tree over the top-level composite guarantees.
///
/// A composite guarantee collects the evidence targeting it or any
/// guarantee that inherits it; its children are the other formal
/// guarantees of the inheriting components.
pub fn build_claims(model: &SystemModel, evidence: &[EvidenceItem]) -> Vec<ClaimNode> {
    let idx = model.index();
    let Some(root) = &model.composite else {
        return Vec::new();
    };
    let cites = |ids: &[&str]| -> Vec<String> {
        evidence
            .iter()
            .filter(|e| e.target_clauses.iter().any(|t| ids.contains(&t.as_str())))
            .map(|e| e.id.clone())
            .collect()
    };
    let leaf = |c: &Clause| ClaimNode {
        clause: c.id.clone(),
        claim: c.text.clone(),
        children: Vec::new(),
        evidence: cites(&[c.id.as_str()]),
        status: ClaimStatus::Undetermined,
    };
    root.contract
        .guarantees
        .iter()
        .map(|g| {
            let inheritors: Vec<_> = idx
                .clauses()
                .filter(|r| r.clause.inherits.as_deref() == Some(g.id.as_str()))
                .collect();
            let mut ids = vec![g.id.as_str()];
            ids.extend(inheritors.iter().map(|r| r.clause.id.as_str()));
            let children = inheritors
                .iter()
                .flat_map(|r| r.component.contract.guarantees.iter())
                .filter(|c| c.inherits.is_none() && !c.is_informal())
                .map(leaf)
                .collect();
            ClaimNode {
                clause: g.id.clone(),
                claim: g.text.clone(),
                children,
                evidence: cites(&ids),
                status: ClaimStatus::Undetermined,
            }
        })
        .collect()
}

/// Build and evaluate the claim tree for a model, a refinement result and
/// the evidence of a set of campaigns.
pub fn assurance_case(
    model: &SystemModel,
    refinement: &RefinementReport,
    campaigns: &[CampaignReport],
    threshold: f64,
) -> Result<Vec<ClaimNode>, AssuranceError> {
    let evidence: Vec<EvidenceItem> = campaigns.iter().map(|c| c.evidence.clone()).collect();
    for e in &evidence {
        e.validate(model)?;
    }
    let by_id: BTreeMap<String, EvidenceItem> = evidence.iter().map(|e| (e.id.clone(), e.clone())).collect();
    let mut claims = build_claims(model, &evidence);
    evaluate_claims(
        &mut claims,
        &by_id,
        &|c| component_refinement_passed(model, refinement, c),
        threshold,
    )?;
    Ok(claims)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportBundle {
    pub markdown: String,
    pub json: String,
    pub dot: String,
}

#[derive(Serialize)]
struct CampaignSummary<'a> {
    id: &'a str,
    component: &'a str,
    master_seed: u64,
    total: usize,
    pass: usize,
    falsified: usize,
    vacuous: usize,
    coverage: f64,
    min_separation_m: Option<f64>,
    falsifying_scenarios: Vec<String>,
    shrunk: Vec<&'a str>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    schema_version: u32,
    model: &'a str,
    assurance_context: AssuranceContext,
    refinement: &'a RefinementReport,
    campaigns: Vec<CampaignSummary<'a>>,
    evidence: Vec<&'a EvidenceItem>,
    claims: &'a [ClaimNode],
}

/// Short human-readable form of a predicate.
pub fn predicate_summary(p: &PredicateSpec) -> String {
    match p {
        PredicateSpec::StateErrorBound {
            signal,
            subject,
            epsilon,
        } => format!("|err {}.{}| <= {} {}", subject.name(), signal.name(), epsilon, signal.unit()),
        PredicateSpec::SeparationBound { d_min } => format!("separation >= {d_min} m"),
        PredicateSpec::TrackingBound {
            eps_pos,
            eps_speed,
            settle_time,
        } => format!("cross-track <= {eps_pos} m, speed error <= {eps_speed} m/s after {settle_time} s"),
        PredicateSpec::ConfigValid { route_id, d_min } => format!("route {route_id}, d_min {d_min} m"),
        PredicateSpec::SafeSetpointRule { horizon_s } => format!("safe setpoint over {horizon_s} s"),
        PredicateSpec::ObstacleBehaviour {
            max_speed,
            max_turn_rate,
            ..
        } => format!("constant velocity, speed <= {max_speed} m/s, turn rate <= {max_turn_rate} rad/s"),
    }
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|").replace('\n', " ")
}

fn clause_lines(clauses: &[Clause]) -> String {
    if clauses.is_empty() {
        return "-".into();
    }
    clauses
        .iter()
        .map(|c| {
            let mut s = format!("**{}** {}", c.local_id(), cell(&c.text));
            if !c.predicates.is_empty() {
                let preds: Vec<String> = c.predicates.iter().map(predicate_summary).collect();
                s.push_str(&format!(" `{}`", preds.join("; ")));
            }
            if let Some(p) = &c.inherits {
                s.push_str(&format!(" (inherits {p})"));
            }
            s
        })
        .collect::<Vec<_>>()
        .join("<br>")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.3}"))
}

fn write_claim(out: &mut String, c: &ClaimNode, depth: usize) {
    let _ = writeln!(
        out,
        "{}- **{}** [{}] {}{}",
        "  ".repeat(depth),
        c.clause,
        c.status.label(),
        c.claim,
        if c.evidence.is_empty() {
            String::new()
        } else {
            format!(" (evidence: {})", c.evidence.join(", "))
        }
    );
    for ch in &c.children {
        write_claim(out, ch, depth + 1);
    }
}

fn claim_ids(c: &ClaimNode, out: &mut Vec<String>) {
    out.push(c.clause.clone());
    for ch in &c.children {
        claim_ids(ch, out);
    }
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\\\""))
}

/// Render the report bundle. Output depends only on the inputs.
pub fn render_report(
    model: &SystemModel,
    refinement: &RefinementReport,
    campaigns: &[CampaignReport],
    claims: &[ClaimNode],
) -> Result<ReportBundle, AssuranceError> {
    let idx = model.index();
    for c in campaigns {
        if idx.component(&c.component).is_none() {
            return Err(AssuranceError::UnresolvedReference(c.component.clone()));
        }
        c.evidence.validate(model)?;
    }
    let mut ids = Vec::new();
    for c in claims {
        claim_ids(c, &mut ids);
    }
    if let Some(bad) = ids.iter().find(|id| idx.clause(id).is_none()) {
        return Err(AssuranceError::UnresolvedReference(bad.clone()));
    }
    for (a, g) in refinement.discharge.edges().iter().chain(&refinement.promoted) {
        for id in [a, g] {
            if idx.clause(id).is_none() {
                return Err(AssuranceError::UnresolvedReference(id.clone()));
            }
        }
    }

    let mut md = String::new();
    let title = if model.name.is_empty() { "model" } else { &model.name };
    let _ = writeln!(md, "# Assurance report: {title}\n");
    let ctx = match model.assurance_context {
        AssuranceContext::InContext => "in context",
        AssuranceContext::OutOfContext => "out of context",
    };
    let _ = writeln!(md, "Assurance context: {ctx}\n");

    let _ = writeln!(md, "## Contracts\n");
    for r in &idx.order {
        let c = r.component;
        let k = &c.contract;
        let _ = writeln!(md, "### {} ({})\n", c.id, c.kind);
        let _ = writeln!(md, "| Field | Content |");
        let _ = writeln!(md, "|---|---|");
        let _ = writeln!(md, "| Responsibility | {} |", cell(&k.responsibility));
        let _ = writeln!(md, "| Function | {} |", cell(&k.function));
        let _ = writeln!(md, "| Inputs | {} |", cell(&k.inputs.join(", ")));
        let _ = writeln!(md, "| Outputs | {} |", cell(&k.outputs.join(", ")));
        let _ = writeln!(md, "| Assumptions | {} |", clause_lines(&k.assumptions));
        let _ = writeln!(md, "| Guarantees | {} |", clause_lines(&k.guarantees));
        let _ = writeln!(md);
    }

    let _ = writeln!(md, "## Discharge\n");
    let _ = writeln!(md, "| Assumption | Resolved by | Via | Risk source |");
    let _ = writeln!(md, "|---|---|---|---|");
    for (a, d) in &refinement.discharge.entries {
        let via = |v: &DischargeVia| match v {
            DischargeVia::Link => "link",
            DischargeVia::Entailment => "entailment",
        };
        let row = match d {
            Discharge::DischargedBy {
                provider,
                via: v,
                risk_source,
            } => format!(
                "| {a} | {provider} | {} | {} |",
                via(v),
                risk_source.map_or("-".into(), |r| r.to_string())
            ),
            Discharge::Promoted { parent_clause, via: v } => {
                format!("| {a} | {parent_clause} (promoted) | {} | - |", via(v))
            }
            Discharge::Undischarged { reason } => {
                format!("| {a} | undischarged | {} | - |", cell(&format!("{reason:?}")))
            }
        };
        let _ = writeln!(md, "{row}");
    }
    let _ = writeln!(md);

    let _ = writeln!(md, "## Refinement\n");
    let _ = writeln!(md, "Result: {}\n", if refinement.pass { "pass" } else { "fail" });
    for i in &refinement.inheritance {
        let _ = writeln!(
            md,
            "- {} inherited by {}",
            i.composite_guarantee,
            if i.inheritors.is_empty() {
                "none".to_string()
            } else {
                i.inheritors.join(", ")
            }
        );
    }
    for f in &refinement.findings {
        let _ = writeln!(md, "- {f}");
    }
    let _ = writeln!(md);

    let _ = writeln!(md, "## Campaigns\n");
    for c in campaigns {
        let _ = writeln!(md, "### {}\n", c.id);
        let _ = writeln!(md, "| Component | Seed | Scenarios | Pass | Falsified | Vacuous | Coverage | Min separation (m) |");
        let _ = writeln!(md, "|---|---|---|---|---|---|---|---|");
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {:.3} | {} |\n",
            c.component,
            c.master_seed,
            c.counts.total,
            c.counts.pass,
            c.counts.falsified,
            c.counts.vacuous,
            c.coverage,
            fmt_opt(c.min_separation_m)
        );
        if !c.boundary_estimate.is_empty() {
            let b: Vec<String> = c
                .boundary_estimate
                .iter()
                .map(|b| format!("{} ({:.3} m)", b.scenario_id, b.margin_m))
                .collect();
            let _ = writeln!(md, "Smallest passing margins: {}\n", b.join(", "));
        }
        let falsified = c.falsified_ids();
        if !falsified.is_empty() {
            let _ = writeln!(md, "Falsifying scenarios: {}\n", falsified.join(", "));
        }
        for s in &c.shrunk {
            let _ = writeln!(
                md,
                "- shrunk {} after {} simulations: {}",
                s.scenario_id,
                s.simulations,
                s.verdict.classification.label()
            );
        }
        if !c.shrunk.is_empty() {
            let _ = writeln!(md);
        }
    }

    let _ = writeln!(md, "## Evidence\n");
    let _ = writeln!(md, "| Id | Kind | Targets | Source | Coverage | Result |");
    let _ = writeln!(md, "|---|---|---|---|---|---|");
    for c in campaigns {
        let e = &c.evidence;
        let _ = writeln!(
            md,
            "| {} | {:?} | {} | {} | {:.3} | {:?} |",
            e.id,
            e.kind,
            e.target_clauses.join(", "),
            e.source,
            e.coverage,
            e.result
        );
    }
    let _ = writeln!(md);

    let _ = writeln!(md, "## Claims\n");
    for c in claims {
        write_claim(&mut md, c, 0);
    }

    let json = serde_json::to_string_pretty(&ReportJson {
        schema_version: REPORT_SCHEMA_VERSION,
        model: &model.name,
        assurance_context: model.assurance_context,
        refinement,
        campaigns: campaigns
            .iter()
            .map(|c| CampaignSummary {
                id: &c.id,
                component: &c.component,
                master_seed: c.master_seed,
                total: c.counts.total,
                pass: c.counts.pass,
                falsified: c.counts.falsified,
                vacuous: c.counts.vacuous,
                coverage: c.coverage,
                min_separation_m: c.min_separation_m,
                falsifying_scenarios: c.falsified_ids(),
                shrunk: c.shrunk.iter().map(|s| s.scenario_id.as_str()).collect(),
            })
            .collect(),
        evidence: campaigns.iter().map(|c| &c.evidence).collect(),
        claims,
    })
    .expect("report serializes");

    let mut dot = String::new();
    let _ = writeln!(dot, "digraph {} {{", dot_id(title));
    let _ = writeln!(dot, "  rankdir=LR;");
    let _ = writeln!(dot, "  node [shape=box];");
    fn emit(dot: &mut String, c: &crate::model::Component, depth: usize) {
        let pad = "  ".repeat(depth + 1);
        if c.children.is_empty() {
            let _ = writeln!(dot, "{pad}{} [label=\"{}\\n{}\"];", dot_id(&c.id), c.id, c.kind);
            return;
        }
        let _ = writeln!(dot, "{pad}subgraph {} {{", dot_id(&format!("cluster_{}", c.id)));
        let _ = writeln!(dot, "{pad}  label=\"{} ({})\";", c.id, c.kind);
        for ch in &c.children {
            emit(dot, ch, depth + 1);
        }
        let _ = writeln!(dot, "{pad}}}");
    }
    if let Some(root) = &model.composite {
        emit(&mut dot, root, 0);
    }
    for c in &model.components {
        emit(&mut dot, c, 0);
    }
    let owner = |id: &str| idx.clause(id).map(|r| r.component.id.clone()).unwrap_or_default();
    for (a, g) in refinement.discharge.edges() {
        let _ = writeln!(
            dot,
            "  {} -> {} [label=\"{} -> {}\"];",
            dot_id(&owner(&a)),
            dot_id(&owner(&g)),
            a,
            g
        );
    }
    for (a, p) in &refinement.promoted {
        let _ = writeln!(
            dot,
            "  {} -> {} [style=dashed, label=\"{} promoted to {}\"];",
            dot_id(&owner(a)),
            dot_id(&owner(p)),
            a,
            p
        );
    }
    let _ = writeln!(dot, "}}");

    Ok(ReportBundle {
        markdown: md,
        json,
        dot,
    })
}
