//! Discharge of internal assumptions, guarantee inheritance and discharge
//! cycle detection over a component tree.
//!
//! An internal assumption is any assumption of a component that sits below a
//! composite. Each one is resolved to exactly one [`Discharge`] outcome:
//!
//! 1. explicit [`DependencyLink`]s win; a formal link whose provider does not
//!    cover the consumer is reported as incompatible;
//! 2. otherwise a unique sibling guarantee whose predicates cover it;
//! 3. otherwise an assumption of the parent composite that covers it
//!    (promotion);
//! 4. otherwise it stays undischarged.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};

use crate::contract::{predicates_cover, Clause, ClauseId, ClauseKind};
use crate::finding::{Finding, Rule};
use crate::model::{
    structural_findings, Component, ComponentKind, DependencyLink, LinkTiming, ModelIndex,
    RiskSource, SystemModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DischargeVia {
    Link,
    Entailment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum UndischargedReason {
    NoProvider,
    Incompatible { provider: ClauseId },
    Ambiguous { candidates: Vec<ClauseId> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Discharge {
    DischargedBy {
        provider: ClauseId,
        via: DischargeVia,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        risk_source: Option<RiskSource>,
    },
    Promoted {
        parent_clause: ClauseId,
        via: DischargeVia,
    },
    Undischarged {
        #[serde(flatten)]
        reason: UndischargedReason,
    },
}

impl Discharge {
    pub fn is_resolved(&self) -> bool {
        !matches!(self, Discharge::Undischarged { .. })
    }
}

/// Outcome for every internal assumption, keyed by clause id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DischargeMap {
    pub entries: BTreeMap<ClauseId, Discharge>,
    pub findings: Vec<Finding>,
}

impl DischargeMap {
    /// Assumption to guarantee edges, sorted by consumer id.
    pub fn edges(&self) -> Vec<(ClauseId, ClauseId)> {
        self.entries
            .iter()
            .filter_map(|(c, d)| match d {
                Discharge::DischargedBy { provider, .. } => Some((c.clone(), provider.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn promoted(&self) -> Vec<(ClauseId, ClauseId)> {
        self.entries
            .iter()
            .filter_map(|(c, d)| match d {
                Discharge::Promoted { parent_clause, .. } => Some((c.clone(), parent_clause.clone())),
                _ => None,
            })
            .collect()
    }

    pub fn undischarged(&self) -> Vec<&ClauseId> {
        self.entries
            .iter()
            .filter(|(_, d)| !d.is_resolved())
            .map(|(c, _)| c)
            .collect()
    }
}

fn blocking(f: &Finding) -> bool {
    matches!(
        f.rule,
        Rule::DuplicateId | Rule::DanglingReference | Rule::LinkKind | Rule::ComponentStructure
    )
}

/// Resolve every internal assumption. Fails with the structural findings
/// when ids do not resolve or the tree is malformed.
pub fn build_discharge_map(model: &SystemModel) -> Result<DischargeMap, Vec<Finding>> {
    let blocking: Vec<Finding> = structural_findings(model)
        .into_iter()
        .filter(blocking)
        .collect();
    if !blocking.is_empty() {
        return Err(blocking);
    }
    let idx = model.index();
    let mut map = DischargeMap::default();
    for r in &idx.order {
        let Some(parent) = r.parent else { continue };
        for a in &r.component.contract.assumptions {
            let (d, findings) = resolve(&idx, r.component, parent, a);
            map.findings.extend(findings);
            map.entries.insert(a.id.clone(), d);
        }
    }
    Ok(map)
}

fn resolve(
    idx: &ModelIndex<'_>,
    owner: &Component,
    parent: &Component,
    a: &Clause,
) -> (Discharge, Vec<Finding>) {
    let links = idx.links_from(&a.id);
    match links.as_slice() {
        [] => {}
        [link] => return resolve_link(idx, a, link),
        many => {
            let candidates: Vec<ClauseId> = many.iter().map(|l| l.provider_clause.clone()).collect();
            let f = Finding::new(
                Rule::AmbiguousDischarge,
                &a.id,
                format!("ambiguous discharge: several explicit links ({})", candidates.join(", ")),
            );
            return (
                Discharge::Undischarged {
                    reason: UndischargedReason::Ambiguous { candidates },
                },
                vec![f],
            );
        }
    }

    if a.is_informal() {
        return undischarged(a, "informal assumption has no explicit link");
    }

    let candidates: Vec<&Clause> = parent
        .children
        .iter()
        .filter(|c| c.id != owner.id)
        .flat_map(|c| c.contract.guarantees.iter())
        .filter(|g| predicates_cover(&g.predicates, &a.predicates))
        .collect();
    match candidates.as_slice() {
        [g] => {
            return (
                Discharge::DischargedBy {
                    provider: g.id.clone(),
                    via: DischargeVia::Entailment,
                    risk_source: None,
                },
                Vec::new(),
            )
        }
        [] => {}
        many => {
            let candidates: Vec<ClauseId> = many.iter().map(|g| g.id.clone()).collect();
            let f = Finding::new(
                Rule::AmbiguousDischarge,
                &a.id,
                format!(
                    "ambiguous discharge: entailed by {} with no explicit link",
                    candidates.join(", ")
                ),
            );
            return (
                Discharge::Undischarged {
                    reason: UndischargedReason::Ambiguous { candidates },
                },
                vec![f],
            );
        }
    }

    if let Some(pa) = parent
        .contract
        .assumptions
        .iter()
        .find(|pa| predicates_cover(&pa.predicates, &a.predicates))
    {
        return (
            Discharge::Promoted {
                parent_clause: pa.id.clone(),
                via: DischargeVia::Entailment,
            },
            Vec::new(),
        );
    }
    undischarged(a, "no sibling guarantee or parent assumption covers it")
}

fn undischarged(a: &Clause, why: &str) -> (Discharge, Vec<Finding>) {
    (
        Discharge::Undischarged {
            reason: UndischargedReason::NoProvider,
        },
        vec![Finding::new(Rule::Undischarged, &a.id, why)],
    )
}

fn resolve_link(idx: &ModelIndex<'_>, a: &Clause, link: &DependencyLink) -> (Discharge, Vec<Finding>) {
    // Structural validation guarantees the provider resolves.
    let provider = idx
        .clause(&link.provider_clause)
        .expect("link provider resolves after structural validation");
    let formal = !a.is_informal() && !provider.clause.is_informal();
    if formal && !predicates_cover(&provider.clause.predicates, &a.predicates) {
        let f = Finding::new(
            Rule::IncompatibleLink,
            &a.id,
            format!(
                "linked provider {} does not entail the assumption",
                provider.clause.id
            ),
        );
        return (
            Discharge::Undischarged {
                reason: UndischargedReason::Incompatible {
                    provider: provider.clause.id.clone(),
                },
            },
            vec![f],
        );
    }
    let d = match provider.clause.kind {
        ClauseKind::Guarantee => Discharge::DischargedBy {
            provider: provider.clause.id.clone(),
            via: DischargeVia::Link,
            risk_source: link.risk_source,
        },
        ClauseKind::Assumption => Discharge::Promoted {
            parent_clause: provider.clause.id.clone(),
            via: DischargeVia::Link,
        },
    };
    (d, Vec::new())
}

/// Which internal Decision guarantees take over one composite guarantee.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InheritanceCheck {
    pub composite_guarantee: ClauseId,
    pub inheritors: Vec<ClauseId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub pass: bool,
    pub discharge: DischargeMap,
    /// Internal assumptions aggregated into a parent composite assumption,
    /// as (internal assumption, composite assumption).
    pub promoted: Vec<(ClauseId, ClauseId)>,
    pub inheritance: Vec<InheritanceCheck>,
    /// Same-tick discharge cycles, each as a sorted list of clause ids.
    pub cycles: Vec<Vec<ClauseId>>,
    pub findings: Vec<Finding>,
}

/// Full refinement check: structure, discharge, promotion, inheritance and
/// cycles. Always produces a report; `pass` is false on any finding.
pub fn check_refinement(model: &SystemModel) -> RefinementReport {
    let mut findings: Vec<Finding> = structural_findings(model)
        .into_iter()
        .filter(blocking)
        .collect();
    let discharge = match build_discharge_map(model) {
        Ok(m) => m,
        Err(_) => DischargeMap::default(),
    };
    findings.extend(discharge.findings.iter().cloned());

    let idx = model.index();
    let inheritance = if findings.is_empty() {
        inheritance_checks(&idx, &mut findings)
    } else {
        Vec::new()
    };
    let cycles = if findings.iter().any(blocking) {
        Vec::new()
    } else {
        discharge_cycles(&idx)
    };
    for cycle in &cycles {
        let comps: BTreeSet<&str> = cycle
            .iter()
            .filter_map(|c| c.rsplit_once('.').map(|(p, _)| p))
            .collect();
        findings.push(Finding::new(
            Rule::DischargeCycle,
            cycle.join(","),
            format!(
                "same-tick discharge cycle among {{{}}}",
                comps.into_iter().collect::<Vec<_>>().join(", ")
            ),
        ));
    }
    RefinementReport {
        pass: findings.is_empty(),
        promoted: discharge.promoted(),
        discharge,
        inheritance,
        cycles,
        findings,
    }
}

fn inheritance_checks(idx: &ModelIndex<'_>, findings: &mut Vec<Finding>) -> Vec<InheritanceCheck> {
    let mut out = Vec::new();
    for comp in idx.composites() {
        let decisions: Vec<&Component> = comp
            .children
            .iter()
            .filter(|c| c.kind == ComponentKind::Decision)
            .collect();
        for g in &comp.contract.guarantees {
            let inheritors: Vec<&Clause> = decisions
                .iter()
                .flat_map(|d| d.contract.guarantees.iter())
                .filter(|dg| dg.inherits.as_deref() == Some(g.id.as_str()))
                .collect();
            match inheritors.as_slice() {
                [] => findings.push(Finding::new(
                    Rule::NotInherited,
                    &g.id,
                    format!("{} not inherited by any Decision guarantee of {}", g.id, comp.id),
                )),
                [one] => {
                    if !one.is_informal()
                        && !g.is_informal()
                        && !predicates_cover(&one.predicates, &g.predicates)
                    {
                        findings.push(Finding::new(
                            Rule::WeakInheritance,
                            &one.id,
                            format!("{} inherits {} with a weaker predicate", one.id, g.id),
                        ));
                    }
                }
                many => findings.push(Finding::new(
                    Rule::MultipleInheritors,
                    &g.id,
                    format!(
                        "{} inherited by several guarantees: {}",
                        g.id,
                        many.iter().map(|c| c.id.as_str()).collect::<Vec<_>>().join(", ")
                    ),
                )),
            }
            out.push(InheritanceCheck {
                composite_guarantee: g.id.clone(),
                inheritors: inheritors.iter().map(|c| c.id.clone()).collect(),
            });
        }
    }
    out
}

/// Cycles in the same-tick dependency graph. Edges run from a consumer
/// assumption to its linked provider, and from each guarantee to the
/// assumptions of its own component.
pub fn discharge_cycles(idx: &ModelIndex<'_>) -> Vec<Vec<ClauseId>> {
    let mut graph: DiGraph<&str, ()> = DiGraph::new();
    let mut nodes: BTreeMap<&str, NodeIndex> = BTreeMap::new();
    for c in idx.clauses() {
        nodes.insert(c.clause.id.as_str(), graph.add_node(c.clause.id.as_str()));
    }
    for link in &idx.links {
        if link.timing != LinkTiming::SameTick {
            continue;
        }
        if let (Some(&a), Some(&b)) = (
            nodes.get(link.consumer_clause.as_str()),
            nodes.get(link.provider_clause.as_str()),
        ) {
            graph.add_edge(a, b, ());
        }
    }
    for r in &idx.order {
        let contract = &r.component.contract;
        for g in &contract.guarantees {
            for a in &contract.assumptions {
                graph.add_edge(nodes[g.id.as_str()], nodes[a.id.as_str()], ());
            }
        }
    }
    let mut cycles: Vec<Vec<ClauseId>> = tarjan_scc(&graph)
        .into_iter()
        .filter(|scc| scc.len() > 1)
        .map(|scc| {
            let mut ids: Vec<ClauseId> = scc.iter().map(|n| graph[*n].to_string()).collect();
            ids.sort();
            ids
        })
        .collect();
    cycles.sort();
    cycles
}
