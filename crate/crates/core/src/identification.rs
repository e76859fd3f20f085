//! Responsibility structure rules and the causal-factor driven derivation of
//! contract clause stubs.
//!
//! Causal factors are user-supplied records; each one is classified by the
//! risk source it acts through and turned into clause stubs that a person
//! merges into the model by hand:
//!
//! | risk source | stubs |
//! |---|---|
//! | RS1 control input | Decision assumption |
//! | RS2 decision implementation | sub-identification marker on the Decision |
//! | RS3 SITAW input | Decision assumption + SITAW guarantee |
//! | RS4 action capability | Decision assumption + Action guarantee + sub-identification marker on the Action |

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{predicates_cover, Clause, ClauseId, ClauseKind, PredicateSpec};
use crate::finding::{Finding, Rule};
use crate::model::{Component, ComponentKind, ModelIndex, RiskSource, SystemModel};

/// An unsafe-control scenario attributed to one risk source of a Decision
/// component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CausalFactorRecord {
    pub id: String,
    pub unsafe_control_action: String,
    pub scenario: String,
    /// Risk source number, 1 to 4.
    pub rs_type: u8,
    pub target_decision: String,
    /// Clauses already written for this factor.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub realized_by: Vec<ClauseId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubSection {
    Assumptions,
    Guarantees,
    /// Not a clause: the cause lies inside `component` and needs its own
    /// identification round.
    SubIdentification,
}

/// One suggested contract addition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseStub {
    pub factor: String,
    pub risk_source: RiskSource,
    pub component: String,
    pub section: StubSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggested_id: Option<ClauseId>,
    /// Predicate variant the clause is expected to take once formalized.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicate_variant: Option<String>,
    pub text: String,
}

impl ClauseStub {
    pub fn is_marker(&self) -> bool {
        self.section == StubSection::SubIdentification
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentificationError {
    #[error("causal factor {factor}: rs_type {rs_type} is not in 1..=4")]
    InvalidRsType { factor: String, rs_type: u8 },
    #[error("causal factor {factor}: component {component} does not exist")]
    UnknownComponent { factor: String, component: String },
    #[error("causal factor {factor}: {component} is a {kind} component, not a Decision")]
    NotDecision {
        factor: String,
        component: String,
        kind: ComponentKind,
    },
    #[error("causal factor {factor}: {decision} has no sibling {kind} component")]
    MissingSibling {
        factor: String,
        decision: String,
        kind: ComponentKind,
    },
}

/// Hands out the next free clause index per (component, kind), including
/// indices already handed out in this run.
#[derive(Debug, Default)]
pub struct StubIdAllocator {
    next: BTreeMap<(String, char), usize>,
}

impl StubIdAllocator {
    fn allocate(&mut self, component: &Component, kind: ClauseKind) -> ClauseId {
        let letter = kind.letter();
        let entry = self
            .next
            .entry((component.id.clone(), letter))
            .or_insert_with(|| {
                let clauses = match kind {
                    ClauseKind::Assumption => &component.contract.assumptions,
                    ClauseKind::Guarantee => &component.contract.guarantees,
                };
                clauses
                    .iter()
                    .filter_map(|c| c.local_id().strip_prefix(letter)?.parse::<usize>().ok())
                    .max()
                    .unwrap_or(0)
                    + 1
            });
        let id = format!("{}.{}{}", component.id, letter, entry);
        *entry += 1;
        id
    }
}

fn resolve_target<'a>(
    cf: &CausalFactorRecord,
    idx: &ModelIndex<'a>,
) -> Result<(RiskSource, &'a Component), IdentificationError> {
    let rs = RiskSource::try_from(cf.rs_type).map_err(|_| IdentificationError::InvalidRsType {
        factor: cf.id.clone(),
        rs_type: cf.rs_type,
    })?;
    let target = idx
        .component(&cf.target_decision)
        .ok_or_else(|| IdentificationError::UnknownComponent {
            factor: cf.id.clone(),
            component: cf.target_decision.clone(),
        })?
        .component;
    if target.kind != ComponentKind::Decision {
        return Err(IdentificationError::NotDecision {
            factor: cf.id.clone(),
            component: target.id.clone(),
            kind: target.kind,
        });
    }
    Ok((rs, target))
}

fn sibling<'a>(
    cf: &CausalFactorRecord,
    idx: &ModelIndex<'a>,
    decision: &Component,
    kind: ComponentKind,
) -> Result<&'a Component, IdentificationError> {
    idx.siblings_of_kind(&decision.id, kind)
        .into_iter()
        .next()
        .ok_or_else(|| IdentificationError::MissingSibling {
            factor: cf.id.clone(),
            decision: decision.id.clone(),
            kind,
        })
}

/// Stubs for one factor, numbered after the clauses already in the model.
pub fn derive_clause_stubs(
    cf: &CausalFactorRecord,
    model: &SystemModel,
) -> Result<Vec<ClauseStub>, IdentificationError> {
    derive_with(cf, &model.index(), &mut StubIdAllocator::default())
}

/// Stubs for a list of factors with ids that do not collide across factors.
/// Stops at the first invalid factor.
pub fn derive_all_stubs(
    cfs: &[CausalFactorRecord],
    model: &SystemModel,
) -> Result<Vec<ClauseStub>, IdentificationError> {
    let idx = model.index();
    let mut alloc = StubIdAllocator::default();
    let mut out = Vec::new();
    for cf in cfs {
        out.extend(derive_with(cf, &idx, &mut alloc)?);
    }
    Ok(out)
}

fn derive_with(
    cf: &CausalFactorRecord,
    idx: &ModelIndex<'_>,
    alloc: &mut StubIdAllocator,
) -> Result<Vec<ClauseStub>, IdentificationError> {
    let (rs, decision) = resolve_target(cf, idx)?;
    let scenario = cf.scenario.trim();
    let stub = |alloc: &mut StubIdAllocator, comp: &Component, section: StubSection, variant: Option<&str>, text: String| {
        let suggested_id = match section {
            StubSection::Assumptions => Some(alloc.allocate(comp, ClauseKind::Assumption)),
            StubSection::Guarantees => Some(alloc.allocate(comp, ClauseKind::Guarantee)),
            StubSection::SubIdentification => None,
        };
        ClauseStub {
            factor: cf.id.clone(),
            risk_source: rs,
            component: comp.id.clone(),
            section,
            suggested_id,
            predicate_variant: variant.map(str::to_string),
            text,
        }
    };
    let marker = |comp: &Component| ClauseStub {
        factor: cf.id.clone(),
        risk_source: rs,
        component: comp.id.clone(),
        section: StubSection::SubIdentification,
        suggested_id: None,
        predicate_variant: None,
        text: format!("requires sub-identification of {} (scenario: {scenario})", comp.id),
    };
    let stubs = match rs {
        RiskSource::RS1 => vec![stub(
            alloc,
            decision,
            StubSection::Assumptions,
            Some("config_valid"),
            format!("Assumes its control input and configuration are valid, so that the following cannot occur: {scenario}"),
        )],
        RiskSource::RS2 => vec![marker(decision)],
        RiskSource::RS3 => {
            let sitaw = sibling(cf, idx, decision, ComponentKind::Sitaw)?;
            vec![
                stub(
                    alloc,
                    decision,
                    StubSection::Assumptions,
                    Some("state_error_bound"),
                    format!("Assumes it receives {} data within the agreed accuracy, covering: {scenario}", sitaw.id),
                ),
                stub(
                    alloc,
                    sitaw,
                    StubSection::Guarantees,
                    Some("state_error_bound"),
                    format!("Guarantees to provide the data {} relies on within the agreed accuracy, covering: {scenario}", decision.id),
                ),
            ]
        }
        RiskSource::RS4 => {
            let action = sibling(cf, idx, decision, ComponentKind::Action)?;
            vec![
                stub(
                    alloc,
                    decision,
                    StubSection::Assumptions,
                    Some("tracking_bound"),
                    format!("Assumes {} brings the vessel into the commanded state within the agreed accuracy, covering: {scenario}", action.id),
                ),
                stub(
                    alloc,
                    action,
                    StubSection::Guarantees,
                    Some("tracking_bound"),
                    format!("Guarantees to bring the vessel into the state commanded by {} within the agreed accuracy, covering: {scenario}", decision.id),
                ),
                marker(action),
            ]
        }
    };
    Ok(stubs)
}

/// One row of the risk-source coverage table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub component: String,
    pub rs_type: RiskSource,
    /// Causal factors of this risk source targeting the component.
    pub count: usize,
    /// Clause stubs of those factors not yet realized by a model clause.
    pub pending: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CoverageTable {
    pub rows: Vec<CoverageRow>,
}

impl CoverageTable {
    pub fn row(&self, component: &str, rs: RiskSource) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.component == component && r.rs_type == rs)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["component", "rs_type", "count", "pending"])
            .expect("in-memory csv");
        for r in &self.rows {
            w.write_record([
                r.component.clone(),
                r.rs_type.to_string(),
                r.count.to_string(),
                r.pending.to_string(),
            ])
            .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }
}

/// Expected (component, kind) slots of a factor that no `realized_by` clause
/// fills. Factors whose required sibling is missing count every slot that
/// could not be placed.
fn pending_for(cf: &CausalFactorRecord, rs: RiskSource, decision: &Component, idx: &ModelIndex<'_>) -> usize {
    let mut slots: Vec<(Option<String>, ClauseKind)> = match rs {
        RiskSource::RS1 => vec![(Some(decision.id.clone()), ClauseKind::Assumption)],
        RiskSource::RS2 => Vec::new(),
        RiskSource::RS3 | RiskSource::RS4 => {
            let kind = if rs == RiskSource::RS3 {
                ComponentKind::Sitaw
            } else {
                ComponentKind::Action
            };
            let sib = idx.siblings_of_kind(&decision.id, kind).first().map(|c| c.id.clone());
            vec![
                (Some(decision.id.clone()), ClauseKind::Assumption),
                (sib, ClauseKind::Guarantee),
            ]
        }
    };
    let mut realized: Vec<&Clause> = cf
        .realized_by
        .iter()
        .filter_map(|id| idx.clause(id).map(|c| c.clause))
        .collect();
    let mut pending = 0;
    for (comp, kind) in slots.drain(..) {
        let pos = comp.and_then(|comp| {
            realized
                .iter()
                .position(|c| c.kind == kind && c.owner_prefix() == Some(comp.as_str()))
        });
        match pos {
            Some(i) => {
                realized.remove(i);
            }
            None => pending += 1,
        }
    }
    pending
}

/// Factor counts and pending stubs per Decision component and risk source,
/// ordered by component id then risk source.
pub fn risk_source_coverage(model: &SystemModel, cfs: &[CausalFactorRecord]) -> CoverageTable {
    let idx = model.index();
    let mut decisions: Vec<&Component> = idx
        .order
        .iter()
        .map(|r| r.component)
        .filter(|c| c.kind == ComponentKind::Decision)
        .collect();
    decisions.sort_by(|a, b| a.id.cmp(&b.id));
    let mut rows = Vec::new();
    for d in decisions {
        for rs in RiskSource::ALL {
            let mut row = CoverageRow {
                component: d.id.clone(),
                rs_type: rs,
                count: 0,
                pending: 0,
            };
            for cf in cfs
                .iter()
                .filter(|cf| cf.target_decision == d.id && cf.rs_type == rs.number())
            {
                row.count += 1;
                row.pending += pending_for(cf, rs, d, &idx);
            }
            rows.push(row);
        }
    }
    CoverageTable { rows }
}

fn has_predicate(c: &Clause, pred: impl Fn(&PredicateSpec) -> bool) -> bool {
    c.predicates.iter().any(pred)
}

/// Responsibility delegation rules over every composite.
pub fn check_responsibility_structure(model: &SystemModel) -> Vec<Finding> {
    let idx = model.index();
    let mut out = Vec::new();
    for comp in idx.composites() {
        let decisions: Vec<&Component> = comp
            .children
            .iter()
            .filter(|c| c.kind == ComponentKind::Decision)
            .collect();
        if comp.is_control_composite() {
            if decisions.is_empty() {
                out.push(Finding::new(
                    Rule::NoDecisionComponent,
                    &comp.id,
                    "control composite has no Decision component to take its responsibility",
                ));
            } else if decisions.len() > 1 && comp.responsibility_split.is_empty() {
                out.push(Finding::new(
                    Rule::SharedResponsibilityUndeclared,
                    &comp.id,
                    format!(
                        "shared responsibility undeclared: {} Decision components ({}) and no responsibility split",
                        decisions.len(),
                        decisions.iter().map(|d| d.id.as_str()).collect::<Vec<_>>().join(", ")
                    ),
                ));
            }
        }
        if !comp.responsibility_split.is_empty() {
            out.extend(split_findings(comp));
        }
        for g in &comp.contract.guarantees {
            let inherited = decisions.iter().any(|d| {
                d.contract
                    .guarantees
                    .iter()
                    .any(|dg| dg.inherits.as_deref() == Some(g.id.as_str()))
            });
            if !inherited && !decisions.is_empty() {
                out.push(Finding::new(
                    Rule::NotInherited,
                    &g.id,
                    format!("{} not inherited by any Decision guarantee of {}", g.id, comp.id),
                ));
            }
        }
        for child in &comp.children {
            for g in &child.contract.guarantees {
                match child.kind {
                    ComponentKind::Sitaw
                        if !has_predicate(g, |p| matches!(p, PredicateSpec::StateErrorBound { .. })) =>
                    {
                        out.push(Finding::new(
                            Rule::SitawGuaranteeLacksAccuracy,
                            &g.id,
                            "SITAW guarantee lacks accuracy: no state error bound",
                        ))
                    }
                    ComponentKind::Action
                        if !has_predicate(g, |p| matches!(p, PredicateSpec::TrackingBound { .. })) =>
                    {
                        out.push(Finding::new(
                            Rule::ActionGuaranteeLacksAccuracy,
                            &g.id,
                            "Action guarantee lacks accuracy: no tracking bound",
                        ))
                    }
                    _ => {}
                }
            }
        }
        for d in &decisions {
            for sib in comp
                .children
                .iter()
                .filter(|c| matches!(c.kind, ComponentKind::Sitaw | ComponentKind::Action))
            {
                for g in sib
                    .contract
                    .guarantees
                    .iter()
                    .filter(|g| g.predicates.iter().any(PredicateSpec::is_accuracy))
                {
                    if !assumed_by(&idx, d, g) {
                        out.push(Finding::new(
                            Rule::AccuracyNotAssumed,
                            &d.id,
                            format!("no assumption of {} relies on accuracy guarantee {}", d.id, g.id),
                        ));
                    }
                }
            }
        }
    }
    out
}

fn assumed_by(idx: &ModelIndex<'_>, decision: &Component, g: &Clause) -> bool {
    decision.contract.assumptions.iter().any(|a| {
        idx.links_from(&a.id).iter().any(|l| l.provider_clause == g.id)
            || predicates_cover(&g.predicates, &a.predicates)
    })
}

fn split_findings(comp: &Component) -> Vec<Finding> {
    let mut out = Vec::new();
    for g in &comp.contract.guarantees {
        let owners: Vec<&str> = comp
            .responsibility_split
            .iter()
            .filter(|s| s.guarantees.contains(&g.id))
            .map(|s| s.decision.as_str())
            .collect();
        match owners.as_slice() {
            [owner] => {
                let inherits = comp
                    .children
                    .iter()
                    .find(|c| c.id == *owner)
                    .is_some_and(|d| {
                        d.contract
                            .guarantees
                            .iter()
                            .any(|dg| dg.inherits.as_deref() == Some(g.id.as_str()))
                    });
                if !inherits {
                    out.push(Finding::new(
                        Rule::InvalidResponsibilitySplit,
                        &g.id,
                        format!("split assigns {} to {owner}, which has no guarantee inheriting it", g.id),
                    ));
                }
            }
            [] => out.push(Finding::new(
                Rule::InvalidResponsibilitySplit,
                &g.id,
                format!("responsibility split of {} does not assign {}", comp.id, g.id),
            )),
            many => out.push(Finding::new(
                Rule::InvalidResponsibilitySplit,
                &g.id,
                format!("{} assigned to several Decision components: {}", g.id, many.join(", ")),
            )),
        }
    }
    out
}
