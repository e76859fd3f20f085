//! System model: a typed component tree with contracts, dependency links
//! between assumption and guarantee clauses, and the operational design
//! domain record that scenario generation draws from.
//!
//! File layout (JSON):
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "name": "...",
//!   "assurance_context": "in_context" | "out_of_context",
//!   "composite":  { component tree under assessment },
//!   "components": [ environment entities, e.g. the ferry responsible ],
//!   "links":      [ { "consumer_clause", "provider_clause", "risk_source", "timing", "note" } ]
//! }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contract::{validate_contract, Clause, ClauseId, ClauseKind, Contract};
use crate::finding::{Finding, Rule};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentKind {
    Decision,
    #[serde(rename = "SITAW")]
    Sitaw,
    Action,
    Resource,
    Composite,
    ExternalEntity,
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentKind::Decision => "Decision",
            ComponentKind::Sitaw => "SITAW",
            ComponentKind::Action => "Action",
            ComponentKind::Resource => "Resource",
            ComponentKind::Composite => "Composite",
            ComponentKind::ExternalEntity => "ExternalEntity",
        })
    }
}

/// Risk sources on the control structure: control input to the decision
/// component, its own implementation, SITAW input, and action capability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RiskSource {
    RS1,
    RS2,
    RS3,
    RS4,
}

impl RiskSource {
    pub const ALL: [RiskSource; 4] = [RiskSource::RS1, RiskSource::RS2, RiskSource::RS3, RiskSource::RS4];

    pub fn number(self) -> u8 {
        match self {
            RiskSource::RS1 => 1,
            RiskSource::RS2 => 2,
            RiskSource::RS3 => 3,
            RiskSource::RS4 => 4,
        }
    }
}

impl TryFrom<u8> for RiskSource {
    type Error = u8;

    fn try_from(v: u8) -> Result<Self, u8> {
        match v {
            1 => Ok(RiskSource::RS1),
            2 => Ok(RiskSource::RS2),
            3 => Ok(RiskSource::RS3),
            4 => Ok(RiskSource::RS4),
            other => Err(other),
        }
    }
}

impl fmt::Display for RiskSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RS{}", self.number())
    }
}

/// Whether a link is consumed within the same control tick. Only same-tick
/// links take part in cycle detection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkTiming {
    #[default]
    SameTick,
    NextTick,
}

/// Explicit discharge of an assumption. The provider is normally a guarantee;
/// an assumption of the consumer's parent composite makes it a promotion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencyLink {
    pub consumer_clause: ClauseId,
    pub provider_clause: ClauseId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk_source: Option<RiskSource>,
    #[serde(default, skip_serializing_if = "is_same_tick")]
    pub timing: LinkTiming,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

fn is_same_tick(t: &LinkTiming) -> bool {
    *t == LinkTiming::SameTick
}

impl DependencyLink {
    pub fn new(consumer: &str, provider: &str) -> Self {
        Self {
            consumer_clause: consumer.to_string(),
            provider_clause: provider.to_string(),
            risk_source: None,
            timing: LinkTiming::SameTick,
            note: None,
        }
    }
}

/// Declared ownership of composite guarantees when several Decision
/// components share the overall responsibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponsibilitySplit {
    pub decision: String,
    pub guarantees: Vec<ClauseId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssuranceContext {
    #[default]
    InContext,
    OutOfContext,
}

/// Closed interval written as `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Interval {
            lower: v[0],
            upper: v[1],
        }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lower, i.upper]
    }
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteSpec {
    pub id: String,
    /// (east, north) in metres.
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub v_max_mps: f64,
}

/// Simulation settings that the contracts leave open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationDefaults {
    pub dt_s: f64,
    pub duration_s: f64,
    pub control_period_s: f64,
    pub horizon_s: f64,
    pub dv_mps: f64,
    pub lookahead_dt_s: f64,
    pub dp_time_constant_s: f64,
    pub dp_disturbance_speed_mps2: f64,
    pub dp_disturbance_cross_track_mps: f64,
    pub braking_contingency: bool,
}

impl Default for SimulationDefaults {
    fn default() -> Self {
        Self {
            dt_s: 0.1,
            duration_s: 300.0,
            control_period_s: 1.0,
            horizon_s: 60.0,
            dv_mps: 0.25,
            lookahead_dt_s: 0.5,
            dp_time_constant_s: 2.0,
            dp_disturbance_speed_mps2: 0.02,
            dp_disturbance_cross_track_mps: 0.3,
            braking_contingency: false,
        }
    }
}

/// Operational design domain of a composite: routes, own-ship geometry and
/// the envelope of obstacle traffic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OddRecord {
    pub routes: Vec<RouteSpec>,
    pub own_length_m: f64,
    pub own_beam_m: f64,
    pub obstacle_count: usize,
    pub obstacle_length_m: f64,
    pub obstacle_beam_m: f64,
    /// Initial range from the route start.
    pub initial_range_m: Interval,
    /// Initial bearing from the route start, clockwise from north.
    pub initial_bearing_rad: Interval,
    /// Obstacle course over ground, clockwise from north.
    pub obstacle_course_rad: Interval,
    pub obstacle_speed_mps: Interval,
    #[serde(default)]
    pub simulation: SimulationDefaults,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    pub kind: ComponentKind,
    #[serde(default)]
    pub contract: Contract,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<Component>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<DependencyLink>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub responsibility_split: Vec<ResponsibilitySplit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub odd: Option<OddRecord>,
}

impl Component {
    pub fn new(id: &str, kind: ComponentKind) -> Self {
        Self {
            id: id.to_string(),
            kind,
            contract: Contract::default(),
            children: Vec::new(),
            links: Vec::new(),
            responsibility_split: Vec::new(),
            odd: None,
        }
    }

    pub fn is_control_composite(&self) -> bool {
        self.kind == ComponentKind::Composite
            && self.children.iter().any(|c| {
                matches!(
                    c.kind,
                    ComponentKind::Decision | ComponentKind::Sitaw | ComponentKind::Action
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub assurance_context: AssuranceContext,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite: Option<Component>,
    #[serde(default)]
    pub components: Vec<Component>,
    #[serde(default)]
    pub links: Vec<DependencyLink>,
}

fn default_schema() -> u32 {
    MODEL_SCHEMA_VERSION
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("model fails structural validation ({} findings)", .0.len())]
    Structural(Vec<Finding>),
    #[error("unsupported model schema version {0}")]
    Schema(u32),
}

impl ModelError {
    pub fn from_json(e: serde_json::Error) -> Self {
        ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

impl SystemModel {
    pub fn empty() -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            name: String::new(),
            assurance_context: AssuranceContext::InContext,
            composite: None,
            components: Vec::new(),
            links: Vec::new(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, ModelError> {
        let m: SystemModel = serde_json::from_str(s).map_err(ModelError::from_json)?;
        if m.schema_version != MODEL_SCHEMA_VERSION {
            return Err(ModelError::Schema(m.schema_version));
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn index(&self) -> ModelIndex<'_> {
        ModelIndex::build(self)
    }

    pub fn component_mut(&mut self, id: &str) -> Option<&mut Component> {
        fn find<'a>(c: &'a mut Component, id: &str) -> Option<&'a mut Component> {
            if c.id == id {
                return Some(c);
            }
            c.children.iter_mut().find_map(|ch| find(ch, id))
        }
        if let Some(found) = self.composite.as_mut().and_then(|c| find(c, id)) {
            return Some(found);
        }
        self.components.iter_mut().find_map(|c| find(c, id))
    }

    pub fn clause_mut(&mut self, id: &str) -> Option<&mut Clause> {
        let owner = id.rsplit_once('.')?.0.to_string();
        let comp = self.component_mut(&owner)?;
        comp.contract
            .assumptions
            .iter_mut()
            .chain(comp.contract.guarantees.iter_mut())
            .find(|c| c.id == id)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ComponentRef<'a> {
    pub component: &'a Component,
    pub parent: Option<&'a Component>,
}

#[derive(Debug, Clone, Copy)]
pub struct ClauseRef<'a> {
    pub clause: &'a Clause,
    pub component: &'a Component,
    pub parent: Option<&'a Component>,
}

/// Lookup tables over a model. Duplicate ids keep the first occurrence and
/// are listed in `duplicates`.
#[derive(Debug)]
pub struct ModelIndex<'a> {
    pub model: &'a SystemModel,
    /// Components in tree order: composite pre-order, then environment.
    pub order: Vec<ComponentRef<'a>>,
    components: BTreeMap<&'a str, ComponentRef<'a>>,
    clauses: BTreeMap<&'a str, ClauseRef<'a>>,
    pub links: Vec<&'a DependencyLink>,
    pub duplicates: Vec<String>,
}

impl<'a> ModelIndex<'a> {
    fn build(model: &'a SystemModel) -> Self {
        let mut idx = ModelIndex {
            model,
            order: Vec::new(),
            components: BTreeMap::new(),
            clauses: BTreeMap::new(),
            links: model.links.iter().collect(),
            duplicates: Vec::new(),
        };
        fn walk<'a>(idx: &mut ModelIndex<'a>, c: &'a Component, parent: Option<&'a Component>) {
            let r = ComponentRef {
                component: c,
                parent,
            };
            idx.order.push(r);
            if idx.components.insert(c.id.as_str(), r).is_some() {
                idx.duplicates.push(c.id.clone());
            }
            for clause in c.contract.clauses() {
                let cr = ClauseRef {
                    clause,
                    component: c,
                    parent,
                };
                if idx.clauses.contains_key(clause.id.as_str()) {
                    idx.duplicates.push(clause.id.clone());
                } else {
                    idx.clauses.insert(clause.id.as_str(), cr);
                }
            }
            idx.links.extend(c.links.iter());
            for ch in &c.children {
                walk(idx, ch, Some(c));
            }
        }
        if let Some(root) = &model.composite {
            walk(&mut idx, root, None);
        }
        for c in &model.components {
            walk(&mut idx, c, None);
        }
        idx
    }

    pub fn component(&self, id: &str) -> Option<ComponentRef<'a>> {
        self.components.get(id).copied()
    }

    pub fn clause(&self, id: &str) -> Option<ClauseRef<'a>> {
        self.clauses.get(id).copied()
    }

    pub fn clauses(&self) -> impl Iterator<Item = ClauseRef<'a>> + '_ {
        self.order
            .iter()
            .flat_map(|r| r.component.contract.clauses().map(move |clause| ClauseRef {
                clause,
                component: r.component,
                parent: r.parent,
            }))
    }

    /// All composites in tree order.
    pub fn composites(&self) -> impl Iterator<Item = &'a Component> + '_ {
        self.order
            .iter()
            .map(|r| r.component)
            .filter(|c| c.kind == ComponentKind::Composite)
    }

    /// Components of `kind` sharing `id`'s parent composite.
    pub fn siblings_of_kind(&self, id: &str, kind: ComponentKind) -> Vec<&'a Component> {
        let Some(parent) = self.component(id).and_then(|r| r.parent) else {
            return Vec::new();
        };
        parent
            .children
            .iter()
            .filter(|c| c.id != id && c.kind == kind)
            .collect()
    }

    /// Nearest ancestor carrying an ODD record (including `id` itself).
    pub fn odd_for(&self, id: &str) -> Option<&'a OddRecord> {
        let mut cur = self.component(id)?;
        loop {
            if let Some(odd) = &cur.component.odd {
                return Some(odd);
            }
            cur = self.component(&cur.parent?.id)?;
        }
    }

    pub fn links_from(&self, consumer: &str) -> Vec<&'a DependencyLink> {
        self.links
            .iter()
            .copied()
            .filter(|l| l.consumer_clause == consumer)
            .collect()
    }
}

/// Tree shape, id uniqueness, clause id ownership and link resolution.
/// Contract template findings are included for every component.
pub fn structural_findings(model: &SystemModel) -> Vec<Finding> {
    let idx = model.index();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for dup in &idx.duplicates {
        if seen.insert(dup.clone()) {
            out.push(Finding::new(Rule::DuplicateId, dup, "id is not unique in the model"));
        }
    }
    for r in &idx.order {
        let c = r.component;
        match (c.kind, c.children.is_empty()) {
            (ComponentKind::Composite, true) => out.push(Finding::new(
                Rule::ComponentStructure,
                &c.id,
                "composite component has no children",
            )),
            (k, false) if k != ComponentKind::Composite => out.push(Finding::new(
                Rule::ComponentStructure,
                &c.id,
                format!("{k} component cannot have children"),
            )),
            _ => {}
        }
        out.extend(validate_contract(&c.contract, c.kind).into_iter().map(|mut f| {
            if f.rule == Rule::MissingGuarantee {
                f.location = c.id.clone();
            }
            f
        }));
        for clause in c.contract.clauses() {
            if let Some(prefix) = clause.owner_prefix() {
                if prefix != c.id {
                    out.push(Finding::new(
                        Rule::MalformedClauseId,
                        &clause.id,
                        format!("clause id prefix does not name its owner {}", c.id),
                    ));
                }
            }
            if let Some(target) = &clause.inherits {
                let parent_ok = r
                    .parent
                    .and_then(|p| p.contract.guarantees.iter().find(|g| &g.id == target))
                    .is_some();
                if !parent_ok {
                    out.push(Finding::new(
                        Rule::DanglingReference,
                        &clause.id,
                        format!("inherits {target}, which is not a guarantee of the parent composite"),
                    ));
                }
            }
        }
        for split in &c.responsibility_split {
            let decision_ok = c
                .children
                .iter()
                .any(|ch| ch.id == split.decision && ch.kind == ComponentKind::Decision);
            if !decision_ok {
                out.push(Finding::new(
                    Rule::DanglingReference,
                    &c.id,
                    format!("responsibility split names {} which is not a Decision child", split.decision),
                ));
            }
            for g in &split.guarantees {
                if !c.contract.guarantees.iter().any(|x| &x.id == g) {
                    out.push(Finding::new(
                        Rule::DanglingReference,
                        &c.id,
                        format!("responsibility split lists unknown guarantee {g}"),
                    ));
                }
            }
        }
    }
    for link in &idx.links {
        out.extend(link_findings(&idx, link));
    }
    out
}

fn link_location(link: &DependencyLink) -> String {
    format!("{}->{}", link.consumer_clause, link.provider_clause)
}

fn link_findings(idx: &ModelIndex<'_>, link: &DependencyLink) -> Vec<Finding> {
    let loc = link_location(link);
    let mut out = Vec::new();
    let consumer = idx.clause(&link.consumer_clause);
    let provider = idx.clause(&link.provider_clause);
    if consumer.is_none() {
        out.push(Finding::new(
            Rule::DanglingReference,
            &loc,
            format!("consumer clause {} does not exist", link.consumer_clause),
        ));
    }
    if provider.is_none() {
        out.push(Finding::new(
            Rule::DanglingReference,
            &loc,
            format!("provider clause {} does not exist", link.provider_clause),
        ));
    }
    let (Some(consumer), Some(provider)) = (consumer, provider) else {
        return out;
    };
    if consumer.clause.kind != ClauseKind::Assumption {
        out.push(Finding::new(Rule::LinkKind, &loc, "consumer must be an assumption"));
    }
    let promotion = provider.clause.kind == ClauseKind::Assumption
        && consumer.parent.map(|p| p.id.as_str()) == Some(provider.component.id.as_str());
    if provider.clause.kind != ClauseKind::Guarantee && !promotion {
        out.push(Finding::new(
            Rule::LinkKind,
            &loc,
            "provider must be a guarantee or an assumption of the consumer's parent composite",
        ));
    }
    if let Some(rs) = link.risk_source {
        let ck = consumer.component.kind;
        let pk = provider.component.kind;
        let ok = match rs {
            RiskSource::RS1 | RiskSource::RS2 => ck == ComponentKind::Decision,
            RiskSource::RS3 => ck == ComponentKind::Decision && pk == ComponentKind::Sitaw,
            RiskSource::RS4 => ck == ComponentKind::Decision && pk == ComponentKind::Action,
        };
        if !ok {
            out.push(Finding::new(
                Rule::RiskSourceMismatch,
                &loc,
                format!("{rs} link connects a {ck} assumption to a {pk} clause"),
            ));
        }
    }
    out
}
