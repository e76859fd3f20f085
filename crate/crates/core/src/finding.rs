//! Findings reported by the static checks (contract template, model structure,
//! discharge and responsibility analysis).

use std::fmt;

use serde::{Deserialize, Serialize};

/// The rule a finding reports against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    KindMismatch,
    MissingGuarantee,
    InvalidParameter,
    MalformedClauseId,
    DuplicateId,
    ComponentStructure,
    DanglingReference,
    LinkKind,
    RiskSourceMismatch,
    AmbiguousDischarge,
    IncompatibleLink,
    Undischarged,
    NotInherited,
    MultipleInheritors,
    WeakInheritance,
    DischargeCycle,
    NoDecisionComponent,
    SharedResponsibilityUndeclared,
    InvalidResponsibilitySplit,
    SitawGuaranteeLacksAccuracy,
    ActionGuaranteeLacksAccuracy,
    AccuracyNotAssumed,
}

impl Rule {
    pub fn label(self) -> &'static str {
        match self {
            Rule::KindMismatch => "kind mismatch",
            Rule::MissingGuarantee => "missing guarantee",
            Rule::InvalidParameter => "invalid parameter",
            Rule::MalformedClauseId => "malformed clause id",
            Rule::DuplicateId => "duplicate id",
            Rule::ComponentStructure => "component structure",
            Rule::DanglingReference => "dangling reference",
            Rule::LinkKind => "link kind",
            Rule::RiskSourceMismatch => "risk source mismatch",
            Rule::AmbiguousDischarge => "ambiguous discharge",
            Rule::IncompatibleLink => "incompatible link",
            Rule::Undischarged => "undischarged assumption",
            Rule::NotInherited => "guarantee not inherited",
            Rule::MultipleInheritors => "multiple inheritors",
            Rule::WeakInheritance => "weak inheritance",
            Rule::DischargeCycle => "discharge cycle",
            Rule::NoDecisionComponent => "no decision component",
            Rule::SharedResponsibilityUndeclared => "shared responsibility undeclared",
            Rule::InvalidResponsibilitySplit => "invalid responsibility split",
            Rule::SitawGuaranteeLacksAccuracy => "SITAW guarantee lacks accuracy",
            Rule::ActionGuaranteeLacksAccuracy => "Action guarantee lacks accuracy",
            Rule::AccuracyNotAssumed => "accuracy not assumed",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One violated rule, located at a field, clause id, component id or link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule: Rule,
    pub location: String,
    pub message: String,
}

impl Finding {
    pub fn new(rule: Rule, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            rule,
            location: location.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.location, self.message)
    }
}
