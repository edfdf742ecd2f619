//! ODRL information-model AST.
//!
//! The types here mirror the subset of the ODRL model that policy documents in this
//! project use: policies hold rules, rules hold an action expression, constraints and
//! (for permissions) nested duties. Blank-node identity is not represented, so two
//! policies are semantically equal exactly when their normalized forms are equal.

mod iri;
mod literal;
mod validate;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use iri::Iri;
pub use literal::{
    format_date_time, parse_date_time, Datatype, Term, TypedLiteral, Value, XsdDuration,
};
pub use validate::{validate_policy, vocabulary_warnings, Violation};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid IRI `{0}`")]
    InvalidIri(String),
    #[error("`{lexical}` is not a valid {datatype} literal")]
    InvalidLiteral { lexical: String, datatype: String },
}

/// Who a party is relative to a data exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PartyRole {
    Provider,
    Consumer,
    ThirdParty,
}

impl fmt::Display for PartyRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartyRole::Provider => "Provider",
            PartyRole::Consumer => "Consumer",
            PartyRole::ThirdParty => "ThirdParty",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Operator {
    Eq,
    Neq,
    Lt,
    Lteq,
    Gt,
    Gteq,
    IsPartOf,
    IsAnyOf,
    /// Operator IRI outside the supported set. Kept so validation can report it.
    Unknown(Iri),
}

impl Operator {
    pub const ALL: [Operator; 8] = [
        Operator::Eq,
        Operator::Neq,
        Operator::Lt,
        Operator::Lteq,
        Operator::Gt,
        Operator::Gteq,
        Operator::IsPartOf,
        Operator::IsAnyOf,
    ];

    pub fn local_name(&self) -> &str {
        match self {
            Operator::Eq => "eq",
            Operator::Neq => "neq",
            Operator::Lt => "lt",
            Operator::Lteq => "lteq",
            Operator::Gt => "gt",
            Operator::Gteq => "gteq",
            Operator::IsPartOf => "isPartOf",
            Operator::IsAnyOf => "isAnyOf",
            Operator::Unknown(iri) => iri.as_str(),
        }
    }

    pub fn from_iri(iri: &Iri) -> Operator {
        Operator::ALL
            .into_iter()
            .find(|op| iri.is_odrl(op.local_name()))
            .unwrap_or_else(|| Operator::Unknown(iri.clone()))
    }

    pub fn iri(&self) -> Iri {
        match self {
            Operator::Unknown(iri) => iri.clone(),
            op => Iri::odrl(op.local_name()),
        }
    }
}

/// A `(leftOperand, operator, rightOperand)` condition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub left_operand: Iri,
    pub operator: Operator,
    pub right_operand: Term,
}

impl Constraint {
    pub fn new(left_operand: Iri, operator: Operator, right_operand: impl Into<Term>) -> Self {
        Constraint {
            left_operand,
            operator,
            right_operand: right_operand.into(),
        }
    }

    pub fn odrl(left: &str, operator: Operator, right: impl Into<Term>) -> Self {
        Constraint::new(Iri::odrl(left), operator, right)
    }

    pub fn dsp(left: &str, operator: Operator, right: impl Into<Term>) -> Self {
        Constraint::new(Iri::dsp(left), operator, right)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.left_operand.local_name(),
            self.operator.local_name(),
            self.right_operand
        )
    }
}

/// An action, optionally narrowed by refinements.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionExpression {
    pub action: Iri,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub refinements: Vec<Constraint>,
}

impl ActionExpression {
    pub fn new(action: Iri) -> Self {
        ActionExpression {
            action,
            refinements: Vec::new(),
        }
    }

    pub fn refined(action: Iri, refinements: Vec<Constraint>) -> Self {
        ActionExpression {
            action,
            refinements,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RuleKind {
    Permission,
    Prohibition,
    Duty,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A predicate/value pair the parser did not map onto the model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Annotation {
    pub predicate: Iri,
    pub value: Term,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rule {
    pub kind: RuleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Iri>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assigner: Option<Iri>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignee: Option<Iri>,
    pub action: ActionExpression,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<Constraint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub duties: Vec<Rule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<Annotation>,
}

impl Rule {
    pub fn new(kind: RuleKind, action: ActionExpression) -> Self {
        Rule {
            kind,
            target: None,
            assigner: None,
            assignee: None,
            action,
            constraints: Vec::new(),
            duties: Vec::new(),
            annotations: Vec::new(),
        }
    }

    pub fn permission(action: Iri) -> Self {
        Rule::new(RuleKind::Permission, ActionExpression::new(action))
    }

    pub fn prohibition(action: Iri) -> Self {
        Rule::new(RuleKind::Prohibition, ActionExpression::new(action))
    }

    pub fn duty(action: Iri) -> Self {
        Rule::new(RuleKind::Duty, ActionExpression::new(action))
    }

    pub fn with_target(mut self, target: Iri) -> Self {
        self.target = Some(target);
        self
    }

    pub fn with_parties(mut self, assigner: Option<Iri>, assignee: Option<Iri>) -> Self {
        self.assigner = assigner;
        self.assignee = assignee;
        self
    }

    pub fn with_constraint(mut self, c: Constraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn with_duty(mut self, duty: Rule) -> Self {
        self.duties.push(duty);
        self
    }

    /// Copy of a nested duty with target and parties filled in from its permission.
    pub fn inherit_from(&self, parent: &Rule) -> Rule {
        let mut duty = self.clone();
        if duty.target.is_none() {
            duty.target = parent.target.clone();
        }
        if duty.assigner.is_none() {
            duty.assigner = parent.assigner.clone();
        }
        if duty.assignee.is_none() {
            duty.assignee = parent.assignee.clone();
        }
        duty
    }

    /// Every constraint attached to the rule, refinements first.
    pub fn all_constraints(&self) -> impl Iterator<Item = &Constraint> {
        self.action.refinements.iter().chain(self.constraints.iter())
    }

    fn normalize(&mut self) {
        self.action.refinements.sort();
        self.constraints.sort();
        self.annotations.sort();
        for duty in &mut self.duties {
            duty.normalize();
        }
        self.duties.sort();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum PolicyKind {
    #[default]
    Set,
    Offer,
    Agreement,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Policy {
    pub uid: Iri,
    pub kind: PolicyKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub profiles: Vec<Iri>,
    pub rules: Vec<Rule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<Annotation>,
}

impl Policy {
    pub fn new(uid: Iri, kind: PolicyKind) -> Self {
        Policy {
            uid,
            kind,
            profiles: Vec::new(),
            rules: Vec::new(),
            annotations: Vec::new(),
        }
    }

    pub fn permissions(&self) -> impl Iterator<Item = &Rule> {
        self.rules.iter().filter(|r| r.kind == RuleKind::Permission)
    }

    /// Copy with every list sorted, so that derived equality ignores ordering.
    pub fn normalized(&self) -> Policy {
        let mut p = self.clone();
        p.profiles.sort();
        p.annotations.sort();
        for rule in &mut p.rules {
            rule.normalize();
        }
        p.rules.sort();
        p
    }

    /// Every rule paired with its enclosing permission (`None` at top level).
    pub fn walk_rules(&self) -> Vec<(&Rule, Option<&Rule>)> {
        let mut out = Vec::new();
        for rule in &self.rules {
            out.push((rule, None));
            for duty in &rule.duties {
                out.push((duty, Some(rule)));
            }
        }
        out
    }
}

/// True iff the policies are isomorphic up to blank-node labels and list ordering.
pub fn semantic_equals(a: &Policy, b: &Policy) -> bool {
    a.normalized() == b.normalized()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Asset {
    pub uid: Iri,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
}
