//! Policy decision point.
//!
//! Decisions are computed from a borrowed [`UsageState`]; only [`commit_usage`] produces a
//! new state. Callers serialize commits per agreement.

mod conformance;
mod constraint;
mod state;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::model::{validate_policy, Constraint, Iri, Policy, PolicyKind, Rule, RuleKind, Term, Violation};
use crate::pip::Pip;
use crate::profile::ProfileRegistry;

pub use conformance::{
    check_conformance, ConformanceChecker, ConformanceRegistry, NodeShape, PropertyShape,
};
pub(crate) use constraint::compare_terms;
pub use constraint::{check_rate_limit, evaluate_constraint, ConstraintVerdict, EvaluationContext, VerdictStatus};
pub use state::{Credit, UsageEntry, UsageKey, UsageState};

#[derive(Debug, thiserror::Error)]
pub enum PdpError {
    #[error("invalid agreement: {}", join(.0))]
    InvalidAgreement(Vec<Violation>),
    #[error("commit_usage requires a Permit decision, got {0:?}")]
    NotPermitted(Outcome),
    #[error("no checker for shape <{0}>")]
    NoChecker(Iri),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("insufficient credit for charge of {0}")]
    InsufficientCredit(Decimal),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessRequest {
    pub requester: Iri,
    pub target: Iri,
    pub action: Iri,
    pub timestamp: DateTime<Utc>,
    #[serde(default = "one")]
    pub units_requested: u64,
    /// Claims supplied by the requester, keyed by left operand.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<Iri, Term>,
}

impl AccessRequest {
    pub fn new(requester: Iri, target: Iri, action: Iri, timestamp: DateTime<Utc>) -> Self {
        AccessRequest {
            requester,
            target,
            action,
            timestamp,
            units_requested: 1,
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_units(mut self, units: u64) -> Self {
        self.units_requested = units;
        self
    }

    pub fn with_attribute(mut self, operand: Iri, value: impl Into<Term>) -> Self {
        self.attributes.insert(operand.canonical(), value.into());
        self
    }

    /// Requester-supplied value for an operand, matching either profile namespace.
    pub fn attribute(&self, operand: &Iri) -> Option<&Term> {
        self.attributes
            .iter()
            .find(|(k, _)| k.same_term(operand))
            .map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Permit,
    Deny,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Position of the rule in the agreement, e.g. `rules[0]` or `rules[0].duties[1]`.
    pub rule: String,
    pub constraint: Constraint,
    pub verdict: ConstraintVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Charge {
    pub party: Iri,
    pub amount: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Outcome,
    /// Duties of the granting permission, with target and parties inherited.
    pub activated_duties: Vec<Rule>,
    pub trace: Vec<TraceEntry>,
    pub reason: String,
    /// Counter the permit is charged against.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metered: Option<UsageKey>,
    #[serde(default)]
    pub opens_connection: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charge: Option<Charge>,
}

impl Decision {
    fn new(outcome: Outcome, reason: impl Into<String>, trace: Vec<TraceEntry>) -> Self {
        Decision {
            outcome,
            activated_duties: Vec::new(),
            trace,
            reason: reason.into(),
            metered: None,
            opens_connection: false,
            charge: None,
        }
    }

    pub fn is_permit(&self) -> bool {
        self.outcome == Outcome::Permit
    }

    pub fn is_undetermined(&self) -> bool {
        self.trace
            .iter()
            .any(|t| t.verdict.status == VerdictStatus::Undetermined)
    }
}

/// `odrl:use` covers every action; otherwise the actions must be the same term.
pub fn action_covers(granted: &Iri, requested: &Iri) -> bool {
    granted.is_odrl("use") || granted.same_term(requested)
}

fn rule_matches(rule: &Rule, req: &AccessRequest) -> bool {
    rule.target.as_ref().is_none_or(|t| t.same_term(&req.target))
        && rule.assignee.as_ref().is_some_and(|a| a == &req.requester)
        && action_covers(&rule.action.action, &req.action)
}

/// Checks the structural invariants of an agreement, whatever kind the policy declares.
pub fn check_agreement(agreement: &Policy) -> Result<(), PdpError> {
    let mut as_agreement = agreement.clone();
    as_agreement.kind = PolicyKind::Agreement;
    let violations = validate_policy(&as_agreement, ProfileRegistry::builtin());
    if violations.is_empty() {
        Ok(())
    } else {
        Err(PdpError::InvalidAgreement(violations))
    }
}

pub fn usage_key(agreement: &Policy, requester: &Iri, rule: &Rule) -> UsageKey {
    UsageKey {
        agreement: agreement.uid.clone(),
        assignee: requester.clone(),
        action: rule.action.action.canonical(),
    }
}

struct RuleOutcome {
    satisfied: bool,
    undetermined: bool,
}

fn evaluate_rule(
    agreement: &Policy,
    path: &str,
    rule: &Rule,
    req: &AccessRequest,
    state: &UsageState,
    pip: &Pip,
    trace: &mut Vec<TraceEntry>,
) -> RuleOutcome {
    let key = usage_key(agreement, &req.requester, rule);
    let siblings: Vec<Constraint> = rule.all_constraints().cloned().collect();
    let ctx = EvaluationContext {
        request: req,
        state,
        pip,
        key: &key,
        siblings: &siblings,
    };
    let mut out = RuleOutcome {
        satisfied: true,
        undetermined: false,
    };
    for c in &siblings {
        let verdict = evaluate_constraint(c, &ctx);
        match verdict.status {
            VerdictStatus::Satisfied => {}
            VerdictStatus::Unsatisfied => out.satisfied = false,
            VerdictStatus::Undetermined => {
                out.satisfied = false;
                out.undetermined = true;
            }
        }
        trace.push(TraceEntry {
            rule: path.to_string(),
            constraint: c.clone(),
            verdict,
        });
    }
    out
}

/// Payment duties (`compensate` with a `payAmount` constraint) are checked up front
/// against the requester's credit.
fn evaluate_payment(
    agreement: &Policy,
    path: &str,
    permission: &Rule,
    req: &AccessRequest,
    state: &UsageState,
    trace: &mut Vec<TraceEntry>,
) -> (bool, Option<Charge>) {
    let mut ok = true;
    let mut total = Decimal::ZERO;
    for (j, duty) in permission.duties.iter().enumerate() {
        if !duty.action.action.is_odrl("compensate") {
            continue;
        }
        for c in duty.constraints.iter().filter(|c| c.left_operand.is_odrl("payAmount")) {
            let price = c.right_operand.as_literal().and_then(|l| l.as_number());
            let verdict = match price {
                None => ConstraintVerdict::unsatisfied("type mismatch"),
                Some(price) => {
                    let due = total + price * Decimal::from(req.units_requested);
                    let balance = state
                        .credit(&agreement.uid, &req.requester)
                        .map_or(Decimal::ZERO, |c| c.balance);
                    if balance >= due {
                        total = due;
                        ConstraintVerdict::satisfied(format!("balance {balance} covers {due}"))
                    } else {
                        ConstraintVerdict::unsatisfied(format!("balance {balance} below {due}"))
                    }
                }
            };
            ok &= verdict.is_satisfied();
            trace.push(TraceEntry {
                rule: format!("{path}.duties[{j}]"),
                constraint: c.clone(),
                verdict,
            });
        }
    }
    let charge = (ok && total > Decimal::ZERO).then(|| Charge {
        party: req.requester.clone(),
        amount: total,
    });
    (ok, charge)
}

/// Decides a request under deny-overrides. Every constraint of every matching rule is
/// evaluated and traced; an undetermined verdict anywhere denies.
pub fn evaluate_request(
    agreement: &Policy,
    req: &AccessRequest,
    state: &UsageState,
    pip: &Pip,
) -> Result<Decision, PdpError> {
    check_agreement(agreement)?;
    if req.units_requested == 0 {
        return Err(PdpError::InvalidRequest("units_requested must be at least 1".into()));
    }
    let mut trace = Vec::new();
    let mut granting: Option<(usize, Option<Charge>)> = None;
    let mut prohibited = false;
    let mut undetermined = false;
    let mut matched_permission = false;

    for (i, rule) in agreement.rules.iter().enumerate() {
        if rule.kind == RuleKind::Duty || !rule_matches(rule, req) {
            continue;
        }
        let path = format!("rules[{i}]");
        let r = evaluate_rule(agreement, &path, rule, req, state, pip, &mut trace);
        undetermined |= r.undetermined;
        match rule.kind {
            RuleKind::Prohibition => prohibited |= r.satisfied,
            RuleKind::Permission => {
                matched_permission = true;
                let (paid, charge) = evaluate_payment(agreement, &path, rule, req, state, &mut trace);
                if r.satisfied && paid && granting.is_none() {
                    granting = Some((i, charge));
                }
            }
            RuleKind::Duty => {}
        }
    }

    let decision = if undetermined {
        Decision::new(Outcome::Deny, "undetermined", trace)
    } else if prohibited {
        Decision::new(Outcome::Deny, "prohibited", trace)
    } else if let Some((i, charge)) = granting {
        let rule = &agreement.rules[i];
        let mut d = Decision::new(Outcome::Permit, format!("granted by rules[{i}]"), trace);
        d.activated_duties = rule.duties.iter().map(|duty| duty.inherit_from(rule)).collect();
        d.metered = Some(usage_key(agreement, &req.requester, rule));
        d.opens_connection = rule
            .all_constraints()
            .any(|c| c.left_operand.is_dsp("concurrentConnections"));
        d.charge = charge;
        d
    } else if matched_permission {
        let failed: Vec<String> = trace
            .iter()
            .filter(|t| !t.verdict.is_satisfied())
            .map(|t| format!("{}: {}", t.constraint.left_operand.local_name(), t.verdict.reason))
            .collect();
        Decision::new(Outcome::Deny, format!("unsatisfied: {}", failed.join("; ")), trace)
    } else {
        Decision::new(Outcome::NotApplicable, "no matching rule", trace)
    };
    log::debug!("{} {} on {}: {:?}", req.requester, req.action, req.target, decision.outcome);
    Ok(decision)
}

/// New state with the permitted usage recorded. The input state is left untouched.
pub fn commit_usage(
    decision: &Decision,
    req: &AccessRequest,
    state: &UsageState,
) -> Result<UsageState, PdpError> {
    if decision.outcome != Outcome::Permit {
        return Err(PdpError::NotPermitted(decision.outcome));
    }
    let mut next = state.clone();
    if let Some(key) = &decision.metered {
        let entry = next.entry_mut(key.clone());
        entry.executed_count += req.units_requested;
        entry
            .exercise_log
            .extend(std::iter::repeat_n(req.timestamp, req.units_requested as usize));
        if decision.opens_connection {
            entry.active_connections += 1;
        }
    }
    if let (Some(charge), Some(key)) = (&decision.charge, &decision.metered) {
        let credit = next
            .credit_mut(&key.agreement, &charge.party)
            .filter(|c| c.balance >= charge.amount)
            .ok_or(PdpError::InsufficientCredit(charge.amount))?;
        credit.balance -= charge.amount;
    }
    Ok(next)
}

#[cfg(test)]
mod tests;
