//! Policy enforcement: the PEP in front of the PDP, the audit trail, after-the-fact duty
//! checks and monitoring of running usage.

mod audit;
mod detective;
mod monitor;

use serde::{Deserialize, Serialize};

use crate::model::{Policy, Rule, RuleKind};
use crate::pdp::{commit_usage, evaluate_request, AccessRequest, Decision, PdpError, UsageState};
use crate::pip::{Pip, RegionHierarchy};

pub use audit::{record_evidence, AuditEntry, AuditError, AuditLog, AuditOutcome, AuditRecord, OUT_OF_ORDER};
pub use detective::{
    check_up_to_dateness, detective_check, detective_check_with, duty_deadline, duty_status,
    is_precondition, DutyStatus, DutyVerdict, ObligationStatus,
};
pub use monitor::{continuous_monitor_step, OngoingUsage, RevocationEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AgreementStatus {
    #[default]
    Active,
    Revoked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action")]
pub enum EnforcementAction {
    /// Transfer goes ahead; the listed duties are now owed.
    Allow {
        decision: Decision,
        pending: Vec<ObligationStatus>,
    },
    Block { decision: Decision },
    /// Held back until the listed precondition duties have evidence.
    Delay { decision: Decision, waiting_for: Vec<Rule> },
    Revoked,
}

impl EnforcementAction {
    pub fn is_allow(&self) -> bool {
        matches!(self, EnforcementAction::Allow { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            EnforcementAction::Allow { .. } => "allow",
            EnforcementAction::Block { .. } => "block",
            EnforcementAction::Delay { .. } => "delay",
            EnforcementAction::Revoked => "revoked",
        }
    }
}

/// Duties whose fulfilment the provider side guarantees at transfer time.
fn fulfilled_by_transfer(duty: &Rule, decision: &Decision, req: &AccessRequest) -> Option<String> {
    let action = &duty.action.action;
    if action.is_dsp("encrypt") && duty.assignee.as_ref().is_some_and(|a| a != &req.requester) {
        return Some("transfer encrypted by provider connector".into());
    }
    if action.is_odrl("compensate") {
        if let Some(c) = &decision.charge {
            return Some(format!("charged {}", c.amount));
        }
    }
    None
}

/// Precondition duties relevant to the request that still lack evidence.
fn unmet_preconditions(
    agreement: &Policy,
    decision: &Decision,
    req: &AccessRequest,
    log: &AuditLog,
    regions: &RegionHierarchy,
) -> Vec<Rule> {
    let top_level = agreement.rules.iter().filter(|r| {
        r.kind == RuleKind::Duty && r.target.as_ref().is_none_or(|t| t.same_term(&req.target))
    });
    top_level
        .chain(decision.activated_duties.iter())
        .filter(|d| is_precondition(d))
        .filter(|d| {
            duty_status(agreement, d, log, req.timestamp, None, regions).status != DutyStatus::Fulfilled
        })
        .cloned()
        .collect()
}

/// Intercepts a request, asks the PDP, and applies the answer: records the outcome,
/// commits usage on a permit, and registers the activated duties.
pub fn pep_handle(
    req: &AccessRequest,
    agreement: &Policy,
    status: AgreementStatus,
    state: &UsageState,
    pip: &Pip,
    log: &mut AuditLog,
) -> Result<(EnforcementAction, UsageState), PdpError> {
    let entry = |outcome| {
        AuditEntry::new(req.timestamp, req.requester.clone(), req.action.clone(), req.target.clone(), outcome)
            .agreement(&agreement.uid)
    };
    if status == AgreementStatus::Revoked {
        log.append(entry(AuditOutcome::Revoked).detail("agreement revoked"));
        return Ok((EnforcementAction::Revoked, state.clone()));
    }
    let decision = evaluate_request(agreement, req, state, pip)?;
    if !decision.is_permit() {
        log.append(entry(AuditOutcome::Denied).detail(format!("{:?}: {}", decision.outcome, decision.reason)));
        return Ok((EnforcementAction::Block { decision }, state.clone()));
    }
    let waiting = unmet_preconditions(agreement, &decision, req, log, &pip.regions);
    if !waiting.is_empty() {
        let names: Vec<&str> = waiting.iter().map(|d| d.action.action.local_name()).collect();
        log.append(entry(AuditOutcome::Delayed).detail(format!("waiting for {}", names.join(", "))));
        return Ok((
            EnforcementAction::Delay {
                decision,
                waiting_for: waiting,
            },
            state.clone(),
        ));
    }

    let next = commit_usage(&decision, req, state)?;
    log.append(entry(AuditOutcome::Permitted).detail(decision.reason.clone()));
    let units = req.units_requested;
    log.append(entry(AuditOutcome::Executed).detail(if units == 1 {
        String::new()
    } else {
        format!("{units} units")
    }));

    let mut pending = Vec::new();
    for duty in &decision.activated_duties {
        if let Some(detail) = fulfilled_by_transfer(duty, &decision, req) {
            let actor = duty.assignee.clone().unwrap_or_else(|| req.requester.clone());
            let target = duty.target.clone().unwrap_or_else(|| req.target.clone());
            log.append(
                AuditEntry::new(req.timestamp, actor, duty.action.action.clone(), target, AuditOutcome::DutyFulfilled)
                    .detail(detail)
                    .agreement(&agreement.uid),
            );
            continue;
        }
        pending.push(ObligationStatus {
            duty: duty.clone(),
            status: DutyStatus::Pending,
            deadline: duty_deadline(duty).map(|d| d.0),
            fulfilled_at: None,
            detail: String::new(),
        });
    }
    Ok((EnforcementAction::Allow { decision, pending }, next))
}
