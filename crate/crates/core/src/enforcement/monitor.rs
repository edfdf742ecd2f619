use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rust_decimal::prelude::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::model::{Iri, Operator, Policy, Rule, RuleKind, Term};
use crate::pdp::{action_covers, evaluate_constraint, AccessRequest, EvaluationContext, UsageKey, UsageState, VerdictStatus};
use crate::pip::Pip;

use super::audit::{AuditEntry, AuditLog, AuditOutcome};

/// A transfer or stream that is still running.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OngoingUsage {
    pub id: u64,
    pub requester: Iri,
    pub target: Iri,
    pub action: Iri,
    pub started: DateTime<Utc>,
    /// Counter the usage was admitted against.
    pub key: UsageKey,
    #[serde(default)]
    pub notified: bool,
    /// Attributes the requester supplied at admission.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<Iri, Term>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevocationEvent {
    pub usage_id: u64,
    pub requester: Iri,
    pub target: Iri,
    pub key: UsageKey,
    pub at: DateTime<Utc>,
    pub reason: String,
}

/// Constraints that are settled at admission and not re-checked while usage runs.
fn admission_only(op: &Iri) -> bool {
    op.is_odrl("count")
        || op.is_odrl("timeInterval")
        || op.is_odrl("unitOfCount")
        || op.is_odrl("event")
        || op.is_dsp("concurrentConnections")
}

fn matches(rule: &Rule, u: &OngoingUsage) -> bool {
    rule.target.as_ref().is_none_or(|t| t.same_term(&u.target))
        && rule.assignee.as_ref().is_some_and(|a| a == &u.requester)
        && action_covers(&rule.action.action, &u.action)
}

/// First failing context constraint of the rule at `now`, if any.
fn context_failure(rule: &Rule, u: &OngoingUsage, pip: &Pip, now: DateTime<Utc>) -> Option<String> {
    let mut req = AccessRequest::new(u.requester.clone(), u.target.clone(), u.action.clone(), now);
    req.attributes = u.attributes.clone();
    let state = UsageState::new();
    let siblings: Vec<_> = rule.all_constraints().cloned().collect();
    let ctx = EvaluationContext {
        request: &req,
        state: &state,
        pip,
        key: &u.key,
        siblings: &siblings,
    };
    siblings
        .iter()
        .filter(|c| !admission_only(&c.left_operand))
        .find_map(|c| {
            let v = evaluate_constraint(c, &ctx);
            match v.status {
                VerdictStatus::Satisfied => None,
                VerdictStatus::Unsatisfied => Some(format!("{c} no longer holds: {}", v.reason)),
                VerdictStatus::Undetermined => Some(format!("{c} undetermined: {}", v.reason)),
            }
        })
}

fn connection_bound(rule: &Rule) -> Option<u64> {
    rule.all_constraints().find_map(|c| {
        if !c.left_operand.is_dsp("concurrentConnections") {
            return None;
        }
        let n = c.right_operand.as_literal()?.as_number()?.trunc().to_u64()?;
        match c.operator {
            Operator::Lteq => Some(n),
            Operator::Lt => Some(n.saturating_sub(1)),
            Operator::Eq => Some(n),
            _ => None,
        }
    })
}

/// Re-checks every ongoing usage at `now`. Usages whose permission no longer holds are
/// removed and reported; over a connection bound the newest usages go first. Inform duties
/// produce one `Notified` record per usage.
pub fn continuous_monitor_step(
    active_usages: &mut Vec<OngoingUsage>,
    agreement: &Policy,
    pip: &Pip,
    now: DateTime<Utc>,
    log: &mut AuditLog,
) -> Vec<RevocationEvent> {
    let mut revoked: Vec<(u64, String)> = Vec::new();
    let mut granted: Vec<(u64, usize)> = Vec::new();

    for u in active_usages.iter() {
        let prohibited = agreement.rules.iter().find(|r| {
            r.kind == RuleKind::Prohibition && matches(r, u) && context_failure(r, u, pip, now).is_none()
        });
        if prohibited.is_some() {
            revoked.push((u.id, "prohibited".into()));
            continue;
        }
        let mut failure = None;
        let mut grant = None;
        for (i, rule) in agreement.rules.iter().enumerate() {
            if rule.kind != RuleKind::Permission || !matches(rule, u) {
                continue;
            }
            match context_failure(rule, u, pip, now) {
                None => {
                    grant = Some(i);
                    break;
                }
                Some(why) => failure = failure.or(Some(why)),
            }
        }
        match grant {
            Some(i) => granted.push((u.id, i)),
            None => revoked.push((u.id, failure.unwrap_or_else(|| "no matching permission".into()))),
        }
    }

    let mut by_rule: std::collections::BTreeMap<(usize, Iri), Vec<&OngoingUsage>> = Default::default();
    for (id, i) in &granted {
        let u = active_usages.iter().find(|u| u.id == *id).expect("usage present");
        by_rule.entry((*i, u.requester.clone())).or_default().push(u);
    }
    for ((i, _), mut group) in by_rule {
        let Some(bound) = connection_bound(&agreement.rules[i]) else { continue };
        if group.len() as u64 <= bound {
            continue;
        }
        group.sort_by(|a, b| (b.started, b.id).cmp(&(a.started, a.id)));
        let excess = group.len() - bound as usize;
        for u in group.into_iter().take(excess) {
            revoked.push((u.id, format!("more than {bound} concurrent connections")));
        }
    }

    let mut events = Vec::new();
    active_usages.retain(|u| {
        let Some((_, reason)) = revoked.iter().find(|(id, _)| *id == u.id) else {
            return true;
        };
        log.append(
            AuditEntry::new(now, u.requester.clone(), u.action.clone(), u.target.clone(), AuditOutcome::Revoked)
                .detail(format!("usage {}: {reason}", u.id))
                .agreement(&agreement.uid),
        );
        events.push(RevocationEvent {
            usage_id: u.id,
            requester: u.requester.clone(),
            target: u.target.clone(),
            key: u.key.clone(),
            at: now,
            reason: reason.clone(),
        });
        false
    });
    events.sort_by_key(|e| e.usage_id);

    for u in active_usages.iter_mut().filter(|u| !u.notified) {
        let Some(&(_, i)) = granted.iter().find(|(id, _)| *id == u.id) else { continue };
        let rule = &agreement.rules[i];
        for duty in rule.duties.iter().filter(|d| d.action.action.is_odrl("inform")) {
            let duty = duty.inherit_from(rule);
            log.append(
                AuditEntry::new(
                    now,
                    duty.assignee.clone().unwrap_or_else(|| u.requester.clone()),
                    duty.action.action.clone(),
                    duty.target.clone().unwrap_or_else(|| u.target.clone()),
                    AuditOutcome::Notified,
                )
                .detail(format!("usage {} by {}", u.id, u.requester))
                .agreement(&agreement.uid),
            );
            u.notified = true;
        }
    }
    events
}
