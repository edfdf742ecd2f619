use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{
    parse_date_time, Constraint, Iri, Operator, Policy, Rule, RuleKind, Term, TypedLiteral, Value,
    XsdDuration,
};
use crate::pdp::{action_covers, compare_terms};
use crate::pip::RegionHierarchy;

use super::audit::{AuditLog, AuditOutcome, AuditRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DutyStatus {
    Pending,
    Fulfilled,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObligationStatus {
    pub duty: Rule,
    pub status: DutyStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fulfilled_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DutyVerdict {
    pub status: DutyStatus,
    pub detail: String,
}

/// Fulfilled iff no gap between consecutive events, or between an event and a window
/// edge, exceeds `interval`. Events outside the window are ignored.
pub fn check_up_to_dateness(
    update_events: &[DateTime<Utc>],
    interval: XsdDuration,
    window: (DateTime<Utc>, DateTime<Utc>),
) -> DutyVerdict {
    let (start, end) = window;
    let mut points: Vec<DateTime<Utc>> = update_events
        .iter()
        .copied()
        .filter(|t| *t >= start && *t <= end)
        .collect();
    points.sort();
    points.insert(0, start);
    points.push(end);
    let limit = interval.as_delta();
    for pair in points.windows(2) {
        let gap = pair[1] - pair[0];
        if gap > limit {
            return DutyVerdict {
                status: DutyStatus::Violated,
                detail: format!(
                    "gap of {} between {} and {} exceeds {interval}",
                    XsdDuration::from_millis(gap.num_milliseconds()),
                    crate::model::format_date_time(&pair[0]),
                    crate::model::format_date_time(&pair[1]),
                ),
            };
        }
    }
    DutyVerdict {
        status: DutyStatus::Fulfilled,
        detail: format!("{} updates, no gap above {interval}", points.len() - 2),
    }
}

/// Deadline stated by a `dateTime lt/lteq` constraint, with whether it is inclusive.
pub fn duty_deadline(duty: &Rule) -> Option<(DateTime<Utc>, bool)> {
    duty.constraints.iter().find_map(|c| {
        if !c.left_operand.is_odrl("dateTime") {
            return None;
        }
        let inclusive = match c.operator {
            Operator::Lt => false,
            Operator::Lteq => true,
            _ => return None,
        };
        let at = match c.right_operand.as_literal()?.value().ok()? {
            Value::DateTime(d) => d,
            Value::Text(t) => parse_date_time(&t).ok()?,
            _ => return None,
        };
        Some((at, inclusive))
    })
}

fn duty_interval(duty: &Rule) -> Option<XsdDuration> {
    duty.constraints.iter().find_map(|c| {
        if !c.left_operand.is_odrl("timeInterval") {
            return None;
        }
        match c.right_operand.as_literal()?.value().ok()? {
            Value::Duration(d) => Some(d),
            _ => None,
        }
    })
}

/// True for duties that must be met before the data is used (`event lt policyUsage`).
pub fn is_precondition(duty: &Rule) -> bool {
    duty.constraints.iter().any(|c| {
        c.left_operand.is_odrl("event")
            && matches!(c.operator, Operator::Lt | Operator::Lteq)
            && c.right_operand.as_iri().is_some_and(|i| i.is_odrl("policyUsage"))
    })
}

/// Constraints the evidence record itself must satisfy through its attributes.
fn evidence_constraints(duty: &Rule) -> impl Iterator<Item = &Constraint> {
    duty.all_constraints().filter(|c| {
        let op = &c.left_operand;
        !(op.is_odrl("dateTime") || op.is_odrl("timeInterval") || op.is_odrl("event"))
    })
}

fn belongs(r: &AuditRecord, agreement: &Iri) -> bool {
    r.agreement.as_ref().is_none_or(|a| a == agreement)
}

fn concerns(r: &AuditRecord, duty: &Rule) -> bool {
    r.action.same_term(&duty.action.action)
        && duty.target.as_ref().is_none_or(|t| t.same_term(&r.target))
        && duty.assignee.as_ref().is_none_or(|a| a == &r.actor)
}

enum Evidence {
    Supports,
    Contradicts(String),
    Incomplete,
}

fn attribute_term(value: &str, like: &Term) -> Term {
    match (like, Iri::new(value)) {
        (Term::Iri(_), Ok(iri)) => Term::Iri(iri),
        _ => Term::Literal(TypedLiteral::string(value)),
    }
}

fn weigh(r: &AuditRecord, duty: &Rule, regions: &RegionHierarchy) -> Evidence {
    if r.attributes.get("conforms").is_some_and(|v| v == "false") {
        return Evidence::Contradicts(format!("record {} reports non-conformance", r.seq));
    }
    let mut complete = true;
    for c in evidence_constraints(duty) {
        let key = c.left_operand.local_name();
        let Some(value) = r.attributes.get(key) else {
            complete = false;
            continue;
        };
        let left = attribute_term(value, &c.right_operand);
        match compare_terms(&left, &c.operator, &c.right_operand, regions) {
            Ok(true) => {}
            Ok(false) => {
                return Evidence::Contradicts(format!(
                    "record {}: {key} {value} violates {}",
                    r.seq, c
                ))
            }
            Err(_) => {
                return Evidence::Contradicts(format!("record {}: {key} type mismatch", r.seq))
            }
        }
    }
    if complete {
        Evidence::Supports
    } else {
        Evidence::Incomplete
    }
}

/// When (and whether) the permission enclosing a nested duty was first used.
fn activation(agreement: &Policy, permission: &Rule, log: &AuditLog) -> Option<(u64, DateTime<Utc>)> {
    log.records()
        .iter()
        .find(|r| {
            r.outcome == AuditOutcome::Permitted
                && belongs(r, &agreement.uid)
                && permission.assignee.as_ref().is_none_or(|a| a == &r.actor)
                && permission.target.as_ref().is_none_or(|t| t.same_term(&r.target))
                && action_covers(&permission.action.action, &r.action)
        })
        .map(|r| (r.seq, r.at))
}

/// Status of one duty given the log. `after` restricts evidence to records following the
/// activating record.
pub fn duty_status(
    agreement: &Policy,
    duty: &Rule,
    log: &AuditLog,
    now: DateTime<Utc>,
    after: Option<(u64, DateTime<Utc>)>,
    regions: &RegionHierarchy,
) -> ObligationStatus {
    let deadline = duty_deadline(duty);
    let mut status = ObligationStatus {
        duty: duty.clone(),
        status: DutyStatus::Pending,
        deadline: deadline.map(|d| d.0),
        fulfilled_at: None,
        detail: String::new(),
    };
    // Preconditions are judged from the start of the log: their evidence predates use.
    let precondition = is_precondition(duty);
    let since = if precondition { None } else { after };
    let relevant = log
        .records()
        .iter()
        .filter(|r| belongs(r, &agreement.uid) && since.is_none_or(|(seq, _)| r.seq > seq));

    if let Some(interval) = duty_interval(duty) {
        let Some(start) = after.map(|a| a.1).or_else(|| {
            log.records()
                .iter()
                .find(|r| belongs(r, &agreement.uid))
                .map(|r| r.at)
        }) else {
            status.detail = "no activity yet".into();
            return status;
        };
        let mut events = Vec::new();
        for r in relevant {
            if !concerns(r, duty) {
                continue;
            }
            match r.outcome {
                AuditOutcome::DutyViolated => {
                    status.status = DutyStatus::Violated;
                    status.detail = format!("record {} reports a violation", r.seq);
                    return status;
                }
                AuditOutcome::Executed | AuditOutcome::DutyFulfilled => events.push(r.at),
                _ => {}
            }
        }
        let v = check_up_to_dateness(&events, interval, (start, now.max(start)));
        status.status = v.status;
        status.detail = v.detail;
        if v.status == DutyStatus::Fulfilled {
            status.fulfilled_at = events.last().copied();
        }
        return status;
    }

    for r in relevant {
        if precondition
            && r.outcome == AuditOutcome::Permitted
            && duty.target.as_ref().is_none_or(|t| t.same_term(&r.target))
        {
            status.status = DutyStatus::Violated;
            status.detail = format!("record {}: usage before the precondition was met", r.seq);
            return status;
        }
        if !concerns(r, duty) {
            continue;
        }
        match r.outcome {
            AuditOutcome::DutyViolated => {
                status.status = DutyStatus::Violated;
                status.detail = format!("record {} reports a violation", r.seq);
                return status;
            }
            AuditOutcome::Executed | AuditOutcome::DutyFulfilled | AuditOutcome::Notified => {
                match weigh(r, duty, regions) {
                    Evidence::Contradicts(why) => {
                        status.status = DutyStatus::Violated;
                        status.detail = why;
                        return status;
                    }
                    Evidence::Incomplete => continue,
                    Evidence::Supports => {}
                }
                if let Some((d, inclusive)) = deadline {
                    let in_time = if inclusive { r.at <= d } else { r.at < d };
                    if !in_time {
                        status.status = DutyStatus::Violated;
                        status.detail = format!("record {} came after the deadline", r.seq);
                        return status;
                    }
                }
                status.status = DutyStatus::Fulfilled;
                status.fulfilled_at = Some(r.at);
                status.detail = format!("evidence in record {}", r.seq);
                return status;
            }
            _ => {}
        }
    }
    if let Some((d, inclusive)) = deadline {
        let passed = if inclusive { now > d } else { now >= d };
        if passed {
            status.status = DutyStatus::Violated;
            status.detail = "deadline passed without evidence".into();
            return status;
        }
    }
    status.detail = "awaiting evidence".into();
    status
}

/// Statuses of every active duty: all top-level obligations, and the duties of every
/// permission that has been exercised.
pub fn detective_check(agreement: &Policy, log: &AuditLog, now: DateTime<Utc>) -> Vec<ObligationStatus> {
    detective_check_with(agreement, log, now, &RegionHierarchy::default())
}

pub fn detective_check_with(
    agreement: &Policy,
    log: &AuditLog,
    now: DateTime<Utc>,
    regions: &RegionHierarchy,
) -> Vec<ObligationStatus> {
    let mut out = Vec::new();
    for rule in &agreement.rules {
        match rule.kind {
            RuleKind::Duty => out.push(duty_status(agreement, rule, log, now, None, regions)),
            RuleKind::Permission if !rule.duties.is_empty() => {
                let Some(act) = activation(agreement, rule, log) else { continue };
                for duty in &rule.duties {
                    let duty = duty.inherit_from(rule);
                    out.push(duty_status(agreement, &duty, log, now, Some(act), regions));
                }
            }
            _ => {}
        }
    }
    out
}
