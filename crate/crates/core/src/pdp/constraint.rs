use std::cmp::Ordering;

use chrono::{DateTime, Utc};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::model::{parse_date_time, Constraint, Iri, Operator, Term, TypedLiteral, Value};
use crate::pip::{AttributeQuery, Pip, RegionHierarchy};

use super::{AccessRequest, UsageKey, UsageState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictStatus {
    Satisfied,
    Unsatisfied,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintVerdict {
    pub status: VerdictStatus,
    pub reason: String,
}

impl ConstraintVerdict {
    pub fn satisfied(reason: impl Into<String>) -> Self {
        ConstraintVerdict {
            status: VerdictStatus::Satisfied,
            reason: reason.into(),
        }
    }

    pub fn unsatisfied(reason: impl Into<String>) -> Self {
        ConstraintVerdict {
            status: VerdictStatus::Unsatisfied,
            reason: reason.into(),
        }
    }

    pub fn undetermined(reason: impl Into<String>) -> Self {
        ConstraintVerdict {
            status: VerdictStatus::Undetermined,
            reason: reason.into(),
        }
    }

    pub fn is_satisfied(&self) -> bool {
        self.status == VerdictStatus::Satisfied
    }

    fn from_bool(ok: bool, reason: String) -> Self {
        if ok {
            ConstraintVerdict::satisfied(reason)
        } else {
            ConstraintVerdict::unsatisfied(reason)
        }
    }
}

/// Everything a constraint may look at. Borrowed, so evaluation cannot touch the state.
#[derive(Debug, Clone, Copy)]
pub struct EvaluationContext<'a> {
    pub request: &'a AccessRequest,
    pub state: &'a UsageState,
    pub pip: &'a Pip,
    /// Counter the enclosing rule meters.
    pub key: &'a UsageKey,
    /// All constraints of the enclosing rule, used to pair count with timeInterval.
    pub siblings: &'a [Constraint],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct TypeMismatch;

/// Applies `op` to two terms. Regions are needed only for `isPartOf`.
pub(crate) fn compare_terms(
    left: &Term,
    op: &Operator,
    right: &Term,
    regions: &RegionHierarchy,
) -> Result<bool, TypeMismatch> {
    match op {
        Operator::IsPartOf => {
            let inner = region_code(left);
            let outer = region_code(right);
            Ok(regions.contains(outer, inner))
        }
        Operator::IsAnyOf => {
            let members: Vec<Term> = match right {
                Term::Iri(_) => vec![right.clone()],
                Term::Literal(l) => l
                    .lexical
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| match Iri::new(s) {
                        Ok(iri) if left.as_iri().is_some() => Term::Iri(iri),
                        _ => Term::Literal(TypedLiteral {
                            lexical: s.to_string(),
                            datatype: l.datatype.clone(),
                        }),
                    })
                    .collect(),
            };
            for m in &members {
                if compare_terms(left, &Operator::Eq, m, regions)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        Operator::Unknown(_) => Err(TypeMismatch),
        _ => {
            let ord = order(left, right)?;
            match (op, ord) {
                (Operator::Eq, o) => Ok(o == Some(Ordering::Equal)),
                (Operator::Neq, o) => Ok(o != Some(Ordering::Equal)),
                (_, None) => Err(TypeMismatch),
                (Operator::Lt, Some(o)) => Ok(o == Ordering::Less),
                (Operator::Lteq, Some(o)) => Ok(o != Ordering::Greater),
                (Operator::Gt, Some(o)) => Ok(o == Ordering::Greater),
                (Operator::Gteq, Some(o)) => Ok(o != Ordering::Less),
                _ => Err(TypeMismatch),
            }
        }
    }
}

fn region_code(t: &Term) -> &str {
    match t {
        Term::Iri(i) => i.as_str(),
        Term::Literal(l) => l.lexical.trim(),
    }
}

/// `Some(ordering)` for ordered types, `None` for types with equality only.
fn order(left: &Term, right: &Term) -> Result<Option<Ordering>, TypeMismatch> {
    let (l, r) = match (left, right) {
        (Term::Iri(a), Term::Iri(b)) => {
            return Ok(if a.same_term(b) {
                Some(Ordering::Equal)
            } else {
                None
            })
        }
        (Term::Literal(a), Term::Literal(b)) => (a, b),
        _ => return Err(TypeMismatch),
    };
    let lv = l.value().map_err(|_| TypeMismatch)?;
    let rv = r.value().map_err(|_| TypeMismatch)?;
    match (&lv, &rv) {
        (Value::Number(_), _) | (_, Value::Number(_)) => {
            let a = l.as_number().ok_or(TypeMismatch)?;
            let b = r.as_number().ok_or(TypeMismatch)?;
            Ok(Some(a.cmp(&b)))
        }
        (Value::DateTime(_), _) | (_, Value::DateTime(_)) => {
            let a = as_date_time(&lv).ok_or(TypeMismatch)?;
            let b = as_date_time(&rv).ok_or(TypeMismatch)?;
            Ok(Some(a.cmp(&b)))
        }
        (Value::Duration(a), Value::Duration(b)) => Ok(Some(a.as_millis().cmp(&b.as_millis()))),
        (Value::Boolean(a), Value::Boolean(b)) => Ok((a == b).then_some(Ordering::Equal)),
        (Value::Text(a), Value::Text(b)) => {
            if let (Ok(x), Ok(y)) = (a.trim().parse::<Decimal>(), b.trim().parse::<Decimal>()) {
                return Ok(Some(x.cmp(&y)));
            }
            Ok((a == b).then_some(Ordering::Equal))
        }
        _ => Err(TypeMismatch),
    }
}

fn as_date_time(v: &Value) -> Option<DateTime<Utc>> {
    match v {
        Value::DateTime(d) => Some(*d),
        Value::Text(t) => parse_date_time(t).ok(),
        _ => None,
    }
}

/// Decides a single constraint. Bags (several attribute values) satisfy positive
/// operators when any member does, and `neq` only when every member does.
pub fn evaluate_constraint(c: &Constraint, ctx: &EvaluationContext<'_>) -> ConstraintVerdict {
    let op = &c.left_operand;
    if op.is_odrl("count") {
        if let Some(window) = ctx.siblings.iter().find(|s| s.left_operand.is_odrl("timeInterval")) {
            return check_rate_limit(
                (c, window),
                ctx.state,
                ctx.key,
                ctx.request.timestamp,
                ctx.request.units_requested,
            );
        }
        let total = ctx.state.executed_count(ctx.key) + ctx.request.units_requested;
        return judge(c, &[Term::Literal(TypedLiteral::integer(total as i64))], ctx, || {
            format!("prospective count {total}")
        });
    }
    if op.is_odrl("timeInterval") {
        let paired = ctx.siblings.iter().any(|s| s.left_operand.is_odrl("count"));
        return ConstraintVerdict::satisfied(if paired {
            "window of the paired count bound"
        } else {
            "interval is enforced by monitoring"
        });
    }
    if op.is_odrl("event") {
        return ConstraintVerdict::satisfied("ordering is enforced by the PEP");
    }
    if op.is_odrl("unitOfCount") {
        return match ctx.request.attribute(op) {
            None => ConstraintVerdict::satisfied("unit not stated in request"),
            Some(v) => judge(c, std::slice::from_ref(v), ctx, || format!("unit {v}")),
        };
    }
    if op.is_dsp("concurrentConnections") {
        let open = ctx.state.active_connections(ctx.key) + 1;
        return judge(c, &[Term::Literal(TypedLiteral::integer(open as i64))], ctx, || {
            format!("{open} concurrent connections")
        });
    }
    if op.is_odrl("dateTime") {
        let now = lookup(c, ctx, false)
            .unwrap_or_else(|| vec![Term::Literal(TypedLiteral::date_time(ctx.request.timestamp))]);
        return judge(c, &now, ctx, || "current time".to_string());
    }
    // Claims must come from a trusted provider, never from the requester.
    let requester_may_claim = !op.is_dsp("attestedClaim");
    match lookup(c, ctx, requester_may_claim) {
        Some(bag) => judge(c, &bag, ctx, || format!("{} from context", op.local_name())),
        None => ConstraintVerdict::undetermined(format!("attribute unavailable: {op}")),
    }
}

fn lookup(c: &Constraint, ctx: &EvaluationContext<'_>, from_request: bool) -> Option<Vec<Term>> {
    let q = AttributeQuery {
        operand: c.left_operand.clone(),
        subject: ctx.request.requester.clone(),
        at: ctx.request.timestamp,
    };
    ctx.pip.query(&q).or_else(|| {
        if from_request {
            ctx.request.attribute(&c.left_operand).map(|t| vec![t.clone()])
        } else {
            None
        }
    })
}

fn judge(
    c: &Constraint,
    bag: &[Term],
    ctx: &EvaluationContext<'_>,
    what: impl FnOnce() -> String,
) -> ConstraintVerdict {
    let regions = &ctx.pip.regions;
    let mut results = Vec::with_capacity(bag.len());
    for v in bag {
        match compare_terms(v, &c.operator, &c.right_operand, regions) {
            Ok(b) => results.push(b),
            Err(TypeMismatch) => return ConstraintVerdict::unsatisfied("type mismatch"),
        }
    }
    let ok = if c.operator == Operator::Neq {
        !results.is_empty() && results.iter().all(|b| *b)
    } else {
        results.iter().any(|b| *b)
    };
    let shown: Vec<String> = bag.iter().map(|t| t.lexical().to_string()).collect();
    ConstraintVerdict::from_bool(
        ok,
        format!(
            "{} [{}] {} {}",
            what(),
            shown.join(", "),
            c.operator.local_name(),
            c.right_operand.lexical()
        ),
    )
}

/// Sliding-window limit: the exercises strictly inside `(now - W, now]` plus the
/// requested units must satisfy the count bound.
pub fn check_rate_limit(
    constraints: (&Constraint, &Constraint),
    state: &UsageState,
    key: &UsageKey,
    now: DateTime<Utc>,
    units: u64,
) -> ConstraintVerdict {
    let (count, interval) = constraints;
    let window = match interval.right_operand.as_literal().map(TypedLiteral::value) {
        Some(Ok(Value::Duration(d))) => d,
        _ => return ConstraintVerdict::unsatisfied("type mismatch"),
    };
    let since = now - window.as_delta();
    let recent = state
        .exercise_log(key)
        .iter()
        .filter(|t| **t > since)
        .count() as u64;
    let total = recent + units;
    let left = Term::Literal(TypedLiteral::integer(total as i64));
    match compare_terms(&left, &count.operator, &count.right_operand, &RegionHierarchy::default()) {
        Ok(ok) => ConstraintVerdict::from_bool(
            ok,
            format!(
                "{total} in window {window} {} {}",
                count.operator.local_name(),
                count.right_operand.lexical()
            ),
        ),
        Err(TypeMismatch) => ConstraintVerdict::unsatisfied("type mismatch"),
    }
}
