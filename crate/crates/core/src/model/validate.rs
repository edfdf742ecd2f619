use std::fmt;

use serde::Serialize;

use crate::profile::{ProfileRegistry, TermKind};

use super::{Constraint, Operator, Policy, PolicyKind, Rule, RuleKind, Term};

/// A structural problem that makes a policy unusable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Location inside the policy, e.g. `rules[0].duties[1]`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Structural validation. An empty result means the policy is valid.
///
/// Unknown vocabulary is not a violation; see [`vocabulary_warnings`].
pub fn validate_policy(policy: &Policy, registry: &ProfileRegistry) -> Vec<Violation> {
    let _ = registry;
    let mut out = Vec::new();
    let mut push = |path: String, message: String| out.push(Violation { path, message });

    if policy.rules.is_empty() {
        push(String::new(), "policy has no rules".into());
    }
    for (i, rule) in policy.rules.iter().enumerate() {
        let path = format!("rules[{i}]");
        match policy.kind {
            PolicyKind::Offer if rule.assigner.is_none() => {
                push(path.clone(), format!("{} in an Offer has no assigner", rule.kind));
            }
            PolicyKind::Agreement => {
                if rule.assigner.is_none() {
                    push(path.clone(), format!("{} in an Agreement has no assigner", rule.kind));
                }
                if rule.assignee.is_none() {
                    push(path.clone(), format!("{} in an Agreement has no assignee", rule.kind));
                }
            }
            _ => {}
        }
        check_rule(rule, &path, &mut push);
        if !rule.duties.is_empty() && rule.kind != RuleKind::Permission {
            push(path.clone(), format!("duties nested under a {}", rule.kind));
        }
        for (j, duty) in rule.duties.iter().enumerate() {
            let dpath = format!("{path}.duties[{j}]");
            if duty.kind != RuleKind::Duty {
                push(dpath.clone(), format!("nested rule is a {}, expected Duty", duty.kind));
            }
            if !duty.duties.is_empty() {
                push(dpath.clone(), "duty has nested duties".into());
            }
            check_rule(duty, &dpath, &mut push);
        }
    }
    out
}

fn check_rule(rule: &Rule, path: &str, push: &mut impl FnMut(String, String)) {
    for (k, c) in rule.action.refinements.iter().enumerate() {
        check_constraint(c, &format!("{path}.action.refinements[{k}]"), push);
    }
    for (k, c) in rule.constraints.iter().enumerate() {
        check_constraint(c, &format!("{path}.constraints[{k}]"), push);
    }
}

fn check_constraint(c: &Constraint, path: &str, push: &mut impl FnMut(String, String)) {
    if let Operator::Unknown(iri) = &c.operator {
        push(path.to_string(), format!("unknown operator <{iri}>"));
    }
    if let Term::Literal(lit) = &c.right_operand {
        if let Err(e) = lit.value() {
            push(path.to_string(), format!("malformed literal: {e}"));
        }
    }
}

/// Actions and left operands the registry does not know.
pub fn vocabulary_warnings(policy: &Policy, registry: &ProfileRegistry) -> Vec<String> {
    let mut out = Vec::new();
    for (rule, _) in policy.walk_rules() {
        if registry.resolve_kind(&rule.action.action) != Some(TermKind::Action) {
            out.push(format!("unknown action <{}>", rule.action.action));
        }
        for c in rule.all_constraints() {
            if registry.resolve_kind(&c.left_operand) != Some(TermKind::LeftOperand) {
                out.push(format!("unknown left operand <{}>", c.left_operand));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Iri, TypedLiteral, Datatype};

    fn iri(s: &str) -> Iri {
        Iri::new(s).unwrap()
    }

    fn registry() -> &'static ProfileRegistry {
        ProfileRegistry::builtin()
    }

    #[test]
    fn empty_policy_has_one_violation() {
        let p = Policy::new(iri("http://example.com/p"), PolicyKind::Set);
        let v = validate_policy(&p, registry());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "policy has no rules");
    }

    #[test]
    fn agreement_requires_assignee() {
        let mut p = Policy::new(iri("http://example.com/p"), PolicyKind::Agreement);
        p.rules.push(
            Rule::permission(Iri::odrl("read"))
                .with_parties(Some(iri("http://example.com/provider")), None),
        );
        let v = validate_policy(&p, registry());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].path, "rules[0]");
        assert!(v[0].message.contains("assignee"));
    }

    #[test]
    fn nesting_rules() {
        let mut p = Policy::new(iri("http://example.com/p"), PolicyKind::Set);
        let mut duty = Rule::duty(Iri::odrl("delete"));
        duty.duties.push(Rule::duty(Iri::odrl("inform")));
        p.rules.push(Rule::prohibition(Iri::odrl("read")).with_duty(duty));
        let v = validate_policy(&p, registry());
        let msgs: Vec<_> = v.iter().map(|v| v.message.as_str()).collect();
        assert!(msgs.contains(&"duties nested under a Prohibition"));
        assert!(msgs.contains(&"duty has nested duties"));
    }

    #[test]
    fn bad_operator_and_literal() {
        let mut p = Policy::new(iri("http://example.com/p"), PolicyKind::Set);
        let bad_lit = TypedLiteral {
            lexical: "soon".into(),
            datatype: Datatype::DateTime,
        };
        p.rules.push(
            Rule::permission(Iri::odrl("read"))
                .with_constraint(Constraint::odrl("dateTime", Operator::Lt, bad_lit))
                .with_constraint(Constraint::new(
                    Iri::odrl("count"),
                    Operator::Unknown(iri("http://example.com/near")),
                    TypedLiteral::integer(1),
                )),
        );
        assert_eq!(validate_policy(&p, registry()).len(), 2);
    }

    #[test]
    fn unknown_vocabulary_is_only_a_warning() {
        let mut p = Policy::new(iri("http://example.com/p"), PolicyKind::Set);
        p.rules.push(Rule::permission(iri("http://example.com/unregistered")));
        assert!(validate_policy(&p, registry()).is_empty());
        assert_eq!(vocabulary_warnings(&p, registry()).len(), 1);
    }
}
