use serde_json::Value as Json;

use crate::model::{
    validate_policy, ActionExpression, Constraint, Datatype, Iri, Operator, Policy, PolicyKind, Rule,
    RuleKind, Term, TypedLiteral, Violation,
};
use crate::profile::{data_spaces_profile, odrl_core, ProfileRegistry};

use super::{descriptor, shape_of, ParamKind, PatternDescriptor, Shape};

/// Template parameters as a JSON object.
pub type Params = serde_json::Map<String, Json>;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PatternError {
    #[error("unknown pattern `{0}`")]
    UnknownPattern(String),
    #[error("{pattern}: missing parameter `{name}`")]
    MissingParameter { pattern: String, name: String },
    #[error("{pattern}: parameter `{name}` {reason}")]
    InvalidParameter {
        pattern: String,
        name: String,
        reason: String,
    },
    #[error("conflicting {0} across patterns")]
    Conflict(&'static str),
    #[error("instantiated policy is invalid: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("no patterns given")]
    Empty,
}

struct Args<'a> {
    desc: &'static PatternDescriptor,
    params: &'a Params,
}

impl<'a> Args<'a> {
    fn new(desc: &'static PatternDescriptor, params: &'a Params) -> Result<Self, PatternError> {
        if let Some(name) = params.keys().find(|k| desc.parameter(k).is_none()) {
            return Err(PatternError::InvalidParameter {
                pattern: desc.id.into(),
                name: name.clone(),
                reason: "is not accepted by this pattern".into(),
            });
        }
        let args = Args { desc, params };
        for p in &desc.parameter_schema {
            if p.required && args.raw(p.name).is_none() {
                return Err(PatternError::MissingParameter {
                    pattern: desc.id.into(),
                    name: p.name.into(),
                });
            }
            args.check(p.name, p.kind)?;
        }
        Ok(args)
    }

    fn raw(&self, name: &str) -> Option<&'a Json> {
        self.params.get(name).filter(|v| !v.is_null())
    }

    fn bad(&self, name: &str, kind: ParamKind) -> PatternError {
        PatternError::InvalidParameter {
            pattern: self.desc.id.into(),
            name: name.into(),
            reason: format!("must be {kind}"),
        }
    }

    /// Lexical form of a scalar parameter.
    fn lexical(&self, name: &str) -> Option<String> {
        match self.raw(name)? {
            Json::String(s) => Some(s.clone()),
            Json::Number(n) => Some(n.to_string()),
            Json::Bool(b) => Some(b.to_string()),
            _ => None,
        }
    }

    fn check(&self, name: &str, kind: ParamKind) -> Result<(), PatternError> {
        if self.raw(name).is_none() {
            return Ok(());
        }
        let lexical = self.lexical(name).ok_or_else(|| self.bad(name, kind))?;
        let ok = match kind {
            ParamKind::Iri => Iri::parse_or_expand(&lexical).is_ok(),
            ParamKind::Text => !lexical.is_empty(),
            ParamKind::Integer => lexical.parse::<u64>().is_ok(),
            ParamKind::Decimal => TypedLiteral::new(lexical.as_str(), Datatype::Decimal).is_ok(),
            ParamKind::DateTime => TypedLiteral::new(lexical.as_str(), Datatype::DateTime).is_ok(),
            ParamKind::Duration => TypedLiteral::new(lexical.as_str(), Datatype::Duration).is_ok(),
            ParamKind::PolicyKind => matches!(lexical.as_str(), "Set" | "Offer" | "Agreement"),
        };
        if ok {
            Ok(())
        } else {
            Err(self.bad(name, kind))
        }
    }

    fn iri(&self, name: &str) -> Option<Iri> {
        self.lexical(name).map(|s| Iri::parse_or_expand(&s).expect("checked"))
    }

    fn text(&self, name: &str) -> TypedLiteral {
        TypedLiteral::string(self.lexical(name).expect("required"))
    }

    fn typed(&self, name: &str, datatype: Datatype) -> TypedLiteral {
        TypedLiteral::new(self.lexical(name).expect("required"), datatype).expect("checked")
    }

    fn iri_req(&self, name: &str) -> Iri {
        self.iri(name).expect("required")
    }
}

#[derive(Default)]
struct Fragment {
    shape: Option<Shape>,
    target: Option<Iri>,
    assigner: Option<Iri>,
    assignee: Option<Iri>,
    action: Option<ActionExpression>,
    constraints: Vec<Constraint>,
    duties: Vec<Rule>,
    obligations: Vec<Rule>,
}

fn duty(action: Iri, target: &Option<Iri>) -> Rule {
    let mut d = Rule::duty(action);
    d.target = target.clone();
    d
}

fn fragment(id: &'static str, a: &Args<'_>) -> Fragment {
    let mut f = Fragment {
        shape: Some(shape_of(id)),
        target: a.iri("target"),
        assigner: a.iri("assigner"),
        assignee: a.iri("assignee"),
        action: a.iri("action").map(ActionExpression::new),
        ..Fragment::default()
    };
    let lteq_max = |left: Iri, datatype: Option<Datatype>| {
        let bound = match datatype {
            Some(dt) => a.typed("max", dt),
            None => a.text("max"),
        };
        Constraint::new(left, Operator::Lteq, bound)
    };
    match id {
        "allow-access" => {}
        "location-access" => f
            .constraints
            .push(Constraint::odrl("spatial", Operator::IsPartOf, a.text("region"))),
        "location-storage" => f.duties.push(duty(Iri::dsp("store"), &f.target).with_constraint(
            Constraint::dsp("storageRegion", Operator::IsPartOf, a.text("region")),
        )),
        "time-restriction" => {
            f.constraints.push(Constraint::odrl(
                "dateTime",
                Operator::Gteq,
                a.typed("start", Datatype::DateTime),
            ));
            f.constraints.push(Constraint::odrl(
                "dateTime",
                Operator::Lteq,
                a.typed("end", Datatype::DateTime),
            ));
        }
        "access-count" => f.constraints.push(lteq_max(Iri::odrl("count"), None)),
        "rate-limit" => {
            f.constraints.push(lteq_max(Iri::odrl("count"), None));
            f.constraints.push(Constraint::odrl(
                "timeInterval",
                Operator::Eq,
                a.typed("window", Datatype::Duration),
            ));
        }
        "concurrent-connections" => f
            .constraints
            .push(lteq_max(Iri::dsp("concurrentConnections"), Some(Datatype::Integer))),
        "data-amount" => {
            f.action = Some(ActionExpression::refined(
                Iri::odrl("read"),
                vec![Constraint::odrl("unitOfCount", Operator::Eq, a.text("unit"))],
            ));
            f.constraints.push(lteq_max(Iri::odrl("count"), None));
        }
        "processing-power" => f
            .constraints
            .push(lteq_max(Iri::dsp("processingPower"), Some(Datatype::Decimal))),
        "bandwidth" => f
            .constraints
            .push(lteq_max(Iri::dsp("bandwidth"), Some(Datatype::Decimal))),
        "billing" => f.duties.push(duty(Iri::odrl("compensate"), &None).with_constraint(
            Constraint::odrl("payAmount", Operator::Eq, a.typed("amount", Datatype::Decimal)),
        )),
        "data-quality" => {
            let mut d = duty(Iri::dsp("qualityControl"), &f.target)
                .with_constraint(Constraint::odrl("event", Operator::Lt, Iri::odrl("policyUsage")));
            d.action.refinements.push(Constraint::dsp(
                "conformsTo",
                Operator::Eq,
                a.iri_req("shape"),
            ));
            d.assigner = f.assigner.clone();
            d.assignee = f.assignee.clone();
            f.obligations.push(d);
        }
        "deletion" => f.duties.push(duty(Iri::odrl("delete"), &f.target).with_constraint(
            Constraint::odrl("dateTime", Operator::Lt, a.typed("deadline", Datatype::DateTime)),
        )),
        "purpose" => f
            .constraints
            .push(Constraint::odrl("purpose", Operator::Eq, a.iri_req("purpose"))),
        "provable-attribute" => f
            .constraints
            .push(Constraint::dsp("attestedClaim", Operator::Eq, a.iri_req("claim"))),
        "encryption-by-consumer" => f.duties.push(duty(Iri::dsp("encrypt"), &f.target)),
        "encryption-by-provider" => {
            let mut d = duty(Iri::dsp("encrypt"), &f.target);
            d.assigner = f.assignee.clone();
            d.assignee = f.assigner.clone();
            f.duties.push(d);
        }
        "aggregation" => f.duties.push(duty(Iri::odrl("aggregate"), &f.target)),
        "anonymization" => f.duties.push(duty(Iri::odrl("anonymize"), &f.target)),
        "activity-logging" => f.duties.push(duty(Iri::odrl("inform"), &f.target)),
        "delegation" => {
            f.action = Some(ActionExpression::new(Iri::odrl("distribute")));
            f.duties.push(duty(Iri::odrl("nextPolicy"), &Some(a.iri_req("next_policy"))));
        }
        "up-to-dateness" => {
            let mut d = duty(Iri::dsp("update"), &f.target).with_constraint(Constraint::odrl(
                "timeInterval",
                Operator::Eq,
                a.typed("interval", Datatype::Duration),
            ));
            d.assigner = f.assigner.clone();
            d.assignee = f.assignee.clone();
            f.obligations.push(d);
        }
        other => unreachable!("catalog id without template: {other}"),
    }
    f
}

fn agree<T: PartialEq + Clone>(slot: &mut Option<T>, value: Option<T>, what: &'static str) -> Result<(), PatternError> {
    match (slot.as_ref(), value) {
        (_, None) => Ok(()),
        (None, Some(v)) => {
            *slot = Some(v);
            Ok(())
        }
        (Some(a), Some(b)) if *a == b => Ok(()),
        _ => Err(PatternError::Conflict(what)),
    }
}

fn uses_dsp(policy: &Policy) -> bool {
    let term_is_dsp = |t: &Term| t.as_iri().is_some_and(|i| i.canonical().as_str().starts_with(crate::vocab::DSP));
    let iri_is_dsp = |i: &Iri| i.canonical().as_str().starts_with(crate::vocab::DSP);
    policy.walk_rules().iter().any(|(r, _)| {
        iri_is_dsp(&r.action.action)
            || r.all_constraints()
                .any(|c| iri_is_dsp(&c.left_operand) || term_is_dsp(&c.right_operand))
    })
}

/// Instantiates one pattern.
pub fn instantiate(id: &str, params: &Params) -> Result<Policy, PatternError> {
    instantiate_all(&[(id, params.clone())])
}

/// Instantiates several patterns into one policy. Permission-shaped patterns are merged
/// into a single permission; obligation-shaped ones become top-level obligations. The
/// first entry's `uid` (or its id) names the policy.
pub fn instantiate_all(entries: &[(&str, Params)]) -> Result<Policy, PatternError> {
    let (first_id, _) = entries.first().ok_or(PatternError::Empty)?;
    let mut uid: Option<Iri> = None;
    let mut kind: Option<PolicyKind> = None;
    let mut perm = Fragment::default();
    let mut obligations = Vec::new();

    for (id, params) in entries {
        let desc = descriptor(id).ok_or_else(|| PatternError::UnknownPattern(id.to_string()))?;
        let args = Args::new(desc, params)?;
        agree(&mut uid, args.iri("uid"), "uid")?;
        let k = args.lexical("kind").map(|k| match k.as_str() {
            "Offer" => PolicyKind::Offer,
            "Agreement" => PolicyKind::Agreement,
            _ => PolicyKind::Set,
        });
        agree(&mut kind, k, "policy kind")?;
        let f = fragment(desc.id, &args);
        obligations.extend(f.obligations);
        if f.shape == Some(Shape::Permission) {
            perm.shape = Some(Shape::Permission);
            agree(&mut perm.target, f.target, "target")?;
            agree(&mut perm.assigner, f.assigner, "assigner")?;
            agree(&mut perm.assignee, f.assignee, "assignee")?;
            agree(&mut perm.action, f.action, "action")?;
            perm.constraints.extend(f.constraints);
            perm.duties.extend(f.duties);
        }
    }

    let first = descriptor(first_id).expect("checked above");
    let uid = uid.unwrap_or_else(|| {
        Iri::new(format!("http://example.com/policies#{}", first.id)).expect("valid IRI")
    });
    let mut policy = Policy::new(uid, kind.unwrap_or_default());
    if perm.shape.is_some() {
        let action = perm.action.unwrap_or_else(|| ActionExpression::new(Iri::odrl("use")));
        let mut rule = Rule::new(RuleKind::Permission, action);
        rule.target = perm.target;
        rule.assigner = perm.assigner;
        rule.assignee = perm.assignee;
        rule.constraints = perm.constraints;
        rule.duties = perm.duties;
        policy.rules.push(rule);
    }
    policy.rules.extend(obligations);
    policy.profiles = vec![if uses_dsp(&policy) {
        data_spaces_profile()
    } else {
        odrl_core()
    }];
    let violations = validate_policy(&policy, ProfileRegistry::builtin());
    if violations.is_empty() {
        Ok(policy)
    } else {
        Err(PatternError::Invalid(violations))
    }
}
