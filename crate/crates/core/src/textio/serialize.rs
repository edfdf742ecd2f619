use std::fmt::Write;

use crate::model::{
    ActionExpression, Annotation, Constraint, Datatype, Iri, Policy, PolicyKind, Rule, RuleKind,
    Term, TypedLiteral,
};
use crate::vocab::CANONICAL_PREFIXES;

/// Canonical Turtle for a policy.
///
/// Output is a pure function of the policy's normalized form: a fixed prefix block,
/// rules ordered Permission < Prohibition < Duty then by target, constraints ordered by
/// left operand, and every nested structure written as an anonymous blank node.
pub fn serialize(policy: &Policy) -> String {
    let mut out = String::new();
    for (prefix, ns) in CANONICAL_PREFIXES {
        let _ = writeln!(out, "@prefix {prefix}: <{ns}> .");
    }
    out.push('\n');
    let _ = writeln!(out, "{}", iri(&policy.uid));

    let class = match policy.kind {
        PolicyKind::Set => "odrl:Set",
        PolicyKind::Offer => "odrl:Offer",
        PolicyKind::Agreement => "odrl:Agreement",
    };
    let mut props: Vec<String> = vec![format!("a {class}")];
    let mut profiles: Vec<&Iri> = policy.profiles.iter().collect();
    profiles.sort();
    props.extend(profiles.into_iter().map(|p| format!("odrl:profile {}", iri(p))));
    for rule in sorted_rules(&policy.rules, 1) {
        let property = match rule.0.kind {
            RuleKind::Permission => "odrl:permission",
            RuleKind::Prohibition => "odrl:prohibition",
            RuleKind::Duty => "odrl:obligation",
        };
        props.push(format!("{property} {}", rule.1));
    }
    props.extend(sorted_annotations(&policy.annotations));
    write_props(&mut out, &props, 1);
    out.push_str(" .\n");
    out
}

fn indent(level: usize) -> String {
    "  ".repeat(level)
}

fn write_props(out: &mut String, props: &[String], level: usize) {
    let pad = indent(level);
    for (i, p) in props.iter().enumerate() {
        if i > 0 {
            out.push_str(" ;\n");
        }
        out.push_str(&pad);
        out.push_str(p);
    }
}

fn block(props: &[String], level: usize) -> String {
    let mut out = String::from("[\n");
    write_props(&mut out, props, level + 1);
    out.push('\n');
    out.push_str(&indent(level));
    out.push(']');
    out
}

fn sorted_rules(rules: &[Rule], level: usize) -> Vec<(&Rule, String)> {
    let mut rendered: Vec<(&Rule, String)> = rules.iter().map(|r| (r, rule_block(r, level))).collect();
    rendered.sort_by(|a, b| {
        (a.0.kind, &a.0.target, &a.1).cmp(&(b.0.kind, &b.0.target, &b.1))
    });
    rendered
}

fn rule_block(rule: &Rule, level: usize) -> String {
    let class = match rule.kind {
        RuleKind::Permission => "odrl:Permission",
        RuleKind::Prohibition => "odrl:Prohibition",
        RuleKind::Duty => "odrl:Duty",
    };
    let mut props = vec![format!("a {class}")];
    if let Some(t) = &rule.target {
        props.push(format!("odrl:target {}", iri(t)));
    }
    if let Some(a) = &rule.assigner {
        props.push(format!("odrl:assigner {}", iri(a)));
    }
    if let Some(a) = &rule.assignee {
        props.push(format!("odrl:assignee {}", iri(a)));
    }
    props.push(format!("odrl:action {}", action(&rule.action, level + 1)));
    for c in sorted_constraints(&rule.constraints, level + 1) {
        props.push(format!("odrl:constraint {c}"));
    }
    for (_, d) in sorted_rules(&rule.duties, level + 1) {
        props.push(format!("odrl:duty {d}"));
    }
    props.extend(sorted_annotations(&rule.annotations));
    block(&props, level)
}

fn action(a: &ActionExpression, level: usize) -> String {
    if a.refinements.is_empty() {
        return iri(&a.action);
    }
    let mut props = vec!["a odrl:Action".to_string(), format!("rdf:value {}", iri(&a.action))];
    for c in sorted_constraints(&a.refinements, level + 1) {
        props.push(format!("odrl:refinement {c}"));
    }
    block(&props, level)
}

fn sorted_constraints(cs: &[Constraint], level: usize) -> Vec<String> {
    let mut rendered: Vec<(&Iri, String)> = cs
        .iter()
        .map(|c| {
            let props = vec![
                "a odrl:Constraint".to_string(),
                format!("odrl:leftOperand {}", iri(&c.left_operand)),
                format!("odrl:operator {}", iri(&c.operator.iri())),
                format!("odrl:rightOperand {}", term(&c.right_operand)),
            ];
            (&c.left_operand, block(&props, level))
        })
        .collect();
    rendered.sort();
    rendered.into_iter().map(|(_, s)| s).collect()
}

fn sorted_annotations(annotations: &[Annotation]) -> Vec<String> {
    let mut out: Vec<String> = annotations
        .iter()
        .map(|a| format!("{} {}", iri(&a.predicate), term(&a.value)))
        .collect();
    out.sort();
    out
}

fn term(t: &Term) -> String {
    match t {
        Term::Iri(i) => iri(i),
        Term::Literal(l) => literal(l),
    }
}

fn literal(l: &TypedLiteral) -> String {
    let mut s = String::with_capacity(l.lexical.len() + 2);
    s.push('"');
    for c in l.lexical.chars() {
        match c {
            '"' => s.push_str("\\\""),
            '\\' => s.push_str("\\\\"),
            '\n' => s.push_str("\\n"),
            '\r' => s.push_str("\\r"),
            '\t' => s.push_str("\\t"),
            c if c.is_control() => {
                let _ = write!(s, "\\u{:04X}", c as u32);
            }
            c => s.push(c),
        }
    }
    s.push('"');
    if l.datatype != Datatype::String {
        s.push_str("^^");
        s.push_str(&iri(&l.datatype.iri()));
    }
    s
}

fn is_simple_local(local: &str) -> bool {
    let mut chars = local.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn iri(i: &Iri) -> String {
    for (prefix, ns) in CANONICAL_PREFIXES {
        if let Some(local) = i.as_str().strip_prefix(ns) {
            if is_simple_local(local) {
                return format!("{prefix}:{local}");
            }
        }
    }
    format!("<{i}>")
}
