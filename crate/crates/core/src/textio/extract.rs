//! Triples to policy values.

use crate::model::{
    ActionExpression, Annotation, Asset, Constraint, Iri, Operator, Policy, PolicyKind, Rule,
    RuleKind, Term,
};
use crate::vocab;

use super::graph::{Graph, Node, Object, Triple};
use super::{ParseError, SourceLocation};

/// Location of the reference that led to a node, used when the node itself is faulty.
#[derive(Clone, Copy)]
struct Origin {
    loc: SourceLocation,
    offset: usize,
}

pub(crate) struct Extractor<'a> {
    text: &'a str,
    graph: &'a Graph,
}

fn odrl(local: &str) -> String {
    vocab::odrl(local)
}

fn rdf(local: &str) -> String {
    format!("{}{local}", vocab::RDF)
}

fn pred_is(t: &Triple, iri: &str) -> bool {
    t.predicate.as_str() == iri
}

const MAX_RULE_DEPTH: usize = 3;

impl<'a> Extractor<'a> {
    pub fn new(text: &'a str, graph: &'a Graph) -> Self {
        Extractor { text, graph }
    }

    fn error(&self, origin: Origin, message: impl Into<String>) -> ParseError {
        ParseError::new(self.text, origin.loc, origin.offset, message)
    }

    fn origin(t: &Triple) -> Origin {
        Origin {
            loc: t.loc,
            offset: t.offset,
        }
    }

    /// Subjects typed with one of the given classes, in order of first appearance.
    fn typed_subjects(&self, classes: &[String]) -> Vec<(Node, Origin)> {
        let mut seen: Vec<(Node, Origin)> = Vec::new();
        let rdf_type = rdf("type");
        for t in &self.graph.triples {
            if !pred_is(t, &rdf_type) {
                continue;
            }
            let Object::Node(Node::Iri(class)) = &t.object else {
                continue;
            };
            if classes.iter().any(|c| c == class.as_str())
                && !seen.iter().any(|(n, _)| n == &t.subject)
            {
                seen.push((t.subject.clone(), Self::origin(t)));
            }
        }
        seen
    }

    pub fn policies(&self) -> Result<Vec<Policy>, ParseError> {
        let classes = ["Policy", "Set", "Offer", "Agreement"].map(odrl);
        self.typed_subjects(&classes)
            .into_iter()
            .map(|(node, origin)| self.policy(&node, origin))
            .collect()
    }

    pub fn assets(&self) -> Result<Vec<Asset>, ParseError> {
        let mut out = Vec::new();
        for (node, origin) in self.typed_subjects(&[odrl("Asset")]) {
            let Node::Iri(uid) = node.clone() else {
                return Err(self.error(origin, "asset must be identified by an IRI"));
            };
            let title = self
                .graph
                .about(&node)
                .find(|t| pred_is(t, &format!("{}title", vocab::DC11)))
                .and_then(|t| match &t.object {
                    Object::Literal(l) => Some(l.lexical.clone()),
                    _ => None,
                });
            out.push(Asset { uid, title });
        }
        Ok(out)
    }

    fn policy(&self, node: &Node, origin: Origin) -> Result<Policy, ParseError> {
        let Node::Iri(uid) = node else {
            return Err(self.error(origin, "policy must be identified by an IRI"));
        };
        let mut kind: Option<PolicyKind> = None;
        let mut policy = Policy::new(uid.clone(), PolicyKind::Set);
        for t in self.graph.about(node) {
            let p = t.predicate.as_str();
            if p == rdf("type") {
                let Object::Node(Node::Iri(class)) = &t.object else {
                    return Err(self.error(Self::origin(t), "policy type must be an IRI"));
                };
                let this = if class.is_odrl("Offer") {
                    Some(PolicyKind::Offer)
                } else if class.is_odrl("Agreement") {
                    Some(PolicyKind::Agreement)
                } else if class.is_odrl("Set") {
                    Some(PolicyKind::Set)
                } else {
                    None
                };
                if let Some(this) = this {
                    match kind {
                        Some(prev) if prev != this => {
                            return Err(self.error(Self::origin(t), "conflicting policy classes"))
                        }
                        _ => kind = Some(this),
                    }
                }
            } else if p == odrl("profile") {
                policy.profiles.push(self.object_iri(t)?);
            } else if let Some(rule_kind) = rule_property(p) {
                policy.rules.push(self.rule(t, rule_kind, 0)?);
            } else {
                policy.annotations.push(self.annotation(t)?);
            }
        }
        policy.kind = kind.unwrap_or_default();
        Ok(policy)
    }

    fn object_iri(&self, t: &Triple) -> Result<Iri, ParseError> {
        match &t.object {
            Object::Node(Node::Iri(iri)) => Ok(iri.clone()),
            _ => Err(self.error(
                Self::origin(t),
                format!("<{}> expects an IRI value", t.predicate),
            )),
        }
    }

    fn annotation(&self, t: &Triple) -> Result<Annotation, ParseError> {
        let value = match &t.object {
            Object::Node(Node::Iri(iri)) => Term::Iri(iri.clone()),
            Object::Literal(lit) => Term::Literal(lit.clone()),
            Object::Node(Node::Blank(_)) => {
                return Err(self.error(
                    Self::origin(t),
                    format!("unsupported nested value for <{}>", t.predicate),
                ))
            }
        };
        Ok(Annotation {
            predicate: t.predicate.clone(),
            value,
        })
    }

    /// Resolves the node a triple points at, failing if it is a blank node that was never
    /// described.
    fn referenced_node<'t>(&self, t: &'t Triple) -> Result<&'t Node, ParseError> {
        match &t.object {
            Object::Node(node) => {
                if !self.graph.has_subject(node) {
                    let name = match node {
                        Node::Blank(label) if label.starts_with('#') => "[]".to_string(),
                        Node::Blank(label) => format!("_:{label}"),
                        Node::Iri(iri) => format!("<{iri}>"),
                    };
                    return Err(self.error(
                        Self::origin(t),
                        format!("{name} is referenced but never defined"),
                    ));
                }
                Ok(node)
            }
            Object::Literal(_) => Err(self.error(
                Self::origin(t),
                format!("<{}> expects a node, found a literal", t.predicate),
            )),
        }
    }

    fn rule(&self, via: &Triple, kind: RuleKind, depth: usize) -> Result<Rule, ParseError> {
        if depth >= MAX_RULE_DEPTH {
            return Err(self.error(Self::origin(via), "rules nested too deeply"));
        }
        let node = self.referenced_node(via)?;
        let mut action: Option<ActionExpression> = None;
        let mut rule = Rule::new(kind, ActionExpression::new(Iri::odrl("use")));
        let set_once = |slot: &mut Option<Iri>, t: &Triple| -> Result<(), ParseError> {
            if slot.is_some() {
                return Err(self.error(
                    Self::origin(t),
                    format!("<{}> given more than once", t.predicate),
                ));
            }
            *slot = Some(self.object_iri(t)?);
            Ok(())
        };
        for t in self.graph.about(node) {
            let p = t.predicate.as_str();
            if p == rdf("type") {
                continue;
            } else if p == odrl("target") {
                set_once(&mut rule.target, t)?;
            } else if p == odrl("assigner") {
                set_once(&mut rule.assigner, t)?;
            } else if p == odrl("assignee") {
                set_once(&mut rule.assignee, t)?;
            } else if p == odrl("action") {
                if action.is_some() {
                    return Err(self.error(Self::origin(t), "rule has more than one action"));
                }
                action = Some(self.action(t)?);
            } else if p == odrl("constraint") {
                rule.constraints.push(self.constraint(t)?);
            } else if p == odrl("duty") || p == odrl("obligation") {
                rule.duties.push(self.rule(t, RuleKind::Duty, depth + 1)?);
            } else {
                rule.annotations.push(self.annotation(t)?);
            }
        }
        rule.action = action.ok_or_else(|| self.error(Self::origin(via), "rule has no action"))?;
        Ok(rule)
    }

    fn action(&self, via: &Triple) -> Result<ActionExpression, ParseError> {
        if let Object::Node(Node::Iri(iri)) = &via.object {
            if !self.graph.has_subject(&Node::Iri(iri.clone())) {
                return Ok(ActionExpression::new(iri.clone()));
            }
        }
        let node = self.referenced_node(via)?;
        let mut value: Option<Iri> = None;
        let mut refinements = Vec::new();
        for t in self.graph.about(node) {
            let p = t.predicate.as_str();
            if p == rdf("type") {
                continue;
            } else if p == rdf("value") {
                if value.is_some() {
                    return Err(self.error(Self::origin(t), "action has more than one rdf:value"));
                }
                value = Some(self.object_iri(t)?);
            } else if p == odrl("refinement") {
                refinements.push(self.constraint(t)?);
            } else {
                return Err(self.error(
                    Self::origin(t),
                    format!("unsupported action property <{}>", t.predicate),
                ));
            }
        }
        match (value, node) {
            (Some(action), _) => Ok(ActionExpression::refined(action, refinements)),
            (None, Node::Iri(iri)) if refinements.is_empty() => Ok(ActionExpression::new(iri.clone())),
            (None, _) => Err(self.error(Self::origin(via), "action has no rdf:value")),
        }
    }

    fn constraint(&self, via: &Triple) -> Result<Constraint, ParseError> {
        let node = self.referenced_node(via)?;
        let mut left = None;
        let mut operator = None;
        let mut right = None;
        for t in self.graph.about(node) {
            let p = t.predicate.as_str();
            let dup = |slot_full: bool| {
                if slot_full {
                    Err(self.error(
                        Self::origin(t),
                        format!("<{}> given more than once", t.predicate),
                    ))
                } else {
                    Ok(())
                }
            };
            if p == rdf("type") {
                continue;
            } else if p == odrl("leftOperand") {
                dup(left.is_some())?;
                left = Some(self.object_iri(t)?);
            } else if p == odrl("operator") {
                dup(operator.is_some())?;
                operator = Some(Operator::from_iri(&self.object_iri(t)?));
            } else if p == odrl("rightOperand") {
                dup(right.is_some())?;
                right = Some(match &t.object {
                    Object::Node(Node::Iri(iri)) => Term::Iri(iri.clone()),
                    Object::Literal(lit) => Term::Literal(lit.clone()),
                    Object::Node(Node::Blank(_)) => {
                        return Err(self.error(Self::origin(t), "rightOperand must not be a blank node"))
                    }
                });
            } else {
                return Err(self.error(
                    Self::origin(t),
                    format!("unsupported constraint property <{}>", t.predicate),
                ));
            }
        }
        match (left, operator, right) {
            (Some(left_operand), Some(operator), Some(right_operand)) => Ok(Constraint {
                left_operand,
                operator,
                right_operand,
            }),
            (None, ..) => Err(self.error(Self::origin(via), "constraint has no leftOperand")),
            (_, None, _) => Err(self.error(Self::origin(via), "constraint has no operator")),
            (.., None) => Err(self.error(Self::origin(via), "constraint has no rightOperand")),
        }
    }
}

fn rule_property(p: &str) -> Option<RuleKind> {
    let local = p.strip_prefix(vocab::ODRL)?;
    match local {
        "permission" => Some(RuleKind::Permission),
        "prohibition" => Some(RuleKind::Prohibition),
        "obligation" | "duty" => Some(RuleKind::Duty),
        _ => None,
    }
}
