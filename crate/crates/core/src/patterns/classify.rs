use crate::model::{Policy, Rule, RuleKind};

use super::list_patterns;

fn has_operand(rule: &Rule, pred: impl Fn(&crate::model::Iri) -> bool) -> bool {
    rule.all_constraints().any(|c| pred(&c.left_operand))
}

fn permission_ids(rule: &Rule, out: &mut Vec<&'static str>) {
    let odrl = |local: &'static str| move |i: &crate::model::Iri| i.is_odrl(local);
    let dsp = |local: &'static str| move |i: &crate::model::Iri| i.is_dsp(local);
    let counted = has_operand(rule, odrl("count"));
    let windowed = has_operand(rule, odrl("timeInterval"));
    let metered = rule
        .action
        .refinements
        .iter()
        .any(|c| c.left_operand.is_odrl("unitOfCount"));

    if rule.constraints.is_empty() && rule.action.refinements.is_empty() {
        out.push("allow-access");
    }
    if has_operand(rule, odrl("spatial")) {
        out.push("location-access");
    }
    if rule.constraints.iter().any(|c| c.left_operand.is_odrl("dateTime")) {
        out.push("time-restriction");
    }
    if counted && !windowed && !metered {
        out.push("access-count");
    }
    if counted && windowed {
        out.push("rate-limit");
    }
    if has_operand(rule, dsp("concurrentConnections")) {
        out.push("concurrent-connections");
    }
    if counted && metered {
        out.push("data-amount");
    }
    if has_operand(rule, dsp("processingPower")) {
        out.push("processing-power");
    }
    if has_operand(rule, dsp("bandwidth")) {
        out.push("bandwidth");
    }
    if has_operand(rule, odrl("purpose")) {
        out.push("purpose");
    }
    if has_operand(rule, dsp("attestedClaim")) {
        out.push("provable-attribute");
    }
    for d in &rule.duties {
        duty_ids(d, Some(rule), out);
    }
}

fn duty_ids(duty: &Rule, parent: Option<&Rule>, out: &mut Vec<&'static str>) {
    let action = &duty.action.action;
    if action.is_dsp("store") && has_operand(duty, |i| i.is_dsp("storageRegion")) {
        out.push("location-storage");
    }
    if action.is_odrl("compensate") && has_operand(duty, |i| i.is_odrl("payAmount")) {
        out.push("billing");
    }
    if action.is_dsp("qualityControl") {
        out.push("data-quality");
    }
    if action.is_odrl("delete") {
        out.push("deletion");
    }
    if action.is_dsp("encrypt") {
        let by_provider = match (parent, &duty.assignee) {
            (Some(p), Some(a)) => p.assignee.as_ref() != Some(a),
            (None, Some(_)) => true,
            (_, None) => false,
        };
        out.push(if by_provider {
            "encryption-by-provider"
        } else {
            "encryption-by-consumer"
        });
    }
    if action.is_odrl("aggregate") {
        out.push("aggregation");
    }
    if action.is_odrl("anonymize") {
        out.push("anonymization");
    }
    if action.is_odrl("inform") {
        out.push("activity-logging");
    }
    if action.is_odrl("nextPolicy") {
        out.push("delegation");
    }
    if action.is_dsp("update") && has_operand(duty, |i| i.is_odrl("timeInterval")) {
        out.push("up-to-dateness");
    }
}

/// Ids of every pattern whose template shape occurs in the policy, in catalog order.
pub fn classify(policy: &Policy) -> Vec<String> {
    let mut found = Vec::new();
    for rule in &policy.rules {
        match rule.kind {
            RuleKind::Permission => permission_ids(rule, &mut found),
            RuleKind::Duty => duty_ids(rule, None, &mut found),
            RuleKind::Prohibition => {}
        }
    }
    list_patterns()
        .iter()
        .filter(|d| found.contains(&d.id))
        .map(|d| d.id.to_string())
        .collect()
}
