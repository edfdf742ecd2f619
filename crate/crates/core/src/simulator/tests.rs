use super::*;
use crate::enforcement::DutyStatus;

const DELETION: &str = include_str!("../../fixtures/scenarios/deletion-violated.json");
const RATE: &str = include_str!("../../fixtures/scenarios/rate-limit.json");

fn results(report: &RunReport, negotiation: &str) -> Vec<String> {
    report
        .replies()
        .filter_map(|r| match r {
            Reply::Transfer(t) if t.negotiation == negotiation => Some(t.result.clone()),
            _ => None,
        })
        .collect()
}

#[test]
fn demo_runs() {
    let report = run(&demo_scenario()).unwrap();
    assert!(report.steps.iter().all(|s| s.error.is_none()), "{:?}", report.steps);
    assert_eq!(report.negotiations.len(), 2);
    assert!(report.negotiations.iter().all(|n| n.phase == Phase::Agreed));
    assert_eq!(results(&report, "vehicle-data"), ["allow", "allow", "allow", "block"]);
    assert_eq!(results(&report, "vehicle-feed"), ["allow", "block", "block"]);
    let feed = report.obligations.iter().find(|o| o.negotiation == "vehicle-feed").unwrap();
    assert_eq!(feed.statuses.len(), 1);
    assert_eq!(feed.statuses[0].status, DutyStatus::Fulfilled);
    assert!(report.revocations.is_empty());
}

#[test]
fn runs_are_byte_identical() {
    for text in [DELETION, RATE] {
        let s = Scenario::from_json(text).unwrap();
        let a = run(&s).unwrap();
        let b = run(&s).unwrap();
        assert_eq!(a.log.to_ndjson(), b.log.to_ndjson());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
    let a = run(&demo_scenario()).unwrap();
    let b = run(&demo_scenario()).unwrap();
    assert_eq!(a.log.to_ndjson(), b.log.to_ndjson());
}

#[test]
fn missed_deletion_is_violated() {
    let report = run(&Scenario::from_json(DELETION).unwrap()).unwrap();
    assert_eq!(results(&report, "file1"), ["allow", "block"]);
    let by_action: BTreeMap<&str, DutyStatus> = report
        .statuses()
        .into_iter()
        .map(|s| (s.duty.action.action.local_name(), s.status))
        .collect();
    assert_eq!(by_action["delete"], DutyStatus::Violated);
    assert_eq!(by_action["anonymize"], DutyStatus::Fulfilled);
}

#[test]
fn rate_limit_matches_window_count() {
    let s = Scenario::from_json(RATE).unwrap();
    let report = run(&s).unwrap();
    // Independent replay: a request is allowed iff fewer than 2 allowed requests lie in (t-60, t].
    let mut allowed: Vec<i64> = Vec::new();
    let mut expected = Vec::new();
    for t in (0..=120).step_by(10) {
        let inside = allowed.iter().filter(|&&a| a > t - 60 && a <= t).count();
        if inside < 2 {
            allowed.push(t);
            expected.push("allow");
        } else {
            expected.push("block");
        }
    }
    assert_eq!(results(&report, "telemetry"), expected);
    assert_eq!(expected.iter().filter(|r| **r == "allow").count(), 5);
}

#[test]
fn declined_and_invalid_offers() {
    let offer = demo_scenario().build_offer(&demo_scenario().offers[0]).unwrap();
    let consumer = Iri::new("https://c.example/").unwrap();
    let n = negotiate("x", &offer, &consumer, false);
    assert_eq!(n.history, [Phase::Offered, Phase::Requested, Phase::Declined]);
    let mut set = offer.clone();
    set.kind = PolicyKind::Set;
    let n = negotiate("y", &set, &consumer, true);
    assert_eq!(n.phase, Phase::Declined);
    assert!(n.reason.unwrap().contains("Offer"));
    let n = negotiate("z", &offer, &consumer, true);
    assert_eq!(n.phase, Phase::Agreed);
    let agreement = n.agreement.unwrap();
    assert_eq!(agreement.kind, PolicyKind::Agreement);
    assert!(agreement.rules.iter().all(|r| r.assignee.as_ref() == Some(&consumer)));
}

#[test]
fn illegal_transitions_rejected() {
    let offer = demo_scenario().build_offer(&demo_scenario().offers[0]).unwrap();
    let consumer = Iri::new("https://c.example/").unwrap();
    let mut n = negotiate("x", &offer, &consumer, false);
    let e = n.revoke("late").unwrap_err();
    assert!(e.to_string().contains("illegal transition"), "{e}");
    let e = n.negotiate(&consumer, true).unwrap_err();
    assert!(matches!(e, SimError::IllegalTransition { from: Phase::Declined, to: Phase::Requested }));
    let all = [Phase::Offered, Phase::Requested, Phase::Agreed, Phase::Declined, Phase::Revoked];
    let legal: usize = all
        .iter()
        .flat_map(|a| all.iter().map(move |b| legal_transition(*a, *b) as usize))
        .sum();
    assert_eq!(legal, 4);
    assert!(!history_is_legal(&[Phase::Offered, Phase::Agreed]));
}

#[test]
fn revocation_stops_streams_and_blocks_requests() {
    let mut s = demo_scenario();
    s.script.truncate(5);
    s.script.push(ScriptEntry {
        at: "2024-05-10T09:30:00Z".parse().unwrap(),
        action: "revoke".into(),
        args: json!({"negotiation": "vehicle-feed"}).as_object().unwrap().clone(),
        repeat: None,
    });
    s.script.push(ScriptEntry {
        at: "2024-05-10T09:31:00Z".parse().unwrap(),
        action: "request".into(),
        args: json!({"negotiation": "vehicle-feed"}).as_object().unwrap().clone(),
        repeat: None,
    });
    let report = run(&s).unwrap();
    assert_eq!(report.revocations.len(), 1);
    assert_eq!(results(&report, "vehicle-feed"), ["allow", "block", "revoked"]);
    let feed = report.negotiations.iter().find(|n| n.id == "vehicle-feed").unwrap();
    assert_eq!(feed.phase, Phase::Revoked);
}

#[test]
fn monitoring_revokes_when_attribute_changes() {
    let mut s = demo_scenario();
    s.offers[1].patterns.push(PatternUse {
        id: "location-access".into(),
        params: json!({"action": "odrl:read", "region": "EU"}).as_object().unwrap().clone(),
    });
    s.regions = Some(BTreeMap::from([("EU".to_string(), vec!["DE".to_string(), "AT".to_string()])]));
    let consumer = s.consumer.clone();
    s.attributes.push(AttributeSpec {
        subject: consumer.clone(),
        operand: Iri::odrl("spatial"),
        value: Term::Literal(TypedLiteral::string("DE")),
    });
    s.script.truncate(4);
    s.script.push(ScriptEntry {
        at: "2024-05-10T09:40:00Z".parse().unwrap(),
        action: "set-attribute".into(),
        args: json!({"subject": consumer.as_str(), "operand": "odrl:spatial", "value": "US"})
            .as_object()
            .unwrap()
            .clone(),
        repeat: None,
    });
    let report = run(&s).unwrap();
    assert_eq!(report.revocations.len(), 1);
    assert_eq!(report.revocations[0].at, "2024-05-10T09:40:00Z".parse::<DateTime<Utc>>().unwrap());
    let revoked: Vec<_> = report
        .log
        .records()
        .iter()
        .filter(|r| r.outcome == crate::enforcement::AuditOutcome::Revoked)
        .collect();
    assert_eq!(revoked.len(), 1);
}

#[test]
fn quality_check_records_conformance() {
    let mut s = demo_scenario();
    s.shapes = Some(include_str!("../../fixtures/vehicle-record-shape.ttl").into());
    s.offers[0].patterns.push(PatternUse {
        id: "data-quality".into(),
        params: json!({"shape": "http://example.com/shacl-shape"}).as_object().unwrap().clone(),
    });
    s.script.truncate(1);
    let first_request = "2024-05-10T09:01:00Z".parse::<DateTime<Utc>>().unwrap();
    s.script.push(ScriptEntry {
        at: first_request,
        action: "request".into(),
        args: json!({"negotiation": "vehicle-data"}).as_object().unwrap().clone(),
        repeat: None,
    });
    s.script.push(ScriptEntry {
        at: "2024-05-10T09:02:00Z".parse().unwrap(),
        action: "quality-check".into(),
        args: json!({"negotiation": "vehicle-data"}).as_object().unwrap().clone(),
        repeat: None,
    });
    s.script.push(ScriptEntry {
        at: "2024-05-10T09:03:00Z".parse().unwrap(),
        action: "request".into(),
        args: json!({"negotiation": "vehicle-data"}).as_object().unwrap().clone(),
        repeat: None,
    });
    let report = run(&s).unwrap();
    assert!(report.steps.iter().all(|st| st.error.is_none()), "{:?}", report.steps);
    assert_eq!(results(&report, "vehicle-data"), ["delay", "allow"]);
    assert!(report.replies().any(|r| matches!(r, Reply::Quality { conforms: true, .. })));
    let q = report.statuses().into_iter().find(|st| st.duty.action.action.is_dsp("qualityControl")).unwrap();
    assert_eq!(q.status, DutyStatus::Fulfilled);
}

#[test]
fn scenario_validation() {
    let mut s = demo_scenario();
    s.script.swap(0, 1);
    assert!(matches!(run(&s), Err(SimError::InvalidScenario(_))));

    let mut s = demo_scenario();
    s.offers[0].asset = Iri::new("https://nowhere.example/x").unwrap();
    assert!(matches!(run(&s), Err(SimError::UnknownAsset(_))));

    let mut s = demo_scenario();
    s.script[0].args.insert("offer".into(), json!("missing"));
    assert!(matches!(run(&s), Err(SimError::UnknownOffer(_))));

    let mut s = demo_scenario();
    s.script[1].args.insert("negotiation".into(), json!("ghost"));
    assert!(matches!(run(&s), Err(SimError::UnknownNegotiation(_))));

    let mut s = demo_scenario();
    s.script[0].action = "teleport".into();
    assert!(matches!(run(&s), Err(SimError::InvalidScenario(_))));

    let mut s = demo_scenario();
    s.script[1].args.insert("bogus".into(), json!(1));
    assert!(matches!(run(&s), Err(SimError::InvalidScenario(_))));

    let mut s = demo_scenario();
    s.clock_step = "PT0S".into();
    assert!(matches!(run(&s), Err(SimError::InvalidScenario(_))));
}

#[test]
fn service_message_json_round_trip() {
    let msgs = demo_scenario().messages().unwrap();
    for m in msgs {
        let text = serde_json::to_string(&m).unwrap();
        let back: Message = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}

#[test]
fn audit_log_is_monotone() {
    let report = run(&demo_scenario()).unwrap();
    let recs = report.log.records();
    assert!(recs.windows(2).all(|w| w[0].seq < w[1].seq && w[0].at <= w[1].at));
    assert_eq!(AuditLog::from_ndjson(&report.log.to_ndjson()).unwrap().records(), recs);
}
