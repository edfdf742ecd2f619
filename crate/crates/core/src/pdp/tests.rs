use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{TimeDelta, TimeZone};
use proptest::prelude::*;
use rust_decimal::Decimal;

use super::*;
use crate::model::{Datatype, Operator, TypedLiteral, XsdDuration};
use crate::pip::{AttributeProvider, RegionHierarchy, StaticAttributes};
use crate::textio;

const LISTING: &str = include_str!("../../fixtures/data-amount-deletion-anonymization.ttl");
const SHAPE: &str = include_str!("../../fixtures/vehicle-record-shape.ttl");

fn iri(s: &str) -> Iri {
    Iri::new(s).unwrap()
}

fn consumer() -> Iri {
    iri("https://www.example.com/consumer")
}

fn provider() -> Iri {
    iri("https://www.example.com/provider")
}

fn file1() -> Iri {
    iri("http://example.com/files/file1")
}

fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 7, 9, 12, 0, 0).unwrap()
}

fn listing() -> Policy {
    textio::parse(LISTING).unwrap().remove(0)
}

fn read_at(at: DateTime<Utc>) -> AccessRequest {
    AccessRequest::new(consumer(), file1(), Iri::odrl("read"), at)
}

fn agreement(rules: Vec<Rule>) -> Policy {
    let mut p = Policy::new(iri("http://example.com/agreements#a"), PolicyKind::Agreement);
    p.rules = rules
        .into_iter()
        .map(|r| r.with_target(file1()).with_parties(Some(provider()), Some(consumer())))
        .collect();
    p
}

fn count_bound(n: i64) -> Constraint {
    Constraint::odrl("count", Operator::Lteq, TypedLiteral::integer(n))
}

fn window(secs: i64) -> Constraint {
    Constraint::odrl(
        "timeInterval",
        Operator::Eq,
        TypedLiteral::duration(XsdDuration::from_secs(secs)),
    )
}

#[test]
fn listing_permits_with_both_duties() {
    let d = evaluate_request(&listing(), &read_at(t0()), &UsageState::new(), &Pip::default()).unwrap();
    assert_eq!(d.outcome, Outcome::Permit);
    let mut actions: Vec<&str> = d
        .activated_duties
        .iter()
        .map(|r| r.action.action.local_name())
        .collect();
    actions.sort();
    assert_eq!(actions, ["anonymize", "delete"]);
    assert!(d.activated_duties.iter().all(|r| r.assignee == Some(consumer())));
    // count and unitOfCount, each exactly once
    assert_eq!(d.trace.len(), 2);
}

#[test]
fn listing_exhausts_after_1024() {
    let p = listing();
    let pip = Pip::default();
    let mut state = UsageState::new();
    for i in 0..1024 {
        let req = read_at(t0() + TimeDelta::seconds(i));
        let d = evaluate_request(&p, &req, &state, &pip).unwrap();
        assert_eq!(d.outcome, Outcome::Permit, "execution {}", i + 1);
        state = commit_usage(&d, &req, &state).unwrap();
    }
    let d = evaluate_request(&p, &read_at(t0() + TimeDelta::hours(1)), &state, &pip).unwrap();
    assert_eq!(d.outcome, Outcome::Deny);
}

#[test]
fn count_boundary() {
    let p = agreement(vec![Rule::permission(Iri::odrl("read")).with_constraint(count_bound(1024))]);
    let key = usage_key(&p, &consumer(), &p.rules[0]);
    let mut state = UsageState::new();
    let req = read_at(t0());
    for _ in 0..1023 {
        let d = Decision {
            metered: Some(key.clone()),
            ..Decision::new(Outcome::Permit, "", vec![])
        };
        state = commit_usage(&d, &req, &state).unwrap();
    }
    assert_eq!(state.executed_count(&key), 1023);
    let d = evaluate_request(&p, &req, &state, &Pip::default()).unwrap();
    assert!(d.is_permit());
    let state = commit_usage(&d, &req, &state).unwrap();
    let d = evaluate_request(&p, &req, &state, &Pip::default()).unwrap();
    assert_eq!(d.outcome, Outcome::Deny);
}

#[test]
fn other_party_not_applicable() {
    let mut req = read_at(t0());
    req.requester = iri("https://www.example.com/someone-else");
    let d = evaluate_request(&listing(), &req, &UsageState::new(), &Pip::default()).unwrap();
    assert_eq!(d.outcome, Outcome::NotApplicable);
    assert!(d.activated_duties.is_empty());
}

#[test]
fn use_subsumes_read_but_not_reverse() {
    let p = agreement(vec![Rule::permission(Iri::odrl("use"))]);
    let d = evaluate_request(&p, &read_at(t0()), &UsageState::new(), &Pip::default()).unwrap();
    assert!(d.is_permit());
    let p = agreement(vec![Rule::permission(Iri::odrl("read"))]);
    let mut req = read_at(t0());
    req.action = Iri::odrl("use");
    let d = evaluate_request(&p, &req, &UsageState::new(), &Pip::default()).unwrap();
    assert_eq!(d.outcome, Outcome::NotApplicable);
}

#[test]
fn unit_mismatch_denies() {
    let req = read_at(t0()).with_attribute(Iri::odrl("unitOfCount"), TypedLiteral::string("GiB"));
    let d = evaluate_request(&listing(), &req, &UsageState::new(), &Pip::default()).unwrap();
    assert_eq!(d.outcome, Outcome::Deny);
    let req = read_at(t0()).with_attribute(Iri::odrl("unitOfCount"), TypedLiteral::string("MiB"));
    let d = evaluate_request(&listing(), &req, &UsageState::new(), &Pip::default()).unwrap();
    assert!(d.is_permit());
}

fn ctx_eval(c: &Constraint, req: &AccessRequest, pip: &Pip) -> ConstraintVerdict {
    let state = UsageState::new();
    let key = UsageKey {
        agreement: iri("http://example.com/a"),
        assignee: consumer(),
        action: Iri::odrl("read"),
    };
    let siblings = [c.clone()];
    evaluate_constraint(
        c,
        &EvaluationContext {
            request: req,
            state: &state,
            pip,
            key: &key,
            siblings: &siblings,
        },
    )
}

#[test]
fn date_time_before_deadline() {
    let deadline = TypedLiteral::new("2023-07-10T00:00:00Z", Datatype::DateTime).unwrap();
    let c = Constraint::odrl("dateTime", Operator::Lt, deadline);
    let v = ctx_eval(&c, &read_at(t0()), &Pip::default());
    assert_eq!(v.status, VerdictStatus::Satisfied);
    let late = Utc.with_ymd_and_hms(2023, 7, 10, 0, 0, 0).unwrap();
    let v = ctx_eval(&c, &read_at(late), &Pip::default());
    assert_eq!(v.status, VerdictStatus::Unsatisfied);
}

fn regions() -> RegionHierarchy {
    RegionHierarchy::from_json(include_str!("../../fixtures/regions.json")).unwrap()
}

#[test]
fn spatial_without_location_is_undetermined() {
    let c = Constraint::odrl("spatial", Operator::IsPartOf, TypedLiteral::string("EU"));
    let pip = Pip::new(vec![], regions());
    let v = ctx_eval(&c, &read_at(t0()), &pip);
    assert_eq!(v.status, VerdictStatus::Undetermined);

    let mut attrs = StaticAttributes::new();
    attrs.set(consumer(), Iri::odrl("spatial"), TypedLiteral::string("AT-9"));
    let pip = Pip::new(vec![Arc::new(attrs) as Arc<dyn AttributeProvider>], regions());
    assert!(ctx_eval(&c, &read_at(t0()), &pip).is_satisfied());
}

#[test]
fn undetermined_denies_request() {
    let c = Constraint::odrl("spatial", Operator::IsPartOf, TypedLiteral::string("EU"));
    let p = agreement(vec![Rule::permission(Iri::odrl("read")).with_constraint(c)]);
    let d = evaluate_request(&p, &read_at(t0()), &UsageState::new(), &Pip::new(vec![], regions())).unwrap();
    assert_eq!(d.outcome, Outcome::Deny);
    assert_eq!(d.reason, "undetermined");
}

#[test]
fn attested_claim_ignores_requester_claims() {
    let claim = iri("https://certs.example/member");
    let c = Constraint::dsp("attestedClaim", Operator::Eq, claim.clone());
    let req = read_at(t0()).with_attribute(Iri::dsp("attestedClaim"), claim);
    assert_eq!(ctx_eval(&c, &req, &Pip::default()).status, VerdictStatus::Undetermined);
}

#[test]
fn type_mismatch() {
    let c = Constraint::odrl("purpose", Operator::Lt, TypedLiteral::integer(3));
    let req = read_at(t0()).with_attribute(Iri::odrl("purpose"), iri("http://example.com/purpose/research"));
    let v = ctx_eval(&c, &req, &Pip::default());
    assert_eq!(v, ConstraintVerdict::unsatisfied("type mismatch"));
}

#[test]
fn is_any_of_list() {
    let c = Constraint::odrl(
        "purpose",
        Operator::IsAnyOf,
        TypedLiteral::string("http://example.com/p/a, http://example.com/p/b"),
    );
    let req = read_at(t0()).with_attribute(Iri::odrl("purpose"), iri("http://example.com/p/b"));
    assert!(ctx_eval(&c, &req, &Pip::default()).is_satisfied());
    let req = read_at(t0()).with_attribute(Iri::odrl("purpose"), iri("http://example.com/p/c"));
    assert!(!ctx_eval(&c, &req, &Pip::default()).is_satisfied());
}

#[test]
fn duration_ordering() {
    let r = RegionHierarchy::default();
    let a = Term::Literal(TypedLiteral::new("PT1M", Datatype::Duration).unwrap());
    let b = Term::Literal(TypedLiteral::new("P60S", Datatype::Duration).unwrap());
    assert_eq!(constraint::compare_terms(&a, &Operator::Eq, &b, &r), Ok(true));
    let c = Term::Literal(TypedLiteral::new("PT30S", Datatype::Duration).unwrap());
    assert_eq!(constraint::compare_terms(&c, &Operator::Lt, &a, &r), Ok(true));
}

fn rate_key() -> UsageKey {
    UsageKey {
        agreement: iri("http://example.com/a"),
        assignee: consumer(),
        action: Iri::odrl("read"),
    }
}

fn state_with(times: &[i64]) -> UsageState {
    let mut state = UsageState::new();
    let d = Decision {
        metered: Some(rate_key()),
        ..Decision::new(Outcome::Permit, "", vec![])
    };
    for t in times {
        state = commit_usage(&d, &read_at(t0() + TimeDelta::seconds(*t)), &state).unwrap();
    }
    state
}

#[test]
fn rate_limit_examples() {
    let (n, w) = (count_bound(2), window(60));
    let state = state_with(&[0, 10]);
    let at = |s| t0() + TimeDelta::seconds(s);
    assert!(!check_rate_limit((&n, &w), &state, &rate_key(), at(30), 1).is_satisfied());
    assert!(check_rate_limit((&n, &w), &state, &rate_key(), at(75), 1).is_satisfied());
    let one = count_bound(1);
    assert!(check_rate_limit((&one, &w), &UsageState::new(), &rate_key(), at(0), 1).is_satisfied());
}

proptest! {
    #[test]
    fn rate_limit_matches_brute_force(
        n in 1i64..=10,
        w in 10i64..=120,
        mut times in prop::collection::vec(0i64..600, 0..30),
        now_off in 0i64..120,
        units in 1u64..3,
    ) {
        times.sort();
        let state = state_with(&times);
        let now = times.last().copied().unwrap_or(0) + now_off;
        let v = check_rate_limit(
            (&count_bound(n), &window(w)),
            &state,
            &rate_key(),
            t0() + TimeDelta::seconds(now),
            units,
        );
        let mut in_window = 0u64;
        for t in &times {
            if *t > now - w {
                in_window += 1;
            }
        }
        prop_assert_eq!(v.is_satisfied(), in_window + units <= n as u64);
    }
}

#[test]
fn deny_overrides() {
    let p = agreement(vec![
        Rule::permission(Iri::odrl("read")),
        Rule::prohibition(Iri::odrl("read")),
    ]);
    let d = evaluate_request(&p, &read_at(t0()), &UsageState::new(), &Pip::default()).unwrap();
    assert_eq!(d.outcome, Outcome::Deny);
    // prohibition whose constraint does not hold leaves the permission in force
    let p = agreement(vec![
        Rule::permission(Iri::odrl("read")),
        Rule::prohibition(Iri::odrl("read")).with_constraint(count_bound(0)),
    ]);
    let d = evaluate_request(&p, &read_at(t0()), &UsageState::new(), &Pip::default()).unwrap();
    assert!(d.is_permit());
}

#[test]
fn commit_requires_permit() {
    let d = Decision::new(Outcome::Deny, "x", vec![]);
    assert!(matches!(
        commit_usage(&d, &read_at(t0()), &UsageState::new()),
        Err(PdpError::NotPermitted(Outcome::Deny))
    ));
}

#[test]
fn invalid_agreement_is_an_error() {
    let mut p = listing();
    p.rules[0].assignee = None;
    let err = evaluate_request(&p, &read_at(t0()), &UsageState::new(), &Pip::default()).unwrap_err();
    assert!(err.to_string().starts_with("invalid agreement"));
}

#[test]
fn billing_charges_credit() {
    let pay = Rule::duty(Iri::odrl("compensate")).with_constraint(Constraint::odrl(
        "payAmount",
        Operator::Eq,
        TypedLiteral::decimal(Decimal::new(250, 2)),
    ));
    let p = agreement(vec![Rule::permission(Iri::odrl("read")).with_duty(pay)]);
    let state = UsageState::new();
    let d = evaluate_request(&p, &read_at(t0()), &state, &Pip::default()).unwrap();
    assert_eq!(d.outcome, Outcome::Deny);
    let state = state.with_credit(
        p.uid.clone(),
        consumer(),
        Credit {
            balance: Decimal::new(500, 2),
            currency: Some("EUR".into()),
        },
    );
    let mut s = state;
    for _ in 0..2 {
        let d = evaluate_request(&p, &read_at(t0()), &s, &Pip::default()).unwrap();
        assert!(d.is_permit());
        s = commit_usage(&d, &read_at(t0()), &s).unwrap();
    }
    assert_eq!(s.credit(&p.uid, &consumer()).unwrap().balance, Decimal::ZERO);
    let d = evaluate_request(&p, &read_at(t0()), &s, &Pip::default()).unwrap();
    assert_eq!(d.outcome, Outcome::Deny);
}

#[test]
fn concurrent_connections() {
    let c = Constraint::dsp("concurrentConnections", Operator::Lteq, TypedLiteral::integer(2));
    let p = agreement(vec![Rule::permission(Iri::odrl("read")).with_constraint(c)]);
    let mut s = UsageState::new();
    for _ in 0..2 {
        let d = evaluate_request(&p, &read_at(t0()), &s, &Pip::default()).unwrap();
        assert!(d.is_permit() && d.opens_connection);
        s = commit_usage(&d, &read_at(t0()), &s).unwrap();
    }
    let d = evaluate_request(&p, &read_at(t0()), &s, &Pip::default()).unwrap();
    assert_eq!(d.outcome, Outcome::Deny);
    let key = usage_key(&p, &consumer(), &p.rules[0]);
    let s = s.release_connection(&key);
    assert!(evaluate_request(&p, &read_at(t0()), &s, &Pip::default()).unwrap().is_permit());
}

#[test]
fn state_json_round_trip() {
    let s = state_with(&[0, 5]).with_credit(
        iri("http://example.com/a"),
        consumer(),
        Credit {
            balance: Decimal::new(10, 0),
            currency: None,
        },
    );
    let json = serde_json::to_string(&s).unwrap();
    let back: UsageState = serde_json::from_str(&json).unwrap();
    assert_eq!(back, s);
    let bad = json.replace("\"executed_count\":2", "\"executed_count\":3");
    assert!(serde_json::from_str::<UsageState>(&bad).is_err());
}

#[test]
fn request_json_defaults_units() {
    let r: AccessRequest = serde_json::from_str(
        r#"{"requester":"https://www.example.com/consumer","target":"http://example.com/files/file1",
            "action":"odrl:read","timestamp":"2023-07-09T12:00:00Z",
            "attributes":{"odrl:purpose":{"iri":"http://example.com/p/a"}}}"#,
    )
    .unwrap();
    assert_eq!(r.units_requested, 1);
    assert!(r.attribute(&Iri::odrl("purpose")).is_some());
}

fn shapes() -> ConformanceRegistry {
    ConformanceRegistry::from_shapes(SHAPE).unwrap()
}

#[test]
fn conformance_examples() {
    let shape = iri("http://example.com/shacl-shape");
    let ok = br#"{"vehicleId":"v1","speed":42.5,"timestamp":"2023-07-09T12:00:00Z"}"#;
    assert!(check_conformance(ok, &shape, &shapes()).unwrap());
    let missing = br#"{"vehicleId":"v1","timestamp":"2023-07-09T12:00:00Z"}"#;
    assert!(!check_conformance(missing, &shape, &shapes()).unwrap());
    let err = check_conformance(ok, &iri("http://example.com/other"), &shapes()).unwrap_err();
    assert!(err.to_string().starts_with("no checker for shape"));
}

fn naive_conforms(record: &BTreeMap<String, serde_json::Value>) -> bool {
    let id = matches!(record.get("vehicleId"), Some(serde_json::Value::String(_)));
    let speed = matches!(record.get("speed"), Some(serde_json::Value::Number(_)));
    let ts = match record.get("timestamp") {
        Some(serde_json::Value::String(s)) => chrono::DateTime::parse_from_rfc3339(s).is_ok(),
        _ => false,
    };
    id && speed && ts
}

fn arb_field() -> impl Strategy<Value = Option<serde_json::Value>> {
    prop_oneof![
        Just(None),
        Just(Some(serde_json::json!("v7"))),
        Just(Some(serde_json::json!(12.5))),
        Just(Some(serde_json::json!(3))),
        Just(Some(serde_json::json!("2023-07-09T12:00:00Z"))),
        Just(Some(serde_json::json!(true))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn conformance_matches_naive(id in arb_field(), speed in arb_field(), ts in arb_field()) {
        let mut record = BTreeMap::new();
        for (k, v) in [("vehicleId", id), ("speed", speed), ("timestamp", ts)] {
            if let Some(v) = v {
                record.insert(k.to_string(), v);
            }
        }
        let data = serde_json::to_vec(&record).unwrap();
        let got = check_conformance(&data, &iri("http://example.com/shacl-shape"), &shapes()).unwrap();
        prop_assert_eq!(got, naive_conforms(&record));
    }
}
