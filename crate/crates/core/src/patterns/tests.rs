use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use serde_json::json;

use super::*;
use crate::model::{semantic_equals, Iri, Policy, RuleKind, Term};
use crate::pdp::{evaluate_request, AccessRequest, Outcome, UsageState};
use crate::pip::Pip;
use crate::profile::ProfileRegistry;
use crate::textio;

const CATALOG_CSV: &str = include_str!("../../fixtures/pattern-catalog.csv");
const LISTING_ONE: &str = include_str!("../../fixtures/data-amount-deletion-anonymization.ttl");
const LISTING_TWO: &str = include_str!("../../fixtures/up-to-dateness-data-quality.ttl");

fn params(v: serde_json::Value) -> Params {
    v.as_object().unwrap().clone()
}

fn base() -> serde_json::Value {
    json!({
        "target": "http://example.com/files/file1",
        "assigner": "https://www.example.com/provider",
        "assignee": "https://www.example.com/consumer",
    })
}

fn with(extra: serde_json::Value) -> Params {
    let mut p = params(base());
    p.extend(params(extra));
    p
}

fn role(s: &str) -> PartyRole {
    match s {
        "Provider" => PartyRole::Provider,
        "Consumer" => PartyRole::Consumer,
        "ThirdParty" => PartyRole::ThirdParty,
        other => panic!("role {other}"),
    }
}

#[test]
fn catalog_matches_transcription() {
    let rows: Vec<Vec<&str>> = CATALOG_CSV
        .lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').collect())
        .collect();
    let catalog = list_patterns();
    assert_eq!(catalog.len(), 22);
    assert_eq!(rows.len(), 22);
    for (d, row) in catalog.iter().zip(&rows) {
        assert_eq!(d.id, row[0]);
        let pip: Vec<PartyRole> = row[1].split(';').map(role).collect();
        assert_eq!(d.pip_roles, pip, "{}", d.id);
        assert_eq!(d.pap_pdp_role, role(row[2]), "{}", d.id);
        assert_eq!(format!("{:?}", d.enforcement_class), row[3], "{}", d.id);
        assert_eq!(format!("{:?}", d.source), row[4], "{}", d.id);
    }
    let self_defined: Vec<&str> = catalog
        .iter()
        .filter(|d| d.source == Source::SelfDefined)
        .map(|d| d.id)
        .collect();
    assert_eq!(self_defined, ["data-quality", "encryption-by-provider", "up-to-dateness"]);
}

#[test]
fn descriptor_examples() {
    let t = descriptor("time-restriction").unwrap();
    assert_eq!((t.pip_roles.as_slice(), t.pap_pdp_role, t.enforcement_class), (&[PartyRole::Provider][..], PartyRole::Provider, EnforcementClass::Preventive));
    let d = descriptor("deletion").unwrap();
    assert_eq!(d.pip_roles, [PartyRole::Consumer, PartyRole::ThirdParty]);
    assert_eq!(d.enforcement_class, EnforcementClass::Detective);
    let e = descriptor("encryption-provider").unwrap();
    assert_eq!(e.id, "encryption-by-provider");
    assert_eq!((e.pap_pdp_role, e.source), (PartyRole::Consumer, Source::SelfDefined));
}

#[test]
fn reproduces_first_reference_policy() {
    let mut amount = with(json!({"unit": "MiB", "max": 1024}));
    amount.insert("uid".into(), json!("http://example.com/policies#consumer-administered"));
    let p = instantiate_all(&[
        ("data-amount", amount),
        ("deletion", with(json!({"deadline": "2023-07-10T00:00:00Z"}))),
        ("anonymization", with(json!({}))),
    ])
    .unwrap();
    let reference = textio::parse(LISTING_ONE).unwrap().remove(0);
    assert!(semantic_equals(&p, &reference), "{}", textio::serialize(&p));
}

#[test]
fn reproduces_second_reference_policy() {
    let uid = "http://example.com/policies#consumer-administered";
    let update = params(json!({
        "uid": uid,
        "target": "http://example.com/files/file1",
        "assigner": "https://www.example.com/consumer",
        "assignee": "https://www.example.com/provider",
        "interval": "P30S",
    }));
    let reference = textio::parse(LISTING_TWO).unwrap().remove(0);

    let first_block = instantiate("up-to-dateness", &update).unwrap();
    let mut expected = reference.clone();
    expected.rules.retain(|r| r.action.action.is_dsp("update"));
    assert!(semantic_equals(&first_block, &expected));

    let both = instantiate_all(&[
        ("up-to-dateness", update),
        ("data-quality", params(json!({"shape": "http://example.com/shacl-shape"}))),
    ])
    .unwrap();
    assert!(semantic_equals(&both, &reference), "{}", textio::serialize(&both));
}

#[test]
fn zero_count_denies_everything() {
    let mut p = instantiate("access-count", &with(json!({"max": 0}))).unwrap();
    p.kind = crate::model::PolicyKind::Agreement;
    let req = AccessRequest::new(
        Iri::new("https://www.example.com/consumer").unwrap(),
        Iri::new("http://example.com/files/file1").unwrap(),
        Iri::odrl("read"),
        Utc.with_ymd_and_hms(2023, 7, 9, 0, 0, 0).unwrap(),
    );
    let d = evaluate_request(&p, &req, &UsageState::new(), &Pip::default()).unwrap();
    assert_eq!(d.outcome, Outcome::Deny);
}

#[test]
fn classify_examples() {
    let one = textio::parse(LISTING_ONE).unwrap().remove(0);
    let ids = classify(&one);
    for id in ["data-amount", "deletion", "anonymization"] {
        assert!(ids.iter().any(|i| i == id), "{ids:?}");
    }
    let two = textio::parse(LISTING_TWO).unwrap().remove(0);
    assert_eq!(classify(&two), ["data-quality", "up-to-dateness"]);
    let bare = instantiate("allow-access", &with(json!({}))).unwrap();
    assert_eq!(classify(&bare), ["allow-access"]);
}

#[test]
fn parameter_errors_name_the_parameter() {
    assert_eq!(
        instantiate("no-such-pattern", &Params::new()).unwrap_err(),
        PatternError::UnknownPattern("no-such-pattern".into())
    );
    let e = instantiate("access-count", &params(base())).unwrap_err();
    assert!(e.to_string().contains("`max`"), "{e}");
    let e = instantiate("access-count", &with(json!({"max": -3}))).unwrap_err();
    assert!(matches!(e, PatternError::InvalidParameter { ref name, .. } if name == "max"), "{e}");
    let e = instantiate("deletion", &with(json!({"deadline": "tomorrow"}))).unwrap_err();
    assert!(e.to_string().contains("`deadline`"), "{e}");
    let e = instantiate("allow-access", &with(json!({"colour": "red"}))).unwrap_err();
    assert!(e.to_string().contains("`colour`"), "{e}");
}

#[test]
fn conflicting_actions_rejected() {
    let e = instantiate_all(&[
        ("data-amount", with(json!({"unit": "MiB", "max": 3}))),
        ("delegation", with(json!({"next_policy": "http://example.com/policies#next"}))),
    ])
    .unwrap_err();
    assert_eq!(e, PatternError::Conflict("action"));
}

#[test]
fn templates_use_registered_vocabulary() {
    let reg = ProfileRegistry::builtin();
    for d in list_patterns() {
        let p = instantiate(d.id, &sample_params(d, 0)).unwrap();
        for (rule, _) in p.walk_rules() {
            assert!(reg.resolve(&rule.action.action).is_some(), "{}", rule.action.action);
            for c in rule.all_constraints() {
                assert!(reg.resolve(&c.left_operand).is_some(), "{}", c.left_operand);
                if let Term::Iri(i) = &c.right_operand {
                    if i.is_odrl("policyUsage") {
                        assert!(reg.resolve(i).is_some());
                    }
                }
            }
        }
    }
}

#[test]
fn markdown_has_a_row_per_pattern() {
    let md = catalog_markdown();
    assert_eq!(md.lines().count(), 24);
    assert!(md.contains("| Up-to-dateness | `up-to-dateness` | Consumer | Provider | Detective | self-defined |"));
}

/// Valid parameters for a descriptor, varied by `seed`.
pub(crate) fn sample_params(d: &PatternDescriptor, seed: u64) -> Params {
    let mut p = Params::new();
    for spec in &d.parameter_schema {
        let v = match spec.name {
            "target" => json!(format!("http://example.com/assets/a{}", seed % 7)),
            "assigner" => json!("https://www.example.com/provider"),
            "assignee" => json!("https://www.example.com/consumer"),
            "uid" | "kind" | "action" => continue,
            _ => match spec.kind {
                ParamKind::Iri => json!(format!("http://example.com/{}/{}", spec.name, seed)),
                ParamKind::Text => json!(["EU", "AT", "MiB", "DE"][(seed % 4) as usize]),
                ParamKind::Integer => json!(seed % 2000),
                ParamKind::Decimal => json!(format!("{}.{}", seed % 100, seed % 10)),
                ParamKind::DateTime => {
                    let t = Utc.timestamp_opt(1_600_000_000 + (seed as i64 % 100_000_000), 0).unwrap();
                    json!(crate::model::format_date_time(&t))
                }
                ParamKind::Duration => json!(format!("PT{}S", 1 + seed % 3600)),
                ParamKind::PolicyKind => continue,
            },
        };
        p.insert(spec.name.to_string(), v);
    }
    p
}

proptest! {
    #[test]
    fn instantiate_validates_round_trips_and_classifies(idx in 0usize..22, seed in any::<u64>()) {
        let d = &list_patterns()[idx];
        let p = instantiate(d.id, &sample_params(d, seed)).unwrap();
        let text = textio::serialize(&p);
        let back: Vec<Policy> = textio::parse(&text).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert!(semantic_equals(&back[0], &p), "{}", text);
        prop_assert!(classify(&p).iter().any(|i| i == d.id), "{:?}", classify(&p));
        prop_assert!(p.rules.iter().all(|r| r.kind != RuleKind::Prohibition));
    }
}
