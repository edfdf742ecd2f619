use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use chrono::{DateTime, Utc};
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use crate::model::{format_date_time, Iri, TypedLiteral};

type HmacSha256 = Hmac<Sha256>;

/// A claim about a party, vouched for by an issuer that shares a secret with the verifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attestation {
    pub issuer: Iri,
    pub subject: Iri,
    pub claim: Iri,
    pub value: TypedLiteral,
    pub expires: DateTime<Utc>,
    #[serde(with = "b64")]
    pub tag: Vec<u8>,
}

mod b64 {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bytes: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(bytes))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let text = String::deserialize(d)?;
        STANDARD.decode(text).map_err(serde::de::Error::custom)
    }
}

fn mac_input(issuer: &Iri, subject: &Iri, claim: &Iri, value: &TypedLiteral, expires: &DateTime<Utc>) -> Vec<u8> {
    let fields = [
        issuer.as_str().to_string(),
        subject.as_str().to_string(),
        claim.as_str().to_string(),
        value.lexical.clone(),
        value.datatype.iri().as_str().to_string(),
        format_date_time(expires),
    ];
    let mut out = Vec::new();
    for f in fields {
        out.extend_from_slice(&(f.len() as u64).to_be_bytes());
        out.extend_from_slice(f.as_bytes());
    }
    out
}

fn mac(key: &[u8]) -> HmacSha256 {
    HmacSha256::new_from_slice(key).expect("HMAC accepts keys of any length")
}

impl Attestation {
    pub fn issue(
        issuer: Iri,
        subject: Iri,
        claim: Iri,
        value: TypedLiteral,
        expires: DateTime<Utc>,
        key: &[u8],
    ) -> Attestation {
        let mut m = mac(key);
        m.update(&mac_input(&issuer, &subject, &claim, &value, &expires));
        Attestation {
            tag: m.finalize().into_bytes().to_vec(),
            issuer,
            subject,
            claim,
            value,
            expires,
        }
    }

    fn tag_matches(&self, key: &[u8]) -> bool {
        let mut m = mac(key);
        m.update(&mac_input(&self.issuer, &self.subject, &self.claim, &self.value, &self.expires));
        m.verify_slice(&self.tag).is_ok()
    }

    /// Single-line JSON interchange form.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("attestation serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Attestation, serde_json::Error> {
        serde_json::from_str(line)
    }
}

/// True iff the tag verifies under `issuer_key` and `now` is before expiry.
pub fn verify_attestation(a: &Attestation, issuer_key: &[u8], now: DateTime<Utc>) -> bool {
    now < a.expires && a.tag_matches(issuer_key)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AttestationCheck {
    Valid,
    UnknownIssuer,
    BadTag,
    Expired,
}

impl AttestationCheck {
    pub fn reason(&self) -> &'static str {
        match self {
            AttestationCheck::Valid => "valid",
            AttestationCheck::UnknownIssuer => "unknown issuer",
            AttestationCheck::BadTag => "tag does not verify",
            AttestationCheck::Expired => "expired",
        }
    }
}

/// Issuer secrets known to the verifier.
#[derive(Debug, Clone, Default)]
pub struct KeyRing {
    keys: BTreeMap<Iri, Vec<u8>>,
}

impl KeyRing {
    pub fn new() -> Self {
        KeyRing::default()
    }

    pub fn insert(&mut self, issuer: Iri, key: impl Into<Vec<u8>>) {
        self.keys.insert(issuer, key.into());
    }

    pub fn key(&self, issuer: &Iri) -> Option<&[u8]> {
        self.keys.get(issuer).map(Vec::as_slice)
    }

    pub fn check(&self, a: &Attestation, now: DateTime<Utc>) -> AttestationCheck {
        let Some(key) = self.key(&a.issuer) else {
            return AttestationCheck::UnknownIssuer;
        };
        if !a.tag_matches(key) {
            AttestationCheck::BadTag
        } else if now >= a.expires {
            AttestationCheck::Expired
        } else {
            AttestationCheck::Valid
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Datatype;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn iri(s: &str) -> Iri {
        Iri::new(s).unwrap()
    }

    fn t(secs: i64) -> DateTime<Utc> {
        Utc.timestamp_opt(1_688_000_000 + secs, 0).unwrap()
    }

    const KEY: &[u8] = b"storage-authority-secret";

    fn sample() -> Attestation {
        Attestation::issue(
            iri("https://storage.example/authority"),
            iri("https://trafficinsights.example/"),
            iri("https://storage.example/claims#member"),
            TypedLiteral::new("true", Datatype::Boolean).unwrap(),
            t(3600),
            KEY,
        )
    }

    #[test]
    fn issue_then_verify() {
        assert!(verify_attestation(&sample(), KEY, t(0)));
        assert!(!verify_attestation(&sample(), b"other", t(0)));
    }

    #[test]
    fn tamper_detected() {
        let mut a = sample();
        a.claim = iri("https://storage.example/claims#admin");
        assert!(!verify_attestation(&a, KEY, t(0)));
    }

    #[test]
    fn expiry() {
        assert!(!verify_attestation(&sample(), KEY, t(3600)));
        assert!(!verify_attestation(&sample(), KEY, t(4000)));
    }

    #[test]
    fn keyring_reasons() {
        let mut ring = KeyRing::new();
        assert_eq!(ring.check(&sample(), t(0)), AttestationCheck::UnknownIssuer);
        ring.insert(iri("https://storage.example/authority"), KEY);
        assert_eq!(ring.check(&sample(), t(0)), AttestationCheck::Valid);
        assert_eq!(ring.check(&sample(), t(7200)), AttestationCheck::Expired);
        assert_eq!(AttestationCheck::UnknownIssuer.reason(), "unknown issuer");
    }

    #[test]
    fn json_line_round_trip() {
        let line = sample().to_json_line();
        assert!(!line.contains('\n'));
        let back = Attestation::from_json_line(&line).unwrap();
        assert_eq!(back, sample());
        assert!(verify_attestation(&back, KEY, t(0)));
    }

    proptest! {
        #[test]
        fn any_single_field_mutation_breaks_verification(field in 0usize..7, salt in "[a-z]{1,8}", flip in 0usize..32) {
            let mut a = sample();
            match field {
                0 => a.issuer = iri(&format!("https://{salt}.example/")),
                1 => a.subject = iri(&format!("https://{salt}.example/s")),
                2 => a.claim = iri(&format!("https://{salt}.example/c")),
                3 => a.value = TypedLiteral::string(salt.clone()),
                4 => a.value = TypedLiteral { lexical: "true".into(), datatype: Datatype::String },
                5 => a.expires = a.expires + chrono::TimeDelta::seconds(1 + salt.len() as i64),
                _ => a.tag[flip] ^= 1,
            }
            prop_assert!(!verify_attestation(&a, KEY, t(0)));
        }
    }
}
