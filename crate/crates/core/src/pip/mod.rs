//! Policy information point: contextual attributes for constraint evaluation.
//!
//! Providers are consulted in order and the first one that answers wins. Answers are
//! bags of terms, since a party may hold several values for one attribute (several
//! attested claims, for example).

mod attestation;
mod region;

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};

use crate::model::{Iri, Term, TypedLiteral};

pub use attestation::{verify_attestation, Attestation, AttestationCheck, KeyRing};
pub use region::{region_contains, RegionError, RegionHierarchy};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeQuery {
    pub operand: Iri,
    /// Party or asset the attribute is about.
    pub subject: Iri,
    pub at: DateTime<Utc>,
}

pub trait AttributeProvider: Send + Sync {
    /// `None` when this provider has nothing to say about the query.
    fn provide(&self, query: &AttributeQuery) -> Option<Vec<Term>>;
}

/// First non-`None` answer; `None` means the attribute is unavailable.
pub fn get_attribute(query: &AttributeQuery, providers: &[Arc<dyn AttributeProvider>]) -> Option<Vec<Term>> {
    providers.iter().find_map(|p| p.provide(query))
}

/// Answers `odrl:dateTime` with the query time, which callers set to the logical clock.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClockProvider;

impl AttributeProvider for ClockProvider {
    fn provide(&self, q: &AttributeQuery) -> Option<Vec<Term>> {
        q.operand
            .is_odrl("dateTime")
            .then(|| vec![Term::Literal(TypedLiteral::date_time(q.at))])
    }
}

/// Fixed attribute values per (subject, operand).
#[derive(Debug, Clone, Default)]
pub struct StaticAttributes {
    values: BTreeMap<(Iri, Iri), Vec<Term>>,
}

impl StaticAttributes {
    pub fn new() -> Self {
        StaticAttributes::default()
    }

    /// Replaces whatever was recorded for the pair.
    pub fn set(&mut self, subject: Iri, operand: Iri, value: impl Into<Term>) {
        self.values.insert((subject, operand.canonical()), vec![value.into()]);
    }

    pub fn remove(&mut self, subject: &Iri, operand: &Iri) {
        self.values.remove(&(subject.clone(), operand.canonical()));
    }

    pub fn get(&self, subject: &Iri, operand: &Iri) -> Option<&[Term]> {
        self.values
            .get(&(subject.clone(), operand.canonical()))
            .map(Vec::as_slice)
    }
}

impl AttributeProvider for StaticAttributes {
    fn provide(&self, q: &AttributeQuery) -> Option<Vec<Term>> {
        self.get(&q.subject, &q.operand).map(<[Term]>::to_vec)
    }
}

/// Third-party attestations held for parties, checked against a key ring at query time.
///
/// For `dsp:attestedClaim` the answer is the set of claim IRIs the subject holds valid
/// boolean `true` attestations for. For any other operand, attestations whose claim equals the operand
/// supply their values (a certified bandwidth, for example).
#[derive(Debug, Clone, Default)]
pub struct AttestationProvider {
    pub keys: KeyRing,
    pub attestations: Vec<Attestation>,
}

impl AttestationProvider {
    pub fn new(keys: KeyRing) -> Self {
        AttestationProvider {
            keys,
            attestations: Vec::new(),
        }
    }

    fn valid_for<'a>(&'a self, q: &'a AttributeQuery) -> impl Iterator<Item = &'a Attestation> + 'a {
        self.attestations.iter().filter(move |a| {
            a.subject == q.subject && self.keys.check(a, q.at) == AttestationCheck::Valid
        })
    }
}

impl AttributeProvider for AttestationProvider {
    fn provide(&self, q: &AttributeQuery) -> Option<Vec<Term>> {
        let bag: Vec<Term> = if q.operand.is_dsp("attestedClaim") {
            self.valid_for(q)
                .filter(|a| {
                    a.value.datatype == crate::model::Datatype::Boolean
                        && matches!(a.value.lexical.as_str(), "true" | "1")
                })
                .map(|a| Term::Iri(a.claim.clone()))
                .collect()
        } else {
            self.valid_for(q)
                .filter(|a| a.claim.same_term(&q.operand))
                .map(|a| Term::Literal(a.value.clone()))
                .collect()
        };
        (!bag.is_empty()).then_some(bag)
    }
}

/// Providers plus the region hierarchy used for containment checks.
#[derive(Clone, Default)]
pub struct Pip {
    pub providers: Vec<Arc<dyn AttributeProvider>>,
    pub regions: RegionHierarchy,
}

impl Pip {
    pub fn new(providers: Vec<Arc<dyn AttributeProvider>>, regions: RegionHierarchy) -> Self {
        Pip { providers, regions }
    }

    pub fn query(&self, q: &AttributeQuery) -> Option<Vec<Term>> {
        get_attribute(q, &self.providers)
    }
}

impl std::fmt::Debug for Pip {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pip")
            .field("providers", &self.providers.len())
            .field("regions", &self.regions)
            .finish()
    }
}
