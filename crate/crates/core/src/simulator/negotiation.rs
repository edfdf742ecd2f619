use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Iri, Policy, PolicyKind};
use crate::pdp::check_agreement;
use crate::profile::ProfileRegistry;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Offered,
    Requested,
    Agreed,
    Declined,
    Revoked,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Offered → Requested → (Agreed | Declined); Agreed → Revoked.
pub fn legal_transition(from: Phase, to: Phase) -> bool {
    matches!(
        (from, to),
        (Phase::Offered, Phase::Requested)
            | (Phase::Requested, Phase::Agreed)
            | (Phase::Requested, Phase::Declined)
            | (Phase::Agreed, Phase::Revoked)
    )
}

/// True iff the phase sequence starts at Offered and only takes legal steps.
pub fn history_is_legal(history: &[Phase]) -> bool {
    history.first() == Some(&Phase::Offered) && history.windows(2).all(|w| legal_transition(w[0], w[1]))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationState {
    pub id: String,
    pub phase: Phase,
    pub offer: Policy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Policy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consumer: Option<Iri>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Every phase entered, in order.
    pub history: Vec<Phase>,
}

impl NegotiationState {
    pub fn offered(id: impl Into<String>, offer: Policy) -> Self {
        NegotiationState {
            id: id.into(),
            phase: Phase::Offered,
            offer,
            agreement: None,
            consumer: None,
            reason: None,
            history: vec![Phase::Offered],
        }
    }

    fn step(&mut self, to: Phase) -> Result<(), SimError> {
        if !legal_transition(self.phase, to) {
            return Err(SimError::IllegalTransition { from: self.phase, to });
        }
        self.phase = to;
        self.history.push(to);
        debug_assert!(history_is_legal(&self.history));
        Ok(())
    }

    /// Runs the consumer's side: request the offer, then accept or decline it.
    pub fn negotiate(&mut self, consumer: &Iri, accept: bool) -> Result<(), SimError> {
        self.step(Phase::Requested)?;
        self.consumer = Some(consumer.clone());
        if let Err(reason) = offer_problems(&self.offer) {
            return self.decline(reason);
        }
        if !accept {
            return self.decline("declined by consumer".into());
        }
        let agreement = bind(&self.offer, consumer, &self.id);
        if let Err(e) = check_agreement(&agreement) {
            return self.decline(e.to_string());
        }
        self.step(Phase::Agreed)?;
        self.agreement = Some(agreement);
        Ok(())
    }

    fn decline(&mut self, reason: String) -> Result<(), SimError> {
        self.step(Phase::Declined)?;
        self.reason = Some(reason);
        Ok(())
    }

    pub fn revoke(&mut self, reason: impl Into<String>) -> Result<(), SimError> {
        self.step(Phase::Revoked)?;
        self.reason = Some(reason.into());
        Ok(())
    }

    pub fn is_agreed(&self) -> bool {
        self.phase == Phase::Agreed
    }
}

fn offer_problems(offer: &Policy) -> Result<(), String> {
    if offer.kind != PolicyKind::Offer {
        return Err(format!("expected an Offer, got {:?}", offer.kind));
    }
    let violations = crate::model::validate_policy(offer, ProfileRegistry::builtin());
    if violations.is_empty() {
        Ok(())
    } else {
        let v: Vec<String> = violations.iter().map(ToString::to_string).collect();
        Err(format!("invalid offer: {}", v.join("; ")))
    }
}

/// The offer as an Agreement: top-level rules without an assignee are bound to the
/// consumer, and the agreement gets its own uid.
pub fn bind(offer: &Policy, consumer: &Iri, negotiation: &str) -> Policy {
    let mut agreement = offer.clone();
    agreement.kind = PolicyKind::Agreement;
    agreement.uid = Iri::new(format!("{}/agreement/{negotiation}", offer.uid)).expect("extends a valid IRI");
    for rule in &mut agreement.rules {
        if rule.assignee.is_none() {
            rule.assignee = Some(consumer.clone());
        }
    }
    agreement
}

/// Fresh negotiation over `offer`, run to completion for `consumer`.
pub fn negotiate(id: &str, offer: &Policy, consumer: &Iri, accept: bool) -> NegotiationState {
    let mut state = NegotiationState::offered(id, offer.clone());
    state
        .negotiate(consumer, accept)
        .expect("a fresh negotiation starts in Offered");
    state
}
