//! Deterministic connector simulation driven by a logical clock.
//!
//! A [`Scenario`] describes the provider's catalog and a timed script of consumer and
//! provider actions. [`run`] replays the script through a [`ConnectorService`], monitors
//! ongoing usages on every clock tick and finishes with a detective check.

mod negotiation;
mod service;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::enforcement::{AuditLog, ObligationStatus, RevocationEvent};
use crate::model::{Iri, Policy, PolicyKind, Term, TypedLiteral, XsdDuration};
use crate::patterns::{descriptor, instantiate_all, Params, PatternError};
use crate::pdp::{ConformanceRegistry, PdpError};
use crate::pip::{Attestation, KeyRing, RegionHierarchy};

pub use negotiation::{bind, history_is_legal, legal_transition, negotiate, NegotiationState, Phase};
pub use service::{
    AgreementObligations, AssetSpec, AttributeMsg, ConnectorService, EvidenceMsg, Message, NegotiateMsg,
    NegotiationSummary, QualityMsg, ReleaseMsg, Reply, RevokeMsg, TransferMsg, TransferReply,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown asset <{0}>")]
    UnknownAsset(Iri),
    #[error("unknown offer `{0}`")]
    UnknownOffer(String),
    #[error("unknown negotiation `{0}`")]
    UnknownNegotiation(String),
    #[error("no open usage {0}")]
    UnknownUsage(u64),
    #[error("negotiation `{0}` has no agreement")]
    NotAgreed(String),
    #[error("illegal transition from {from} to {to}")]
    IllegalTransition { from: Phase, to: Phase },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Pdp(#[from] PdpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternUse {
    pub id: String,
    #[serde(default)]
    pub params: Params,
}

/// An offer assembled from catalog patterns over one asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfferSpec {
    pub id: String,
    pub asset: Iri,
    pub patterns: Vec<PatternUse>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeSpec {
    pub subject: Iri,
    pub operand: Iri,
    pub value: Term,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttestationSpec {
    pub subject: Iri,
    pub claim: Iri,
    /// Defaults to boolean `true`.
    #[serde(default)]
    pub value: Option<TypedLiteral>,
    pub expires: DateTime<Utc>,
}

/// A trusted issuer and the claims it certifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThirdParty {
    pub issuer: Iri,
    pub key: String,
    #[serde(default)]
    pub attestations: Vec<AttestationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Repeat {
    pub every: String,
    pub until: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    pub at: DateTime<Utc>,
    /// negotiate, request, report-evidence, skip-duty, release, revoke, set-attribute
    /// or quality-check.
    pub action: String,
    #[serde(default)]
    pub args: serde_json::Map<String, Json>,
    #[serde(default)]
    pub repeat: Option<Repeat>,
}

fn default_step() -> String {
    "PT1S".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    #[serde(default = "default_step")]
    pub clock_step: String,
    pub provider: Iri,
    pub consumer: Iri,
    pub assets: Vec<AssetSpec>,
    pub offers: Vec<OfferSpec>,
    #[serde(default)]
    pub attributes: Vec<AttributeSpec>,
    #[serde(default)]
    pub regions: Option<BTreeMap<String, Vec<String>>>,
    /// Shapes in Turtle, for conformance checks.
    #[serde(default)]
    pub shapes: Option<String>,
    #[serde(default)]
    pub third_party: Option<ThirdParty>,
    pub script: Vec<ScriptEntry>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::InvalidScenario(e.to_string()))
    }

    /// The provider's offer for `spec`, built from its patterns.
    pub fn build_offer(&self, spec: &OfferSpec) -> Result<Policy, SimError> {
        let mut entries = Vec::with_capacity(spec.patterns.len());
        for (i, u) in spec.patterns.iter().enumerate() {
            let d = descriptor(&u.id).ok_or_else(|| PatternError::UnknownPattern(u.id.clone()))?;
            let obligation = d.parameter("action").is_none();
            let mut params = u.params.clone();
            let mut default = |name: &str, value: Json| {
                if d.parameter(name).is_some() && !params.contains_key(name) {
                    params.insert(name.into(), value);
                }
            };
            default("target", json!(spec.asset.as_str()));
            if obligation {
                default("assigner", json!(self.consumer.as_str()));
                default("assignee", json!(self.provider.as_str()));
            } else {
                default("assigner", json!(self.provider.as_str()));
            }
            if i == 0 {
                default("uid", json!(format!("{}/offers/{}", self.provider.as_str().trim_end_matches('/'), spec.id)));
                default("kind", json!("Offer"));
            }
            entries.push((u.id.as_str(), params));
        }
        let offer = instantiate_all(&entries)?;
        if offer.kind != PolicyKind::Offer {
            return Err(SimError::InvalidScenario(format!("offer `{}` is not of kind Offer", spec.id)));
        }
        Ok(offer)
    }

    /// A service with the scenario's catalog, attributes, regions, shapes and attestations.
    pub fn service(&self) -> Result<ConnectorService, SimError> {
        let mut svc = ConnectorService::new(self.provider.clone());
        for a in &self.assets {
            svc.add_asset(a.clone());
        }
        for o in &self.offers {
            let offer = self.build_offer(o)?;
            svc.add_offer(o.id.clone(), offer, o.asset.clone())?;
        }
        for a in &self.attributes {
            svc.attributes_mut().set(a.subject.clone(), a.operand.clone(), a.value.clone());
        }
        if let Some(r) = &self.regions {
            svc.set_regions(RegionHierarchy::new(r).map_err(|e| SimError::InvalidScenario(e.to_string()))?);
        }
        if let Some(text) = &self.shapes {
            svc.set_conformance(
                ConformanceRegistry::from_shapes(text).map_err(|e| SimError::InvalidScenario(e.to_string()))?,
            );
        }
        if let Some(tp) = &self.third_party {
            let mut keys = KeyRing::new();
            keys.insert(tp.issuer.clone(), tp.key.as_bytes().to_vec());
            let provider = svc.attestations_mut();
            provider.keys = keys;
            for a in &tp.attestations {
                provider.attestations.push(Attestation::issue(
                    tp.issuer.clone(),
                    a.subject.clone(),
                    a.claim.clone(),
                    a.value.clone().unwrap_or_else(|| TypedLiteral::boolean(true)),
                    a.expires,
                    tp.key.as_bytes(),
                ));
            }
        }
        Ok(svc)
    }

    fn step(&self) -> Result<XsdDuration, SimError> {
        let step = XsdDuration::parse(&self.clock_step).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        if step.as_millis() <= 0 {
            return Err(SimError::InvalidScenario("clock_step must be positive".into()));
        }
        Ok(step)
    }

    fn message(&self, entry: &ScriptEntry, at: DateTime<Utc>) -> Result<Message, SimError> {
        let mut obj = entry.args.clone();
        obj.insert("at".into(), json!(at));
        let tag = match entry.action.as_str() {
            "negotiate" => {
                obj.entry("consumer").or_insert_with(|| json!(self.consumer.as_str()));
                "negotiate"
            }
            "request" => "request",
            "report-evidence" => "evidence",
            "skip-duty" => {
                obj.insert("violated".into(), json!(true));
                obj.entry("detail").or_insert_with(|| json!("duty skipped"));
                "evidence"
            }
            "release" => "release",
            "revoke" => "revoke",
            "set-attribute" => "set-attribute",
            "quality-check" => "quality-check",
            other => return Err(SimError::InvalidScenario(format!("unknown script action `{other}`"))),
        };
        obj.insert("type".into(), json!(tag));
        serde_json::from_value(Json::Object(obj))
            .map_err(|e| SimError::InvalidScenario(format!("{} at {at}: {e}", entry.action)))
    }

    /// Checks the script and expands repeats into a time-ordered message list.
    pub fn messages(&self) -> Result<Vec<Message>, SimError> {
        if self.end < self.start {
            return Err(SimError::InvalidScenario("end precedes start".into()));
        }
        self.step()?;
        if let Some(w) = self.script.windows(2).find(|w| w[1].at < w[0].at) {
            return Err(SimError::InvalidScenario(format!(
                "script timestamps go backwards at {}",
                w[1].at
            )));
        }
        let assets: BTreeSet<&Iri> = self.assets.iter().map(|a| &a.uid).collect();
        for o in &self.offers {
            if !assets.contains(&o.asset) {
                return Err(SimError::UnknownAsset(o.asset.clone()));
            }
        }
        let offers: BTreeSet<&str> = self.offers.iter().map(|o| o.id.as_str()).collect();
        let mut negotiations = BTreeSet::new();
        let mut out = Vec::new();
        for entry in &self.script {
            let first = self.message(entry, entry.at)?;
            match &first {
                Message::Negotiate(m) => {
                    if !offers.contains(m.offer.as_str()) {
                        return Err(SimError::UnknownOffer(m.offer.clone()));
                    }
                    negotiations.insert(m.id.clone().unwrap_or_else(|| m.offer.clone()));
                }
                Message::QualityCheck(QualityMsg { asset: Some(a), .. }) if !assets.contains(a) => {
                    return Err(SimError::UnknownAsset(a.clone()));
                }
                other => {
                    if let Some(n) = other.negotiation() {
                        if !negotiations.contains(n) {
                            return Err(SimError::UnknownNegotiation(n.to_string()));
                        }
                    }
                }
            }
            out.push(first);
            if let Some(r) = &entry.repeat {
                let every = XsdDuration::parse(&r.every).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
                if every.as_millis() <= 0 {
                    return Err(SimError::InvalidScenario("repeat interval must be positive".into()));
                }
                let mut at = entry.at + every.as_delta();
                while at <= r.until {
                    out.push(self.message(entry, at)?);
                    at += every.as_delta();
                }
            }
        }
        if let Some(m) = out.iter().find(|m| m.at() < self.start || m.at() > self.end) {
            return Err(SimError::InvalidScenario(format!(
                "script entry at {} lies outside the simulated period",
                m.at()
            )));
        }
        out.sort_by_key(Message::at);
        Ok(out)
    }
}

/// What happened to one script message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub at: DateTime<Utc>,
    pub message: Message,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply: Option<Reply>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub end: DateTime<Utc>,
    pub negotiations: Vec<NegotiationSummary>,
    pub steps: Vec<StepRecord>,
    pub revocations: Vec<RevocationEvent>,
    pub obligations: Vec<AgreementObligations>,
    #[serde(skip)]
    pub log: AuditLog,
    #[serde(skip)]
    pub agreements: Vec<Policy>,
}

impl RunReport {
    /// Obligation statuses across all agreements.
    pub fn statuses(&self) -> Vec<&ObligationStatus> {
        self.obligations.iter().flat_map(|o| &o.statuses).collect()
    }

    pub fn replies(&self) -> impl Iterator<Item = &Reply> {
        self.steps.iter().filter_map(|s| s.reply.as_ref())
    }
}

/// Replays the scenario. Equal scenarios give byte-identical audit logs.
pub fn run(scenario: &Scenario) -> Result<RunReport, SimError> {
    let messages = scenario.messages()?;
    let step = scenario.step()?.as_delta();
    let mut svc = scenario.service()?;
    let mut pending: VecDeque<Message> = messages.into();
    let mut steps = Vec::new();
    let mut revocations = Vec::new();
    let mut now = scenario.start;
    loop {
        while pending.front().is_some_and(|m| m.at() <= now) {
            let msg = pending.pop_front().expect("front exists");
            let at = msg.at();
            let (reply, error) = match svc.handle(msg.clone()) {
                Ok(r) => (Some(r), None),
                Err(e) => {
                    log::warn!("{}: {e}", scenario.name);
                    (None, Some(e.to_string()))
                }
            };
            if let Some(Reply::Revoked { revocations: r, .. }) = &reply {
                revocations.extend(r.iter().cloned());
            }
            steps.push(StepRecord { at, message: msg, reply, error });
        }
        revocations.extend(svc.tick(now));
        if now >= scenario.end {
            break;
        }
        now = (now + step).min(scenario.end);
    }
    Ok(RunReport {
        name: scenario.name.clone(),
        end: scenario.end,
        negotiations: svc.negotiations().map(NegotiationSummary::from).collect(),
        steps,
        revocations,
        obligations: svc.obligations(scenario.end),
        agreements: svc.negotiations().filter_map(|n| n.agreement.clone()).collect(),
        log: svc.audit().clone(),
    })
}

const DEMO: &str = include_str!("../../fixtures/scenarios/demo.json");

/// The bundled two-connector demonstration.
pub fn demo_scenario() -> Scenario {
    Scenario::from_json(DEMO).expect("bundled demo scenario is valid")
}

#[cfg(test)]
mod tests;
