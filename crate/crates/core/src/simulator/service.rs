use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::enforcement::{
    continuous_monitor_step, detective_check_with, pep_handle, AgreementStatus, AuditEntry, AuditLog,
    AuditOutcome, EnforcementAction, ObligationStatus, OngoingUsage, RevocationEvent,
};
use crate::model::{Iri, Policy, Term};
use crate::pdp::{check_conformance, AccessRequest, ConformanceRegistry, Credit, Outcome, UsageState};
use crate::pip::{AttestationProvider, AttributeProvider, ClockProvider, Pip, RegionHierarchy, StaticAttributes};

use super::negotiation::{NegotiationState, Phase};
use super::SimError;

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NegotiateMsg {
    pub offer: String,
    pub consumer: Iri,
    pub at: DateTime<Utc>,
    /// Name for the negotiation; defaults to the offer id.
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default = "yes")]
    pub accept: bool,
    /// Opening credit balance for billing patterns.
    #[serde(default)]
    pub credit: Option<Decimal>,
    #[serde(default)]
    pub currency: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransferMsg {
    pub negotiation: String,
    pub at: DateTime<Utc>,
    /// Defaults to the negotiating consumer.
    #[serde(default)]
    pub requester: Option<Iri>,
    /// Defaults to the offered asset.
    #[serde(default)]
    pub target: Option<Iri>,
    /// Defaults to odrl:read.
    #[serde(default)]
    pub action: Option<Iri>,
    #[serde(default)]
    pub units: Option<u64>,
    #[serde(default)]
    pub attributes: BTreeMap<Iri, Term>,
    /// Keeps the usage open until released, so monitoring applies to it.
    #[serde(default)]
    pub stream: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceMsg {
    pub negotiation: String,
    pub action: Iri,
    pub at: DateTime<Utc>,
    /// Defaults to the negotiating consumer.
    #[serde(default)]
    pub actor: Option<Iri>,
    #[serde(default)]
    pub target: Option<Iri>,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
    /// Reports that the duty was not performed.
    #[serde(default)]
    pub violated: bool,
    #[serde(default)]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReleaseMsg {
    pub negotiation: String,
    pub at: DateTime<Utc>,
    /// Defaults to the oldest open usage.
    #[serde(default)]
    pub usage: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RevokeMsg {
    pub negotiation: String,
    pub at: DateTime<Utc>,
    #[serde(default)]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeMsg {
    pub operand: Iri,
    pub at: DateTime<Utc>,
    #[serde(default)]
    pub subject: Option<Iri>,
    /// `None` removes the attribute.
    #[serde(default)]
    pub value: Option<Term>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityMsg {
    pub negotiation: String,
    pub at: DateTime<Utc>,
    #[serde(default)]
    pub asset: Option<Iri>,
    /// Defaults to the shape named by the agreement's quality-control duty.
    #[serde(default)]
    pub shape: Option<Iri>,
    /// Data to check instead of the asset's stored payload.
    #[serde(default)]
    pub payload: Option<Json>,
}

/// Connector protocol messages, handled one at a time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Message {
    Negotiate(NegotiateMsg),
    Request(TransferMsg),
    Evidence(EvidenceMsg),
    Release(ReleaseMsg),
    Revoke(RevokeMsg),
    SetAttribute(AttributeMsg),
    QualityCheck(QualityMsg),
}

impl Message {
    pub fn at(&self) -> DateTime<Utc> {
        match self {
            Message::Negotiate(m) => m.at,
            Message::Request(m) => m.at,
            Message::Evidence(m) => m.at,
            Message::Release(m) => m.at,
            Message::Revoke(m) => m.at,
            Message::SetAttribute(m) => m.at,
            Message::QualityCheck(m) => m.at,
        }
    }

    pub fn negotiation(&self) -> Option<&str> {
        match self {
            Message::Negotiate(m) => Some(m.id.as_deref().unwrap_or(&m.offer)),
            Message::Request(m) => Some(&m.negotiation),
            Message::Evidence(m) => Some(&m.negotiation),
            Message::Release(m) => Some(&m.negotiation),
            Message::Revoke(m) => Some(&m.negotiation),
            Message::QualityCheck(m) => Some(&m.negotiation),
            Message::SetAttribute(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationSummary {
    pub id: String,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Iri>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl From<&NegotiationState> for NegotiationSummary {
    fn from(n: &NegotiationState) -> Self {
        NegotiationSummary {
            id: n.id.clone(),
            phase: n.phase,
            agreement: n.agreement.as_ref().map(|a| a.uid.clone()),
            reason: n.reason.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReply {
    pub negotiation: String,
    /// allow, block, delay or revoked.
    pub result: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
    pub reason: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub waiting_for: Vec<Iri>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Json>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Reply {
    Negotiated(NegotiationSummary),
    Transfer(TransferReply),
    Recorded { seq: u64 },
    Released { usage: u64 },
    Revoked { negotiation: String, revocations: Vec<RevocationEvent> },
    AttributeSet,
    Quality { conforms: bool, seq: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSpec {
    pub uid: Iri,
    #[serde(default)]
    pub title: Option<String>,
    /// Synthetic content handed out on permitted transfers.
    #[serde(default)]
    pub payload: Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementObligations {
    pub negotiation: String,
    pub agreement: Iri,
    pub statuses: Vec<ObligationStatus>,
}

/// The provider connector: catalog, negotiations, PEP, audit trail and monitor.
#[derive(Debug, Clone)]
pub struct ConnectorService {
    pub provider: Iri,
    assets: BTreeMap<Iri, AssetSpec>,
    offers: BTreeMap<String, (Policy, Iri)>,
    negotiations: BTreeMap<String, NegotiationState>,
    state: UsageState,
    attributes: StaticAttributes,
    attestations: AttestationProvider,
    regions: RegionHierarchy,
    conformance: ConformanceRegistry,
    log: AuditLog,
    ongoing: BTreeMap<String, Vec<OngoingUsage>>,
    holding_connection: BTreeSet<u64>,
    next_usage: u64,
}

impl ConnectorService {
    pub fn new(provider: Iri) -> Self {
        ConnectorService {
            provider,
            assets: BTreeMap::new(),
            offers: BTreeMap::new(),
            negotiations: BTreeMap::new(),
            state: UsageState::new(),
            attributes: StaticAttributes::new(),
            attestations: AttestationProvider::default(),
            regions: RegionHierarchy::default(),
            conformance: ConformanceRegistry::new(),
            log: AuditLog::new(),
            ongoing: BTreeMap::new(),
            holding_connection: BTreeSet::new(),
            next_usage: 1,
        }
    }

    pub fn add_asset(&mut self, asset: AssetSpec) {
        self.assets.insert(asset.uid.clone(), asset);
    }

    pub fn add_offer(&mut self, id: impl Into<String>, offer: Policy, asset: Iri) -> Result<(), SimError> {
        if !self.assets.contains_key(&asset) {
            return Err(SimError::UnknownAsset(asset));
        }
        self.offers.insert(id.into(), (offer, asset));
        Ok(())
    }

    pub fn set_regions(&mut self, regions: RegionHierarchy) {
        self.regions = regions;
    }

    pub fn set_conformance(&mut self, registry: ConformanceRegistry) {
        self.conformance = registry;
    }

    pub fn attestations_mut(&mut self) -> &mut AttestationProvider {
        &mut self.attestations
    }

    pub fn attributes_mut(&mut self) -> &mut StaticAttributes {
        &mut self.attributes
    }

    pub fn offer(&self, id: &str) -> Option<&Policy> {
        self.offers.get(id).map(|(p, _)| p)
    }

    pub fn offers(&self) -> impl Iterator<Item = (&String, &Policy)> {
        self.offers.iter().map(|(k, (p, _))| (k, p))
    }

    pub fn negotiation(&self, id: &str) -> Option<&NegotiationState> {
        self.negotiations.get(id)
    }

    pub fn negotiations(&self) -> impl Iterator<Item = &NegotiationState> {
        self.negotiations.values()
    }

    pub fn audit(&self) -> &AuditLog {
        &self.log
    }

    pub fn usage_state(&self) -> &UsageState {
        &self.state
    }

    pub fn ongoing(&self, negotiation: &str) -> &[OngoingUsage] {
        self.ongoing.get(negotiation).map_or(&[], Vec::as_slice)
    }

    pub fn pip(&self) -> Pip {
        Pip::new(
            vec![
                Arc::new(ClockProvider) as Arc<dyn AttributeProvider>,
                Arc::new(self.attributes.clone()),
                Arc::new(self.attestations.clone()),
            ],
            self.regions.clone(),
        )
    }

    fn negotiation_ref(&self, id: &str) -> Result<&NegotiationState, SimError> {
        self.negotiations
            .get(id)
            .ok_or_else(|| SimError::UnknownNegotiation(id.to_string()))
    }

    fn agreement_of(&self, id: &str) -> Result<(&NegotiationState, &Policy), SimError> {
        let n = self.negotiation_ref(id)?;
        let a = n.agreement.as_ref().ok_or_else(|| SimError::NotAgreed(id.to_string()))?;
        Ok((n, a))
    }

    fn asset_of(&self, negotiation: &NegotiationState) -> Iri {
        self.offers
            .iter()
            .find(|(_, (p, _))| p.uid == negotiation.offer.uid)
            .map(|(_, (_, a))| a.clone())
            .expect("negotiations start from registered offers")
    }

    pub fn handle(&mut self, msg: Message) -> Result<Reply, SimError> {
        match msg {
            Message::Negotiate(m) => self.negotiate(m).map(Reply::Negotiated),
            Message::Request(m) => self.request(m).map(Reply::Transfer),
            Message::Evidence(m) => self.evidence(m).map(|seq| Reply::Recorded { seq }),
            Message::Release(m) => self.release(m).map(|usage| Reply::Released { usage }),
            Message::Revoke(m) => {
                let negotiation = m.negotiation.clone();
                self.revoke(m).map(|revocations| Reply::Revoked {
                    negotiation,
                    revocations,
                })
            }
            Message::SetAttribute(m) => {
                self.set_attribute(m);
                Ok(Reply::AttributeSet)
            }
            Message::QualityCheck(m) => self
                .quality_check(m)
                .map(|(conforms, seq)| Reply::Quality { conforms, seq }),
        }
    }

    pub fn negotiate(&mut self, m: NegotiateMsg) -> Result<NegotiationSummary, SimError> {
        let (offer, _) = self
            .offers
            .get(&m.offer)
            .ok_or_else(|| SimError::UnknownOffer(m.offer.clone()))?;
        let id = m.id.unwrap_or_else(|| m.offer.clone());
        let n = match self.negotiations.get_mut(&id) {
            Some(existing) => {
                existing.negotiate(&m.consumer, m.accept)?;
                existing
            }
            None => {
                let mut fresh = NegotiationState::offered(id.clone(), offer.clone());
                fresh.negotiate(&m.consumer, m.accept)?;
                self.negotiations.entry(id).or_insert(fresh)
            }
        };
        if let (Some(agreement), Some(balance)) = (&n.agreement, m.credit) {
            self.state = self.state.with_credit(
                agreement.uid.clone(),
                m.consumer.clone(),
                Credit {
                    balance,
                    currency: m.currency,
                },
            );
        }
        let summary = NegotiationSummary::from(&*n);
        log::info!("negotiation {} -> {}", summary.id, summary.phase);
        Ok(summary)
    }

    pub fn request(&mut self, m: TransferMsg) -> Result<TransferReply, SimError> {
        let n = self.negotiation_ref(&m.negotiation)?;
        if n.agreement.is_none() {
            return Err(SimError::NotAgreed(m.negotiation));
        }
        let asset = self.asset_of(n);
        let consumer = n.consumer.clone().expect("agreed negotiations have a consumer");
        let status = if n.phase == Phase::Revoked {
            AgreementStatus::Revoked
        } else {
            AgreementStatus::Active
        };
        let mut req = AccessRequest::new(
            m.requester.unwrap_or(consumer),
            m.target.unwrap_or(asset),
            m.action.unwrap_or_else(|| Iri::odrl("read")),
            m.at,
        )
        .with_units(m.units.unwrap_or(1));
        req.attributes = m.attributes.into_iter().map(|(k, v)| (k.canonical(), v)).collect();

        let pip = self.pip();
        let agreement = n.agreement.as_ref().expect("checked").clone();
        let (action, next) = pep_handle(&req, &agreement, status, &self.state, &pip, &mut self.log)?;
        self.state = next;

        let mut reply = TransferReply {
            negotiation: m.negotiation.clone(),
            result: action.label().to_string(),
            outcome: None,
            reason: String::new(),
            usage: None,
            waiting_for: Vec::new(),
            payload: None,
        };
        match action {
            EnforcementAction::Allow { decision, .. } => {
                reply.outcome = Some(decision.outcome);
                reply.reason = decision.reason.clone();
                reply.payload = self.assets.get(&req.target).map(|a| a.payload.clone());
                if m.stream || decision.opens_connection {
                    let id = self.next_usage;
                    self.next_usage += 1;
                    if decision.opens_connection {
                        self.holding_connection.insert(id);
                    }
                    self.ongoing.entry(m.negotiation).or_default().push(OngoingUsage {
                        id,
                        requester: req.requester.clone(),
                        target: req.target.clone(),
                        action: req.action.clone(),
                        started: req.timestamp,
                        key: decision.metered.clone().expect("permits are metered"),
                        notified: false,
                        attributes: req.attributes.clone(),
                    });
                    reply.usage = Some(id);
                }
            }
            EnforcementAction::Block { decision } => {
                reply.outcome = Some(decision.outcome);
                reply.reason = decision.reason;
            }
            EnforcementAction::Delay { decision, waiting_for } => {
                reply.outcome = Some(decision.outcome);
                reply.reason = "waiting for precondition duties".into();
                reply.waiting_for = waiting_for.into_iter().map(|d| d.action.action).collect();
            }
            EnforcementAction::Revoked => reply.reason = "agreement revoked".into(),
        }
        Ok(reply)
    }

    pub fn evidence(&mut self, m: EvidenceMsg) -> Result<u64, SimError> {
        let (n, agreement) = self.agreement_of(&m.negotiation)?;
        let actor = m
            .actor
            .unwrap_or_else(|| n.consumer.clone().expect("agreed negotiations have a consumer"));
        let target = m.target.unwrap_or_else(|| self.asset_of(n));
        let outcome = if m.violated {
            AuditOutcome::DutyViolated
        } else {
            AuditOutcome::Executed
        };
        let mut entry = AuditEntry::new(m.at, actor, m.action, target, outcome)
            .agreement(&agreement.uid.clone())
            .detail(m.detail);
        entry.attributes = m.attributes;
        Ok(self.log.append(entry).seq)
    }

    fn release_usage(&mut self, usage: &OngoingUsage) {
        if self.holding_connection.remove(&usage.id) {
            self.state = self.state.release_connection(&usage.key);
        }
    }

    pub fn release(&mut self, m: ReleaseMsg) -> Result<u64, SimError> {
        self.negotiation_ref(&m.negotiation)?;
        let usages = self.ongoing.entry(m.negotiation.clone()).or_default();
        let pos = match m.usage {
            Some(id) => usages.iter().position(|u| u.id == id),
            None => (!usages.is_empty()).then_some(0),
        }
        .ok_or_else(|| SimError::UnknownUsage(m.usage.unwrap_or(0)))?;
        let usage = usages.remove(pos);
        self.release_usage(&usage);
        Ok(usage.id)
    }

    pub fn revoke(&mut self, m: RevokeMsg) -> Result<Vec<RevocationEvent>, SimError> {
        let reason = m.reason.unwrap_or_else(|| "revoked by provider".into());
        let n = self
            .negotiations
            .get_mut(&m.negotiation)
            .ok_or_else(|| SimError::UnknownNegotiation(m.negotiation.clone()))?;
        n.revoke(reason.clone())?;
        let uid = n.agreement.as_ref().expect("agreed").uid.clone();
        let usages = self.ongoing.remove(&m.negotiation).unwrap_or_default();
        let mut events = Vec::new();
        for u in usages {
            self.log.append(
                AuditEntry::new(m.at, u.requester.clone(), u.action.clone(), u.target.clone(), AuditOutcome::Revoked)
                    .detail(format!("usage {}: {reason}", u.id))
                    .agreement(&uid),
            );
            self.release_usage(&u);
            events.push(RevocationEvent {
                usage_id: u.id,
                requester: u.requester,
                target: u.target,
                key: u.key,
                at: m.at,
                reason: reason.clone(),
            });
        }
        Ok(events)
    }

    pub fn set_attribute(&mut self, m: AttributeMsg) {
        let subject = m.subject.unwrap_or_else(|| {
            self.negotiations
                .values()
                .find_map(|n| n.consumer.clone())
                .unwrap_or_else(|| self.provider.clone())
        });
        match m.value {
            Some(v) => self.attributes.set(subject, m.operand, v),
            None => self.attributes.remove(&subject, &m.operand),
        }
    }

    pub fn quality_check(&mut self, m: QualityMsg) -> Result<(bool, u64), SimError> {
        let (n, agreement) = self.agreement_of(&m.negotiation)?;
        let duty = agreement
            .walk_rules()
            .into_iter()
            .find(|(r, _)| r.action.action.is_dsp("qualityControl"))
            .map(|(r, parent)| parent.map_or_else(|| r.clone(), |p| r.inherit_from(p)));
        let shape = m
            .shape
            .or_else(|| {
                duty.as_ref()?
                    .action
                    .refinements
                    .iter()
                    .find(|c| c.left_operand.is_dsp("conformsTo"))?
                    .right_operand
                    .as_iri()
                    .cloned()
            })
            .ok_or_else(|| SimError::InvalidScenario("no shape for quality check".into()))?;
        let asset = m.asset.unwrap_or_else(|| self.asset_of(n));
        let payload = match m.payload {
            Some(p) => p,
            None => self
                .assets
                .get(&asset)
                .ok_or_else(|| SimError::UnknownAsset(asset.clone()))?
                .payload
                .clone(),
        };
        let data = serde_json::to_vec(&payload).expect("JSON values serialize");
        let conforms = check_conformance(&data, &shape, &self.conformance)?;
        let actor = duty
            .and_then(|d| d.assignee)
            .unwrap_or_else(|| self.provider.clone());
        let uid = agreement.uid.clone();
        let seq = self
            .log
            .append(
                AuditEntry::new(m.at, actor, Iri::dsp("qualityControl"), asset, AuditOutcome::Executed)
                    .agreement(&uid)
                    .attribute("conformsTo", shape.as_str())
                    .attribute("conforms", conforms.to_string()),
            )
            .seq;
        Ok((conforms, seq))
    }

    /// One monitoring pass over every running usage.
    pub fn tick(&mut self, now: DateTime<Utc>) -> Vec<RevocationEvent> {
        let pip = self.pip();
        let mut all = Vec::new();
        let ids: Vec<String> = self.ongoing.keys().cloned().collect();
        for id in ids {
            let Some(n) = self.negotiations.get(&id).filter(|n| n.is_agreed()) else { continue };
            let agreement = n.agreement.clone().expect("agreed");
            let mut usages = self.ongoing.remove(&id).unwrap_or_default();
            let events = continuous_monitor_step(&mut usages, &agreement, &pip, now, &mut self.log);
            self.ongoing.insert(id, usages);
            for e in &events {
                if self.holding_connection.remove(&e.usage_id) {
                    self.state = self.state.release_connection(&e.key);
                }
            }
            all.extend(events);
        }
        all
    }

    /// Detective statuses for every agreement reached so far.
    pub fn obligations(&self, now: DateTime<Utc>) -> Vec<AgreementObligations> {
        self.negotiations
            .values()
            .filter_map(|n| {
                let a = n.agreement.as_ref()?;
                Some(AgreementObligations {
                    negotiation: n.id.clone(),
                    agreement: a.uid.clone(),
                    statuses: detective_check_with(a, &self.log, now, &self.regions),
                })
            })
            .collect()
    }
}
