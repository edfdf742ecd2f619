//! Catalog of the 22 usage-control patterns, as parameterized policy templates.
//!
//! Each descriptor records who supplies context (PIP), who administers and decides
//! (PAP/PDP) and whether enforcement is preventive or detective.

mod classify;
mod template;

use std::fmt;
use std::sync::OnceLock;

use serde::Serialize;

use crate::model::PartyRole;

pub use classify::classify;
pub use template::{instantiate, instantiate_all, PatternError, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum EnforcementClass {
    Preventive,
    Detective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Source {
    Literature,
    SelfDefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Iri,
    Text,
    Integer,
    Decimal,
    DateTime,
    Duration,
    PolicyKind,
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParamKind::Iri => "IRI",
            ParamKind::Text => "string",
            ParamKind::Integer => "non-negative integer",
            ParamKind::Decimal => "decimal",
            ParamKind::DateTime => "xsd:dateTime",
            ParamKind::Duration => "xsd:duration",
            ParamKind::PolicyKind => "Set|Offer|Agreement",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub kind: ParamKind,
    pub required: bool,
}

const fn req(name: &'static str, kind: ParamKind) -> ParamSpec {
    ParamSpec {
        name,
        kind,
        required: true,
    }
}

const fn opt(name: &'static str, kind: ParamKind) -> ParamSpec {
    ParamSpec {
        name,
        kind,
        required: false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatternDescriptor {
    pub id: &'static str,
    pub name: &'static str,
    pub description: &'static str,
    pub pip_roles: Vec<PartyRole>,
    pub pap_pdp_role: PartyRole,
    pub enforcement_class: EnforcementClass,
    pub source: Source,
    /// How the template encodes the pattern in ODRL.
    pub encoding: &'static str,
    pub parameter_schema: Vec<ParamSpec>,
}

impl PatternDescriptor {
    pub fn parameter(&self, name: &str) -> Option<&ParamSpec> {
        self.parameter_schema.iter().find(|p| p.name == name)
    }
}

/// Whether the template produces a permission or stands alone as an obligation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Shape {
    Permission,
    Obligation,
}

pub(crate) const fn shape_of(id: &str) -> Shape {
    match id.as_bytes() {
        b"data-quality" | b"up-to-dateness" => Shape::Obligation,
        _ => Shape::Permission,
    }
}

use EnforcementClass::{Detective, Preventive};
use PartyRole::{Consumer, Provider, ThirdParty};
use Source::{Literature, SelfDefined};

struct Row {
    id: &'static str,
    name: &'static str,
    description: &'static str,
    pip: &'static [PartyRole],
    pap_pdp: PartyRole,
    class: EnforcementClass,
    source: Source,
    encoding: &'static str,
    params: &'static [ParamSpec],
}

const ROWS: [Row; 22] = [
    Row {
        id: "allow-access",
        name: "Allow access",
        description: "A named consumer is granted access to the asset.",
        pip: &[Provider],
        pap_pdp: Provider,
        class: Preventive,
        source: Literature,
        encoding: "permission without constraints",
        params: &[],
    },
    Row {
        id: "location-access",
        name: "Location / Regional access restriction",
        description: "Access is granted only while the consumer is inside a permitted region.",
        pip: &[Provider],
        pap_pdp: Provider,
        class: Detective,
        source: Literature,
        encoding: "permission constraint odrl:spatial isPartOf region",
        params: &[req("region", ParamKind::Text)],
    },
    Row {
        id: "location-storage",
        name: "Location / Regional storage restriction",
        description: "Stored copies must reside in a permitted region.",
        pip: &[Consumer, ThirdParty],
        pap_pdp: Provider,
        class: Detective,
        source: Literature,
        encoding: "duty dsp:store constrained dsp:storageRegion isPartOf region",
        params: &[req("region", ParamKind::Text)],
    },
    Row {
        id: "time-restriction",
        name: "Time restriction",
        description: "Access is limited to a fixed time window.",
        pip: &[Provider],
        pap_pdp: Provider,
        class: Preventive,
        source: Literature,
        encoding: "permission constraints odrl:dateTime gteq start and lteq end",
        params: &[req("start", ParamKind::DateTime), req("end", ParamKind::DateTime)],
    },
    Row {
        id: "access-count",
        name: "Access count",
        description: "The asset may be used a bounded number of times in total.",
        pip: &[Provider],
        pap_pdp: Provider,
        class: Preventive,
        source: Literature,
        encoding: "permission constraint odrl:count lteq max",
        params: &[req("max", ParamKind::Integer)],
    },
    Row {
        id: "rate-limit",
        name: "Rate limit",
        description: "At most max uses inside any sliding window of the given length.",
        pip: &[Provider],
        pap_pdp: Provider,
        class: Preventive,
        source: Literature,
        encoding: "permission constraints odrl:count lteq max and odrl:timeInterval eq window",
        params: &[req("max", ParamKind::Integer), req("window", ParamKind::Duration)],
    },
    Row {
        id: "concurrent-connections",
        name: "Concurrent active connections",
        description: "Caps the number of simultaneously open transfers.",
        pip: &[Provider],
        pap_pdp: Provider,
        class: Preventive,
        source: Literature,
        encoding: "permission constraint dsp:concurrentConnections lteq max",
        params: &[req("max", ParamKind::Integer)],
    },
    Row {
        id: "data-amount",
        name: "Amount of data",
        description: "Caps the total volume transferred, metered in a stated unit per read.",
        pip: &[Provider],
        pap_pdp: Provider,
        class: Preventive,
        source: Literature,
        encoding: "action odrl:read refined by odrl:unitOfCount eq unit, constraint odrl:count lteq max",
        params: &[req("unit", ParamKind::Text), req("max", ParamKind::Integer)],
    },
    Row {
        id: "processing-power",
        name: "Processing power",
        description: "Caps the compute the provider spends preparing the data.",
        pip: &[Provider],
        pap_pdp: Provider,
        class: Preventive,
        source: Literature,
        encoding: "permission constraint dsp:processingPower lteq max",
        params: &[req("max", ParamKind::Decimal)],
    },
    Row {
        id: "bandwidth",
        name: "Bandwidth",
        description: "Caps the transfer rate.",
        pip: &[Provider, ThirdParty],
        pap_pdp: Provider,
        class: Preventive,
        source: Literature,
        encoding: "permission constraint dsp:bandwidth lteq max",
        params: &[req("max", ParamKind::Decimal)],
    },
    Row {
        id: "billing",
        name: "Billing / Credit points",
        description: "Each use is paid for from the consumer's credit.",
        pip: &[Provider],
        pap_pdp: Provider,
        class: Preventive,
        source: Literature,
        encoding: "duty odrl:compensate constrained odrl:payAmount eq amount",
        params: &[req("amount", ParamKind::Decimal)],
    },
    Row {
        id: "data-quality",
        name: "Data quality",
        description: "Delivered data must pass a schema check before use.",
        pip: &[Consumer],
        pap_pdp: Consumer,
        class: Detective,
        source: SelfDefined,
        encoding: "obligation dsp:qualityControl refined by dsp:conformsTo eq shape, constraint odrl:event lt odrl:policyUsage",
        params: &[req("shape", ParamKind::Iri)],
    },
    Row {
        id: "deletion",
        name: "Deletion",
        description: "The consumer must delete the data by a deadline.",
        pip: &[Consumer, ThirdParty],
        pap_pdp: Provider,
        class: Detective,
        source: Literature,
        encoding: "duty odrl:delete constrained odrl:dateTime lt deadline",
        params: &[req("deadline", ParamKind::DateTime)],
    },
    Row {
        id: "purpose",
        name: "Purpose / Application",
        description: "Use is restricted to a declared purpose.",
        pip: &[Consumer, ThirdParty],
        pap_pdp: Provider,
        class: Detective,
        source: Literature,
        encoding: "permission constraint odrl:purpose eq purpose",
        params: &[req("purpose", ParamKind::Iri)],
    },
    Row {
        id: "provable-attribute",
        name: "Provable attribute",
        description: "The consumer must hold a certified claim, such as a membership.",
        pip: &[Provider, ThirdParty],
        pap_pdp: Provider,
        class: Preventive,
        source: Literature,
        encoding: "permission constraint dsp:attestedClaim eq claim",
        params: &[req("claim", ParamKind::Iri)],
    },
    Row {
        id: "encryption-by-consumer",
        name: "Encryption by consumer",
        description: "The consumer must keep its stored copy encrypted.",
        pip: &[Consumer],
        pap_pdp: Provider,
        class: Detective,
        source: Literature,
        encoding: "duty dsp:encrypt owed by the consumer",
        params: &[],
    },
    Row {
        id: "encryption-by-provider",
        name: "Encryption by provider",
        description: "The provider must encrypt the data in transit.",
        pip: &[Consumer],
        pap_pdp: Consumer,
        class: Preventive,
        source: SelfDefined,
        encoding: "duty dsp:encrypt owed by the provider to the consumer",
        params: &[],
    },
    Row {
        id: "aggregation",
        name: "Aggregation",
        description: "Data must be aggregated before further processing.",
        pip: &[Consumer],
        pap_pdp: Provider,
        class: Detective,
        source: Literature,
        encoding: "duty odrl:aggregate",
        params: &[],
    },
    Row {
        id: "anonymization",
        name: "Anonymization",
        description: "Data must be anonymized before further processing.",
        pip: &[Consumer],
        pap_pdp: Provider,
        class: Detective,
        source: Literature,
        encoding: "duty odrl:anonymize",
        params: &[],
    },
    Row {
        id: "activity-logging",
        name: "Activity logging",
        description: "Processing activity is reported back to the provider.",
        pip: &[Consumer],
        pap_pdp: Provider,
        class: Detective,
        source: Literature,
        encoding: "duty odrl:inform",
        params: &[],
    },
    Row {
        id: "delegation",
        name: "Delegation of permission",
        description: "Redistributed data must carry a given follow-up policy.",
        pip: &[Consumer],
        pap_pdp: Provider,
        class: Detective,
        source: Literature,
        encoding: "action odrl:distribute with duty odrl:nextPolicy targeting next_policy",
        params: &[req("next_policy", ParamKind::Iri)],
    },
    Row {
        id: "up-to-dateness",
        name: "Up-to-dateness",
        description: "The provider refreshes the data at least once per interval.",
        pip: &[Consumer],
        pap_pdp: Provider,
        class: Detective,
        source: SelfDefined,
        encoding: "obligation dsp:update constrained odrl:timeInterval eq interval",
        params: &[req("interval", ParamKind::Duration)],
    },
];

/// Parameters every template accepts in addition to its own.
pub const COMMON_PARAMETERS: [ParamSpec; 6] = [
    opt("target", ParamKind::Iri),
    opt("assigner", ParamKind::Iri),
    opt("assignee", ParamKind::Iri),
    opt("uid", ParamKind::Iri),
    opt("kind", ParamKind::PolicyKind),
    opt("action", ParamKind::Iri),
];

fn common_for(id: &str) -> Vec<ParamSpec> {
    let obligation = shape_of(id) == Shape::Obligation;
    COMMON_PARAMETERS
        .iter()
        .filter(|p| !(obligation && p.name == "action"))
        .map(|p| ParamSpec {
            required: !obligation && matches!(p.name, "target" | "assigner"),
            ..*p
        })
        .collect()
}

/// All descriptors, in catalog order.
pub fn list_patterns() -> &'static [PatternDescriptor] {
    static CATALOG: OnceLock<Vec<PatternDescriptor>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        ROWS.iter()
            .map(|r| {
                let mut parameter_schema = common_for(r.id);
                parameter_schema.extend_from_slice(r.params);
                PatternDescriptor {
                    id: r.id,
                    name: r.name,
                    description: r.description,
                    pip_roles: r.pip.to_vec(),
                    pap_pdp_role: r.pap_pdp,
                    enforcement_class: r.class,
                    source: r.source,
                    encoding: r.encoding,
                    parameter_schema,
                }
            })
            .collect()
    })
}

const ALIASES: [(&str, &str); 2] = [
    ("encryption-consumer", "encryption-by-consumer"),
    ("encryption-provider", "encryption-by-provider"),
];

pub fn descriptor(id: &str) -> Option<&'static PatternDescriptor> {
    let id = ALIASES
        .iter()
        .find(|(alias, _)| *alias == id)
        .map_or(id, |(_, real)| real);
    list_patterns().iter().find(|d| d.id == id)
}

fn roles(rs: &[PartyRole]) -> String {
    rs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// Reference table of the catalog in Markdown.
pub fn catalog_markdown() -> String {
    let mut out = String::from(
        "| Pattern | Id | PIP | PAP/PDP | Enforcement | Source | Encoding | Parameters |\n\
         |---|---|---|---|---|---|---|---|\n",
    );
    for d in list_patterns() {
        let params: Vec<String> = d
            .parameter_schema
            .iter()
            .filter(|p| !COMMON_PARAMETERS.iter().any(|c| c.name == p.name))
            .map(|p| format!("`{}`: {}", p.name, p.kind))
            .collect();
        out.push_str(&format!(
            "| {} | `{}` | {} | {} | {:?} | {} | {} | {} |\n",
            d.name,
            d.id,
            roles(&d.pip_roles),
            d.pap_pdp_role,
            d.enforcement_class,
            match d.source {
                Source::Literature => "literature",
                Source::SelfDefined => "self-defined",
            },
            d.encoding,
            if params.is_empty() { "-".to_string() } else { params.join(", ") },
        ));
    }
    out
}

#[cfg(test)]
mod tests;
