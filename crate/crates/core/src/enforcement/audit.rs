use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::Iri;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AuditOutcome {
    Permitted,
    Denied,
    Delayed,
    Executed,
    DutyFulfilled,
    DutyViolated,
    Revoked,
    Notified,
}

impl fmt::Display for AuditOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub actor: Iri,
    pub action: Iri,
    pub target: Iri,
    pub outcome: AuditOutcome,
    #[serde(default)]
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Iri>,
    /// Evidence attributes such as `storageRegion` or `purpose`, keyed by operand local name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, String>,
}

/// A record before the log assigns its sequence number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEntry {
    pub at: DateTime<Utc>,
    pub actor: Iri,
    pub action: Iri,
    pub target: Iri,
    pub outcome: AuditOutcome,
    pub detail: String,
    pub agreement: Option<Iri>,
    pub attributes: BTreeMap<String, String>,
}

impl AuditEntry {
    pub fn new(at: DateTime<Utc>, actor: Iri, action: Iri, target: Iri, outcome: AuditOutcome) -> Self {
        AuditEntry {
            at,
            actor,
            action,
            target,
            outcome,
            detail: String::new(),
            agreement: None,
            attributes: BTreeMap::new(),
        }
    }

    pub fn detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }

    pub fn agreement(mut self, agreement: &Iri) -> Self {
        self.agreement = Some(agreement.clone());
        self
    }

    pub fn attribute(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: seq {seq} does not follow {prev}")]
    Sequence { line: usize, seq: u64, prev: u64 },
}

pub const OUT_OF_ORDER: &str = "out-of-order";

/// Append-only record list. Sequence numbers start at 1 and increase by one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditLog {
    records: Vec<AuditRecord>,
}

impl AuditLog {
    pub fn new() -> Self {
        AuditLog::default()
    }

    /// Appends and returns the stored record. An entry dated before the previous record is
    /// kept but flagged in its detail.
    pub fn append(&mut self, entry: AuditEntry) -> &AuditRecord {
        let mut detail = entry.detail;
        if self.records.last().is_some_and(|last| entry.at < last.at) {
            if detail.is_empty() {
                detail = OUT_OF_ORDER.to_string();
            } else {
                detail = format!("{detail} ({OUT_OF_ORDER})");
            }
        }
        let seq = self.records.last().map_or(1, |r| r.seq + 1);
        self.records.push(AuditRecord {
            seq,
            at: entry.at,
            actor: entry.actor,
            action: entry.action,
            target: entry.target,
            outcome: entry.outcome,
            detail,
            agreement: entry.agreement,
            attributes: entry.attributes,
        });
        self.records.last().expect("just pushed")
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last_at(&self) -> Option<DateTime<Utc>> {
        self.records.last().map(|r| r.at)
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("audit records serialize"));
            out.push('\n');
        }
        out
    }

    /// Reads newline-delimited records; blank lines are skipped, sequence numbers must
    /// increase strictly.
    pub fn from_ndjson(text: &str) -> Result<AuditLog, AuditError> {
        let mut records: Vec<AuditRecord> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: AuditRecord = serde_json::from_str(line).map_err(|source| AuditError::Json {
                line: i + 1,
                source,
            })?;
            if let Some(prev) = records.last() {
                if r.seq <= prev.seq {
                    return Err(AuditError::Sequence {
                        line: i + 1,
                        seq: r.seq,
                        prev: prev.seq,
                    });
                }
            }
            records.push(r);
        }
        Ok(AuditLog { records })
    }
}

/// Appends an `Executed` record attributed to `actor`, the way consumers self-report duty
/// fulfilment.
pub fn record_evidence<'a>(
    log: &'a mut AuditLog,
    actor: Iri,
    action: Iri,
    target: Iri,
    at: DateTime<Utc>,
) -> &'a AuditRecord {
    log.append(AuditEntry::new(at, actor, action, target, AuditOutcome::Executed))
}
