use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::model::Iri;

/// Counter identity: one agreement, one assignee, one metered action.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UsageKey {
    pub agreement: Iri,
    pub assignee: Iri,
    pub action: Iri,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UsageEntry {
    pub executed_count: u64,
    /// One timestamp per executed unit, in commit order.
    pub exercise_log: Vec<DateTime<Utc>>,
    pub active_connections: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Credit {
    pub balance: Decimal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub currency: Option<String>,
}

/// Usage counters and credit balances. Values are replaced, never mutated in place, by
/// [`commit_usage`](super::commit_usage).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct UsageState {
    entries: BTreeMap<UsageKey, UsageEntry>,
    credits: BTreeMap<(Iri, Iri), Credit>,
}

impl UsageState {
    pub fn new() -> Self {
        UsageState::default()
    }

    pub fn entry(&self, key: &UsageKey) -> Option<&UsageEntry> {
        self.entries.get(key)
    }

    pub fn executed_count(&self, key: &UsageKey) -> u64 {
        self.entry(key).map_or(0, |e| e.executed_count)
    }

    pub fn exercise_log(&self, key: &UsageKey) -> &[DateTime<Utc>] {
        self.entry(key).map_or(&[], |e| e.exercise_log.as_slice())
    }

    pub fn active_connections(&self, key: &UsageKey) -> u64 {
        self.entry(key).map_or(0, |e| e.active_connections)
    }

    pub fn keys(&self) -> impl Iterator<Item = &UsageKey> {
        self.entries.keys()
    }

    pub fn credit(&self, agreement: &Iri, party: &Iri) -> Option<&Credit> {
        self.credits.get(&(agreement.clone(), party.clone()))
    }

    /// Copy with the party's credit account set.
    pub fn with_credit(&self, agreement: Iri, party: Iri, credit: Credit) -> UsageState {
        let mut next = self.clone();
        next.credits.insert((agreement, party), credit);
        next
    }

    /// Copy with one connection fewer; saturates at zero.
    pub fn release_connection(&self, key: &UsageKey) -> UsageState {
        let mut next = self.clone();
        if let Some(e) = next.entries.get_mut(key) {
            e.active_connections = e.active_connections.saturating_sub(1);
        }
        next
    }

    pub(super) fn entry_mut(&mut self, key: UsageKey) -> &mut UsageEntry {
        self.entries.entry(key).or_default()
    }

    pub(super) fn credit_mut(&mut self, agreement: &Iri, party: &Iri) -> Option<&mut Credit> {
        self.credits.get_mut(&(agreement.clone(), party.clone()))
    }
}

#[derive(Serialize, Deserialize)]
struct EntryRepr {
    agreement: Iri,
    assignee: Iri,
    action: Iri,
    executed_count: u64,
    #[serde(default)]
    exercise_log: Vec<DateTime<Utc>>,
    #[serde(default)]
    active_connections: u64,
}

#[derive(Serialize, Deserialize)]
struct CreditRepr {
    agreement: Iri,
    party: Iri,
    balance: Decimal,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    currency: Option<String>,
}

#[derive(Serialize, Deserialize, Default)]
struct StateRepr {
    #[serde(default)]
    entries: Vec<EntryRepr>,
    #[serde(default)]
    credits: Vec<CreditRepr>,
}

impl TryFrom<StateRepr> for UsageState {
    type Error = String;

    fn try_from(r: StateRepr) -> Result<Self, String> {
        let mut state = UsageState::default();
        for e in r.entries {
            if e.executed_count != e.exercise_log.len() as u64 {
                return Err(format!(
                    "executed_count {} does not match {} logged exercises",
                    e.executed_count,
                    e.exercise_log.len()
                ));
            }
            let key = UsageKey {
                agreement: e.agreement,
                assignee: e.assignee,
                action: e.action,
            };
            let entry = UsageEntry {
                executed_count: e.executed_count,
                exercise_log: e.exercise_log,
                active_connections: e.active_connections,
            };
            if state.entries.insert(key, entry).is_some() {
                return Err("duplicate usage entry".into());
            }
        }
        for c in r.credits {
            state.credits.insert(
                (c.agreement, c.party),
                Credit {
                    balance: c.balance,
                    currency: c.currency,
                },
            );
        }
        Ok(state)
    }
}

impl From<UsageState> for StateRepr {
    fn from(s: UsageState) -> Self {
        StateRepr {
            entries: s
                .entries
                .into_iter()
                .map(|(k, e)| EntryRepr {
                    agreement: k.agreement,
                    assignee: k.assignee,
                    action: k.action,
                    executed_count: e.executed_count,
                    exercise_log: e.exercise_log,
                    active_connections: e.active_connections,
                })
                .collect(),
            credits: s
                .credits
                .into_iter()
                .map(|((agreement, party), c)| CreditRepr {
                    agreement,
                    party,
                    balance: c.balance,
                    currency: c.currency,
                })
                .collect(),
        }
    }
}
