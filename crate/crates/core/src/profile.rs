//! Vocabulary registry: which IRIs are actions, left operands, operators and so on.
//!
//! The built-in registry is compiled from `data/profile.ttl`. An alternative file in the
//! same format can be loaded with [`ProfileRegistry::from_turtle`].

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Serialize;
use thiserror::Error;

use crate::model::Iri;
use crate::textio::{self, Node, Object, ParseError};
use crate::vocab;

const BUILTIN_PROFILE: &str = include_str!("../data/profile.ttl");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum TermKind {
    Action,
    LeftOperand,
    Operator,
    RightOperand,
    Class,
    Property,
}

impl TermKind {
    fn from_class(class: &Iri) -> Option<TermKind> {
        let s = class.as_str();
        if class.is_odrl("Action") {
            Some(TermKind::Action)
        } else if class.is_odrl("LeftOperand") {
            Some(TermKind::LeftOperand)
        } else if class.is_odrl("Operator") {
            Some(TermKind::Operator)
        } else if class.is_odrl("RightOperand") {
            Some(TermKind::RightOperand)
        } else if s == format!("{}Class", vocab::RDFS) {
            Some(TermKind::Class)
        } else if s == format!("{}Property", vocab::RDF) {
            Some(TermKind::Property)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TermInfo {
    pub iri: Iri,
    pub kind: TermKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_datatype: Option<Iri>,
    pub defining_profile: Iri,
}

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("<{0}> is declared with more than one term kind")]
    ConflictingKind(Iri),
    #[error("<{0}> has no rdfs:isDefinedBy")]
    MissingProfile(Iri),
}

/// Immutable set of known terms, keyed by IRI with the profile alias namespace folded.
#[derive(Debug, Clone, Default)]
pub struct ProfileRegistry {
    terms: BTreeMap<Iri, TermInfo>,
}

impl ProfileRegistry {
    /// Registry built from the bundled vocabulary file.
    pub fn builtin() -> &'static ProfileRegistry {
        static REGISTRY: OnceLock<ProfileRegistry> = OnceLock::new();
        REGISTRY.get_or_init(|| {
            ProfileRegistry::from_turtle(BUILTIN_PROFILE).expect("bundled profile is well-formed")
        })
    }

    pub fn from_turtle(text: &str) -> Result<ProfileRegistry, ProfileError> {
        let graph = textio::parse_graph(text)?;
        let type_iri = format!("{}type", vocab::RDF);
        let defined_by = format!("{}isDefinedBy", vocab::RDFS);
        let range = format!("{}range", vocab::RDFS);

        let mut kinds: BTreeMap<Iri, TermKind> = BTreeMap::new();
        let mut profiles: BTreeMap<Iri, Iri> = BTreeMap::new();
        let mut ranges: BTreeMap<Iri, Iri> = BTreeMap::new();
        for t in &graph.triples {
            let (Node::Iri(subject), Object::Node(Node::Iri(object))) = (&t.subject, &t.object)
            else {
                continue;
            };
            let subject = subject.canonical();
            let p = t.predicate.as_str();
            if p == type_iri {
                if let Some(kind) = TermKind::from_class(object) {
                    match kinds.insert(subject.clone(), kind) {
                        Some(prev) if prev != kind => {
                            return Err(ProfileError::ConflictingKind(subject))
                        }
                        _ => {}
                    }
                }
            } else if p == defined_by {
                profiles.insert(subject, object.canonical());
            } else if p == range {
                ranges.insert(subject, object.clone());
            }
        }
        let mut terms = BTreeMap::new();
        for (iri, kind) in kinds {
            let defining_profile = profiles
                .remove(&iri)
                .ok_or_else(|| ProfileError::MissingProfile(iri.clone()))?;
            let info = TermInfo {
                expected_datatype: ranges.remove(&iri),
                iri: iri.clone(),
                kind,
                defining_profile,
            };
            terms.insert(iri, info);
        }
        Ok(ProfileRegistry { terms })
    }

    /// Registered term info, or `None` when the IRI is unknown.
    pub fn resolve(&self, iri: &Iri) -> Option<&TermInfo> {
        self.terms.get(&iri.canonical())
    }

    pub fn resolve_kind(&self, iri: &Iri) -> Option<TermKind> {
        self.resolve(iri).map(|t| t.kind)
    }

    /// All terms in ascending IRI order.
    pub fn registered_terms(&self) -> Vec<&TermInfo> {
        self.terms.values().collect()
    }
}

/// IRI of the ODRL core profile.
pub fn odrl_core() -> Iri {
    Iri::odrl("core")
}

/// IRI of the data-spaces profile.
pub fn data_spaces_profile() -> Iri {
    Iri::new(vocab::DSP).expect("absolute")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> &'static ProfileRegistry {
        ProfileRegistry::builtin()
    }

    #[test]
    fn read_is_a_core_action() {
        let info = reg().resolve(&Iri::odrl("read")).unwrap();
        assert_eq!(info.kind, TermKind::Action);
        assert_eq!(info.defining_profile, odrl_core());
    }

    #[test]
    fn update_is_a_profile_action() {
        let info = reg().resolve(&Iri::dsp("update")).unwrap();
        assert_eq!(info.kind, TermKind::Action);
        assert_eq!(info.defining_profile, data_spaces_profile());
        let alias = Iri::new("https://w3id.org/dataspaces-policies/update").unwrap();
        assert_eq!(reg().resolve(&alias), Some(info));
    }

    #[test]
    fn unregistered_is_unknown() {
        let iri = Iri::new("http://example.com/unregistered").unwrap();
        assert!(reg().resolve(&iri).is_none());
    }

    #[test]
    fn left_operands_present() {
        assert_eq!(reg().resolve_kind(&Iri::dsp("conformsTo")), Some(TermKind::LeftOperand));
        assert_eq!(reg().resolve_kind(&Iri::odrl("unitOfCount")), Some(TermKind::LeftOperand));
        assert_eq!(
            reg().resolve(&Iri::odrl("count")).unwrap().expected_datatype.as_ref().map(|i| i.local_name()),
            Some("integer")
        );
    }

    #[test]
    fn minimum_vocabulary() {
        let actions = [
            "read", "delete", "anonymize", "aggregate", "inform", "compensate", "nextPolicy",
            "distribute", "use",
        ];
        for a in actions {
            assert_eq!(reg().resolve_kind(&Iri::odrl(a)), Some(TermKind::Action), "{a}");
        }
        for a in ["update", "qualityControl", "store", "encrypt"] {
            assert_eq!(reg().resolve_kind(&Iri::dsp(a)), Some(TermKind::Action), "{a}");
        }
        let odrl_ops = [
            "count", "unitOfCount", "dateTime", "timeInterval", "spatial", "event", "purpose",
            "payAmount", "recipient",
        ];
        for o in odrl_ops {
            assert_eq!(reg().resolve_kind(&Iri::odrl(o)), Some(TermKind::LeftOperand), "{o}");
        }
        let dsp_ops = [
            "conformsTo", "concurrentConnections", "bandwidth", "processingPower",
            "attestedClaim", "storageRegion",
        ];
        for o in dsp_ops {
            assert_eq!(reg().resolve_kind(&Iri::dsp(o)), Some(TermKind::LeftOperand), "{o}");
        }
        assert_eq!(reg().resolve_kind(&Iri::odrl("policyUsage")), Some(TermKind::RightOperand));
    }

    #[test]
    fn listing_is_sorted_and_consistent() {
        let terms = reg().registered_terms();
        assert!(terms.windows(2).all(|w| w[0].iri < w[1].iri));
        assert_eq!(terms, reg().registered_terms());
        for t in terms {
            assert_eq!(reg().resolve(&t.iri), Some(t));
        }
    }

    #[test]
    fn conflicting_kinds_rejected() {
        let text = "@prefix odrl: <http://www.w3.org/ns/odrl/2/> .\n\
                    @prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n\
                    odrl:read a odrl:Action, odrl:LeftOperand ; rdfs:isDefinedBy odrl:core .";
        assert!(matches!(
            ProfileRegistry::from_turtle(text),
            Err(ProfileError::ConflictingKind(_))
        ));
    }
}
