use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::vocab;

use super::ModelError;

/// An absolute IRI.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Iri(String);

impl Iri {
    pub fn new(value: impl Into<String>) -> Result<Self, ModelError> {
        let value = value.into();
        if value.is_empty() {
            return Err(ModelError::InvalidIri(value));
        }
        match value.find("://") {
            Some(pos) if pos > 0 && !value.contains(char::is_whitespace) => Ok(Iri(value)),
            _ => Err(ModelError::InvalidIri(value)),
        }
    }

    /// Accepts an absolute IRI or a prefixed name over the well-known prefixes (`odrl:read`).
    pub fn parse_or_expand(value: &str) -> Result<Self, ModelError> {
        if value.contains("://") {
            return Iri::new(value);
        }
        match vocab::expand_curie(value) {
            Some(expanded) => Iri::new(expanded),
            None => Err(ModelError::InvalidIri(value.to_string())),
        }
    }

    pub(crate) fn odrl(local: &str) -> Self {
        Iri(vocab::odrl(local))
    }

    pub(crate) fn dsp(local: &str) -> Self {
        Iri(vocab::dsp(local))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Same IRI with the profile alias namespace folded onto the primary one.
    pub fn canonical(&self) -> Iri {
        Iri(vocab::canonical_namespace(&self.0).into_owned())
    }

    /// Compares after folding profile namespace aliases.
    pub fn same_term(&self, other: &Iri) -> bool {
        vocab::canonical_namespace(&self.0) == vocab::canonical_namespace(&other.0)
    }

    pub fn is_odrl(&self, local: &str) -> bool {
        self.0.strip_prefix(vocab::ODRL) == Some(local)
    }

    pub fn is_dsp(&self, local: &str) -> bool {
        vocab::canonical_namespace(&self.0).strip_prefix(vocab::DSP) == Some(local)
    }

    /// Text after the last `/`, `#` or `:`.
    pub fn local_name(&self) -> &str {
        let idx = self.0.rfind(['/', '#', ':']).map(|i| i + 1).unwrap_or(0);
        &self.0[idx..]
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for Iri {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl std::str::FromStr for Iri {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Iri::parse_or_expand(s)
    }
}

impl Serialize for Iri {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Iri {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Iri::parse_or_expand(&raw).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_relative_and_empty() {
        assert!(Iri::new("").is_err());
        assert!(Iri::new("file1").is_err());
        assert!(Iri::new("http://a b").is_err());
        assert!(Iri::new("http://example.com/files/file1").is_ok());
    }

    #[test]
    fn expands_known_prefixes() {
        let iri = Iri::parse_or_expand("odrl:read").unwrap();
        assert_eq!(iri.as_str(), "http://www.w3.org/ns/odrl/2/read");
        assert!(Iri::parse_or_expand("foo:bar").is_err());
    }

    #[test]
    fn alias_namespace_folds() {
        let a = Iri::new("https://w3id.org/dataspaces-policies/update").unwrap();
        let b = Iri::dsp("update");
        assert!(a.same_term(&b));
        assert!(a.is_dsp("update"));
        assert_eq!(a.canonical(), b);
    }
}
