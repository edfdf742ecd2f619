use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDateTime, TimeDelta, Utc};
use rust_decimal::Decimal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::vocab;

use super::{Iri, ModelError};

/// Literal datatypes the engine interprets. Anything else is carried as [`Datatype::Other`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Datatype {
    String,
    Decimal,
    Integer,
    DateTime,
    Duration,
    Boolean,
    Other(Iri),
}

impl Datatype {
    pub fn from_iri(iri: &Iri) -> Datatype {
        match iri.as_str().strip_prefix(vocab::XSD) {
            Some("string") => Datatype::String,
            Some("decimal") => Datatype::Decimal,
            Some("integer") => Datatype::Integer,
            Some("dateTime") => Datatype::DateTime,
            Some("duration") => Datatype::Duration,
            Some("boolean") => Datatype::Boolean,
            _ => Datatype::Other(iri.clone()),
        }
    }

    pub fn iri(&self) -> Iri {
        let local = match self {
            Datatype::String => "string",
            Datatype::Decimal => "decimal",
            Datatype::Integer => "integer",
            Datatype::DateTime => "dateTime",
            Datatype::Duration => "duration",
            Datatype::Boolean => "boolean",
            Datatype::Other(iri) => return iri.clone(),
        };
        Iri::new(vocab::xsd(local)).expect("xsd namespace is absolute")
    }
}

/// A length of time expressed as an ISO 8601 duration without calendar components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct XsdDuration {
    millis: i64,
}

impl XsdDuration {
    pub fn from_millis(millis: i64) -> Self {
        XsdDuration { millis }
    }

    pub fn from_secs(secs: i64) -> Self {
        XsdDuration { millis: secs * 1000 }
    }

    pub fn as_millis(&self) -> i64 {
        self.millis
    }

    pub fn as_delta(&self) -> TimeDelta {
        TimeDelta::milliseconds(self.millis)
    }

    /// Parses `PnW`, `PnDTnHnMnS` and their subsets, plus the relaxed `PnS` form. Years and
    /// months are rejected since they have no fixed length.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let bad = || ModelError::InvalidLiteral {
            lexical: text.to_string(),
            datatype: "duration".into(),
        };
        let (negative, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let body = body.strip_prefix('P').ok_or_else(bad)?;
        if body.is_empty() {
            return Err(bad());
        }
        let (date_part, time_part) = match body.split_once('T') {
            Some((d, t)) => {
                if t.is_empty() {
                    return Err(bad());
                }
                (d, Some(t))
            }
            None => (body, None),
        };
        let mut millis: i64 = 0;
        let mut scan = |part: &str, units: &[(char, i64)], allow_fraction: bool| -> Result<(), ModelError> {
            let mut number = String::new();
            let mut last_unit = 0usize;
            for ch in part.chars() {
                if ch.is_ascii_digit() || (allow_fraction && ch == '.') {
                    number.push(ch);
                    continue;
                }
                let pos = units.iter().position(|(u, _)| *u == ch).ok_or_else(bad)?;
                if number.is_empty() || pos < last_unit {
                    return Err(bad());
                }
                last_unit = pos + 1;
                let factor = units[pos].1;
                let value = Decimal::from_str(&number).map_err(|_| bad())?;
                if value.fract() != Decimal::ZERO && ch != 'S' {
                    return Err(bad());
                }
                let scaled = (value * Decimal::from(factor)).trunc();
                let scaled: i64 = scaled.try_into().map_err(|_| bad())?;
                millis = millis.checked_add(scaled).ok_or_else(bad)?;
                number.clear();
            }
            if number.is_empty() {
                Ok(())
            } else {
                Err(bad())
            }
        };
        // "P30S" has no time designator; seconds and hours are unambiguous there, minutes are not.
        scan(
            date_part,
            &[('W', 7 * 86_400_000), ('D', 86_400_000), ('H', 3_600_000), ('S', 1000)],
            time_part.is_none(),
        )?;
        if let Some(t) = time_part {
            scan(t, &[('H', 3_600_000), ('M', 60_000), ('S', 1000)], true)?;
        }
        Ok(XsdDuration {
            millis: if negative { -millis } else { millis },
        })
    }
}

impl fmt::Display for XsdDuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let secs = Decimal::new(self.millis, 3).normalize();
        write!(f, "PT{secs}S")
    }
}

/// Parses an `xsd:dateTime` lexical form. Timestamps without an offset are read as UTC.
pub fn parse_date_time(text: &str) -> Result<DateTime<Utc>, ModelError> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Ok(dt.with_timezone(&Utc));
    }
    NaiveDateTime::parse_from_str(text, "%Y-%m-%dT%H:%M:%S%.f")
        .map(|naive| naive.and_utc())
        .map_err(|_| ModelError::InvalidLiteral {
            lexical: text.to_string(),
            datatype: "dateTime".into(),
        })
}

/// Renders a timestamp the way the canonical serializer and the audit log write it.
pub fn format_date_time(at: &DateTime<Utc>) -> String {
    at.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true)
}

/// Interpreted value of a literal.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Number(Decimal),
    DateTime(DateTime<Utc>),
    Duration(XsdDuration),
    Boolean(bool),
}

/// A lexical form paired with its datatype.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "LiteralRepr", into = "LiteralRepr")]
pub struct TypedLiteral {
    pub lexical: String,
    pub datatype: Datatype,
}

#[derive(Serialize, Deserialize)]
struct LiteralRepr {
    value: String,
    datatype: Iri,
}

impl TryFrom<LiteralRepr> for TypedLiteral {
    type Error = ModelError;

    fn try_from(r: LiteralRepr) -> Result<Self, Self::Error> {
        TypedLiteral::new(r.value, Datatype::from_iri(&r.datatype))
    }
}

impl From<TypedLiteral> for LiteralRepr {
    fn from(l: TypedLiteral) -> Self {
        LiteralRepr {
            datatype: l.datatype.iri(),
            value: l.lexical,
        }
    }
}

impl TypedLiteral {
    /// Builds a literal after checking the lexical form against the datatype.
    pub fn new(lexical: impl Into<String>, datatype: Datatype) -> Result<Self, ModelError> {
        let lit = TypedLiteral {
            lexical: lexical.into(),
            datatype,
        };
        lit.value()?;
        Ok(lit)
    }

    pub fn string(lexical: impl Into<String>) -> Self {
        TypedLiteral {
            lexical: lexical.into(),
            datatype: Datatype::String,
        }
    }

    pub fn integer(value: i64) -> Self {
        TypedLiteral {
            lexical: value.to_string(),
            datatype: Datatype::Integer,
        }
    }

    pub fn decimal(value: Decimal) -> Self {
        TypedLiteral {
            lexical: value.to_string(),
            datatype: Datatype::Decimal,
        }
    }

    pub fn boolean(value: bool) -> Self {
        TypedLiteral {
            lexical: value.to_string(),
            datatype: Datatype::Boolean,
        }
    }

    pub fn date_time(at: DateTime<Utc>) -> Self {
        TypedLiteral {
            lexical: format_date_time(&at),
            datatype: Datatype::DateTime,
        }
    }

    pub fn duration(d: XsdDuration) -> Self {
        TypedLiteral {
            lexical: d.to_string(),
            datatype: Datatype::Duration,
        }
    }

    /// Interprets the lexical form under the datatype. Unknown datatypes read as text.
    pub fn value(&self) -> Result<Value, ModelError> {
        let bad = |dt: &str| ModelError::InvalidLiteral {
            lexical: self.lexical.clone(),
            datatype: dt.to_string(),
        };
        match &self.datatype {
            Datatype::String | Datatype::Other(_) => Ok(Value::Text(self.lexical.clone())),
            Datatype::Integer => {
                let trimmed = self.lexical.strip_prefix('+').unwrap_or(&self.lexical);
                let digits = trimmed.strip_prefix('-').unwrap_or(trimmed);
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(bad("integer"));
                }
                Decimal::from_str(trimmed)
                    .map(Value::Number)
                    .map_err(|_| bad("integer"))
            }
            Datatype::Decimal => {
                let trimmed = self.lexical.strip_prefix('+').unwrap_or(&self.lexical);
                if trimmed.is_empty()
                    || !trimmed
                        .bytes()
                        .all(|b| b.is_ascii_digit() || b == b'.' || b == b'-')
                {
                    return Err(bad("decimal"));
                }
                Decimal::from_str(trimmed)
                    .map(Value::Number)
                    .map_err(|_| bad("decimal"))
            }
            Datatype::DateTime => parse_date_time(&self.lexical).map(Value::DateTime),
            Datatype::Duration => XsdDuration::parse(&self.lexical).map(Value::Duration),
            Datatype::Boolean => match self.lexical.as_str() {
                "true" | "1" => Ok(Value::Boolean(true)),
                "false" | "0" => Ok(Value::Boolean(false)),
                _ => Err(bad("boolean")),
            },
        }
    }

    /// Reads the literal as a number, accepting untyped numerals such as `"1024"`.
    pub fn as_number(&self) -> Option<Decimal> {
        match self.value().ok()? {
            Value::Number(n) => Some(n),
            Value::Text(t) => Decimal::from_str(t.trim()).ok(),
            _ => None,
        }
    }
}

impl fmt::Display for TypedLiteral {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.datatype {
            Datatype::String => write!(f, "{:?}", self.lexical),
            _ => write!(f, "{:?}^^<{}>", self.lexical, self.datatype.iri()),
        }
    }
}

/// Object position value: an IRI or a literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(Iri),
    Literal(TypedLiteral),
}

impl Term {
    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri(iri) => Some(iri),
            Term::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&TypedLiteral> {
        match self {
            Term::Literal(lit) => Some(lit),
            Term::Iri(_) => None,
        }
    }

    /// Text used for string comparisons: the IRI itself or the lexical form.
    pub fn lexical(&self) -> &str {
        match self {
            Term::Iri(iri) => iri.as_str(),
            Term::Literal(lit) => &lit.lexical,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => write!(f, "<{iri}>"),
            Term::Literal(lit) => lit.fmt(f),
        }
    }
}

impl From<Iri> for Term {
    fn from(iri: Iri) -> Self {
        Term::Iri(iri)
    }
}

impl From<TypedLiteral> for Term {
    fn from(lit: TypedLiteral) -> Self {
        Term::Literal(lit)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TermRepr {
    Plain(String),
    Iri { iri: Iri },
    Typed { value: String, datatype: Iri },
}

/// JSON form: a bare string is an `xsd:string` literal, `{"iri": ..}` an IRI and
/// `{"value": .., "datatype": ..}` a typed literal.
impl Serialize for Term {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let repr = match self {
            Term::Iri(iri) => TermRepr::Iri { iri: iri.clone() },
            Term::Literal(lit) if lit.datatype == Datatype::String => {
                TermRepr::Plain(lit.lexical.clone())
            }
            Term::Literal(lit) => TermRepr::Typed {
                value: lit.lexical.clone(),
                datatype: lit.datatype.iri(),
            },
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(match TermRepr::deserialize(deserializer)? {
            TermRepr::Plain(s) => Term::Literal(TypedLiteral::string(s)),
            TermRepr::Iri { iri } => Term::Iri(iri),
            TermRepr::Typed { value, datatype } => Term::Literal(
                TypedLiteral::new(value, Datatype::from_iri(&datatype))
                    .map_err(serde::de::Error::custom)?,
            ),
        })
    }
}
