//! Minimal node-shape checking for quality-control duties.
//!
//! Records are JSON objects (or arrays of objects). A property path matches a key that
//! equals the full IRI or its local name.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::Value as Json;

use crate::model::{Datatype, Iri, TypedLiteral};
use crate::textio::{self, Node, Object, ParseError};
use crate::vocab;

use super::PdpError;

pub trait ConformanceChecker: Send + Sync {
    fn conforms(&self, data: &[u8]) -> bool;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyShape {
    pub path: Iri,
    pub min_count: u32,
    pub datatype: Option<Datatype>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeShape {
    pub iri: Iri,
    pub properties: Vec<PropertyShape>,
}

impl NodeShape {
    /// Every `sh:NodeShape` with an IRI subject in the text.
    pub fn from_turtle(text: &str) -> Result<Vec<NodeShape>, ParseError> {
        let graph = textio::parse_graph(text)?;
        let sh = |local: &str| format!("{}{local}", vocab::SH);
        let rdf_type = format!("{}type", vocab::RDF);
        let mut shapes = Vec::new();
        for t in &graph.triples {
            let (Node::Iri(subject), Object::Node(Node::Iri(class))) = (&t.subject, &t.object) else {
                continue;
            };
            if t.predicate.as_str() != rdf_type || class.as_str() != sh("NodeShape") {
                continue;
            }
            let mut properties = Vec::new();
            for p in graph.about(&t.subject) {
                if p.predicate.as_str() != sh("property") {
                    continue;
                }
                let Object::Node(node) = &p.object else { continue };
                let mut path = None;
                let mut min_count = 0;
                let mut datatype = None;
                for f in graph.about(node) {
                    match (f.predicate.as_str(), &f.object) {
                        (x, Object::Node(Node::Iri(i))) if x == sh("path") => path = Some(i.clone()),
                        (x, Object::Node(Node::Iri(i))) if x == sh("datatype") => {
                            datatype = Some(Datatype::from_iri(i))
                        }
                        (x, Object::Literal(l)) if x == sh("minCount") => {
                            min_count = l.lexical.parse().unwrap_or(0)
                        }
                        _ => {}
                    }
                }
                if let Some(path) = path {
                    properties.push(PropertyShape {
                        path,
                        min_count,
                        datatype,
                    });
                }
            }
            shapes.push(NodeShape {
                iri: subject.clone(),
                properties,
            });
        }
        Ok(shapes)
    }

    fn record_conforms(&self, record: &Json) -> bool {
        let Json::Object(map) = record else { return false };
        self.properties.iter().all(|p| {
            let found = map
                .get(p.path.as_str())
                .or_else(|| map.get(p.path.local_name()));
            let values: Vec<&Json> = match found {
                None | Some(Json::Null) => Vec::new(),
                Some(Json::Array(items)) => items.iter().collect(),
                Some(v) => vec![v],
            };
            values.len() >= p.min_count as usize
                && p
                    .datatype
                    .as_ref()
                    .is_none_or(|dt| values.iter().all(|v| value_has_type(v, dt)))
        })
    }
}

fn value_has_type(v: &Json, dt: &Datatype) -> bool {
    match (dt, v) {
        (Datatype::Other(_), _) => true,
        (Datatype::String, v) => v.is_string(),
        (Datatype::Boolean, v) => v.is_boolean(),
        (Datatype::Integer, Json::Number(n)) => n.is_i64() || n.is_u64(),
        (Datatype::Decimal, Json::Number(_)) => true,
        (_, Json::String(s)) => TypedLiteral::new(s.as_str(), dt.clone()).is_ok(),
        _ => false,
    }
}

impl ConformanceChecker for NodeShape {
    fn conforms(&self, data: &[u8]) -> bool {
        match serde_json::from_slice::<Json>(data) {
            Ok(Json::Array(records)) => records.iter().all(|r| self.record_conforms(r)),
            Ok(record) => self.record_conforms(&record),
            Err(_) => false,
        }
    }
}

/// Checkers keyed by shape IRI.
#[derive(Clone, Default)]
pub struct ConformanceRegistry {
    checkers: BTreeMap<Iri, Arc<dyn ConformanceChecker>>,
}

impl ConformanceRegistry {
    pub fn new() -> Self {
        ConformanceRegistry::default()
    }

    pub fn register(&mut self, shape: Iri, checker: Arc<dyn ConformanceChecker>) {
        self.checkers.insert(shape, checker);
    }

    /// Registry holding a checker for every node shape in the text.
    pub fn from_shapes(text: &str) -> Result<Self, ParseError> {
        let mut reg = ConformanceRegistry::new();
        for shape in NodeShape::from_turtle(text)? {
            reg.register(shape.iri.clone(), Arc::new(shape));
        }
        Ok(reg)
    }

    pub fn shapes(&self) -> impl Iterator<Item = &Iri> {
        self.checkers.keys()
    }

    pub fn get(&self, shape: &Iri) -> Option<&Arc<dyn ConformanceChecker>> {
        self.checkers.get(shape)
    }
}

impl std::fmt::Debug for ConformanceRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.checkers.keys()).finish()
    }
}

pub fn check_conformance(
    asset_data: &[u8],
    shape_ref: &Iri,
    checker: &ConformanceRegistry,
) -> Result<bool, PdpError> {
    checker
        .get(shape_ref)
        .map(|c| c.conforms(asset_data))
        .ok_or_else(|| PdpError::NoChecker(shape_ref.clone()))
}
