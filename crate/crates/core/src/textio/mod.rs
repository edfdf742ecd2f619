//! Reading and writing policies in the Turtle subset used by policy documents.
//!
//! Supported: `@prefix`, prefixed names, `<absolute IRIs>`, `_:labels`, `[ ... ]`,
//! object lists, predicate lists, `"literals"` with optional `^^datatype`, bare integers,
//! decimals and booleans, and the `a` keyword. Collections, `@base`, language tags and
//! multi-line literals are rejected with a [`ParseError`].

mod extract;
mod graph;
mod lexer;
mod serialize;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Asset, Policy};

pub use graph::{Graph, Node, Object, Triple};
pub use serialize::serialize;

/// 1-based line and column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SourceLocation {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("{location}: {message} (near `{snippet}`)")]
pub struct ParseError {
    pub location: SourceLocation,
    /// Byte offset of `location` in the input.
    pub offset: usize,
    pub message: String,
    pub snippet: String,
}

impl ParseError {
    pub(crate) fn new(
        text: &str,
        location: SourceLocation,
        offset: usize,
        message: impl Into<String>,
    ) -> Self {
        let snippet: String = text
            .get(offset..)
            .unwrap_or("")
            .chars()
            .take_while(|c| !c.is_whitespace())
            .take(40)
            .collect();
        ParseError {
            location,
            offset,
            message: message.into(),
            snippet,
        }
    }
}

/// Everything a document describes.
#[derive(Debug, Clone, Default)]
pub struct Document {
    pub policies: Vec<Policy>,
    pub assets: Vec<Asset>,
}

pub fn parse_graph(text: &str) -> Result<Graph, ParseError> {
    let tokens = lexer::Lexer::new(text).tokenize()?;
    graph::GraphParser::new(text, tokens).parse()
}

pub fn parse_document(text: &str) -> Result<Document, ParseError> {
    let graph = parse_graph(text)?;
    let extractor = extract::Extractor::new(text, &graph);
    Ok(Document {
        policies: extractor.policies()?,
        assets: extractor.assets()?,
    })
}

/// Every subject typed as an ODRL policy, in document order.
pub fn parse(text: &str) -> Result<Vec<Policy>, ParseError> {
    parse_document(text).map(|d| d.policies)
}
