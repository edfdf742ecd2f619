//! Turtle subset to triples.

use std::collections::HashMap;

use crate::model::{Datatype, Iri, TypedLiteral};

use super::lexer::{Tok, Token};
use super::{ParseError, SourceLocation};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Node {
    Iri(Iri),
    Blank(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Object {
    Node(Node),
    Literal(TypedLiteral),
}

#[derive(Debug, Clone)]
pub struct Triple {
    pub subject: Node,
    pub predicate: Iri,
    pub object: Object,
    /// Where the object was written.
    pub loc: SourceLocation,
    pub offset: usize,
}

/// Parsed triples in document order plus the prefix map in effect at the end.
#[derive(Debug, Default)]
pub struct Graph {
    pub triples: Vec<Triple>,
    pub prefixes: HashMap<String, String>,
}

impl Graph {
    pub fn about<'g>(&'g self, subject: &'g Node) -> impl Iterator<Item = &'g Triple> + 'g {
        self.triples.iter().filter(move |t| &t.subject == subject)
    }

    pub fn has_subject(&self, subject: &Node) -> bool {
        self.triples.iter().any(|t| &t.subject == subject)
    }
}

pub(crate) struct GraphParser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    anon: usize,
    depth: usize,
    graph: Graph,
}

const MAX_NESTING: usize = 64;

impl<'a> GraphParser<'a> {
    pub fn new(text: &'a str, tokens: Vec<Token>) -> Self {
        GraphParser {
            text,
            tokens,
            pos: 0,
            anon: 0,
            depth: 0,
            graph: Graph::default(),
        }
    }

    pub fn parse(mut self) -> Result<Graph, ParseError> {
        while self.pos < self.tokens.len() {
            self.statement()?;
        }
        Ok(self.graph)
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        match self.tokens.get(self.pos).or(self.tokens.last()) {
            Some(t) => ParseError::new(self.text, t.loc, t.offset, message),
            None => ParseError::new(self.text, SourceLocation { line: 1, column: 1 }, 0, message),
        }
    }

    fn error_at(&self, token: &Token, message: impl Into<String>) -> ParseError {
        ParseError::new(self.text, token.loc, token.offset, message)
    }

    fn next(&mut self) -> Result<Token, ParseError> {
        match self.tokens.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.clone())
            }
            None => Err(self.error_here("unexpected end of input")),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<Token, ParseError> {
        match self.tokens.get(self.pos) {
            Some(t) if t.tok == want => {
                self.pos += 1;
                Ok(t.clone())
            }
            Some(t) => Err(self.error_at(t, format!("expected {what}"))),
            None => Err(self.error_here(format!("expected {what} before end of input"))),
        }
    }

    fn statement(&mut self) -> Result<(), ParseError> {
        if self.peek() == Some(&Tok::PrefixDirective) {
            self.pos += 1;
            let name = self.next()?;
            let Tok::PName { prefix, local } = &name.tok else {
                return Err(self.error_at(&name, "expected prefix name"));
            };
            if !local.is_empty() {
                return Err(self.error_at(&name, "prefix name must end with `:`"));
            }
            let iri = self.next()?;
            let Tok::IriRef(ns) = &iri.tok else {
                return Err(self.error_at(&iri, "expected namespace IRI"));
            };
            self.graph.prefixes.insert(prefix.clone(), ns.clone());
            self.expect(Tok::Dot, "`.` after prefix directive")?;
            return Ok(());
        }
        let subject_token = self.next()?;
        match &subject_token.tok {
            Tok::LBracket => {
                let node = self.blank_property_list()?;
                if self.peek() != Some(&Tok::Dot) {
                    self.predicate_object_list(&node)?;
                }
            }
            _ => {
                let subject = self.node_from(&subject_token)?;
                self.predicate_object_list(&subject)?;
            }
        }
        self.expect(Tok::Dot, "`.` at end of statement")?;
        Ok(())
    }

    fn node_from(&self, token: &Token) -> Result<Node, ParseError> {
        match &token.tok {
            Tok::Blank(label) => Ok(Node::Blank(label.clone())),
            Tok::IriRef(_) | Tok::PName { .. } => Ok(Node::Iri(self.iri_from(token)?)),
            _ => Err(self.error_at(token, "expected subject")),
        }
    }

    fn iri_from(&self, token: &Token) -> Result<Iri, ParseError> {
        let raw = match &token.tok {
            Tok::IriRef(s) => s.clone(),
            Tok::PName { prefix, local } => match self.graph.prefixes.get(prefix) {
                Some(ns) => format!("{ns}{local}"),
                None => return Err(self.error_at(token, format!("undefined prefix `{prefix}:`"))),
            },
            Tok::A => crate::vocab::RDF.to_string() + "type",
            _ => return Err(self.error_at(token, "expected IRI")),
        };
        Iri::new(raw).map_err(|e| self.error_at(token, e.to_string()))
    }

    fn predicate_object_list(&mut self, subject: &Node) -> Result<(), ParseError> {
        loop {
            let verb = self.next()?;
            let predicate = match verb.tok {
                Tok::A | Tok::IriRef(_) | Tok::PName { .. } => self.iri_from(&verb)?,
                _ => return Err(self.error_at(&verb, "expected predicate")),
            };
            loop {
                self.object(subject, &predicate)?;
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            if self.peek() != Some(&Tok::Semicolon) {
                return Ok(());
            }
            while self.peek() == Some(&Tok::Semicolon) {
                self.pos += 1;
            }
            // A trailing `;` before `.` or `]` is allowed.
            if matches!(self.peek(), Some(Tok::Dot) | Some(Tok::RBracket) | None) {
                return Ok(());
            }
        }
    }

    fn blank_property_list(&mut self) -> Result<Node, ParseError> {
        if self.depth >= MAX_NESTING {
            return Err(self.error_here("blank nodes nested too deeply"));
        }
        self.depth += 1;
        let result = self.blank_property_list_inner();
        self.depth -= 1;
        result
    }

    fn blank_property_list_inner(&mut self) -> Result<Node, ParseError> {
        let node = Node::Blank(format!("#anon{}", self.anon));
        self.anon += 1;
        if self.peek() == Some(&Tok::RBracket) {
            self.pos += 1;
            return Ok(node);
        }
        self.predicate_object_list(&node)?;
        self.expect(Tok::RBracket, "`]` closing blank node")?;
        Ok(node)
    }

    fn object(&mut self, subject: &Node, predicate: &Iri) -> Result<(), ParseError> {
        let token = self.next()?;
        let object = match &token.tok {
            Tok::LBracket => Object::Node(self.blank_property_list()?),
            Tok::Blank(_) | Tok::IriRef(_) | Tok::PName { .. } => {
                Object::Node(self.node_from(&token)?)
            }
            Tok::Str(value) => {
                let datatype = if self.peek() == Some(&Tok::DoubleCaret) {
                    self.pos += 1;
                    let dt_token = self.next()?;
                    Datatype::from_iri(&self.iri_from(&dt_token)?)
                } else {
                    Datatype::String
                };
                let lit = TypedLiteral::new(value.clone(), datatype)
                    .map_err(|e| self.error_at(&token, format!("malformed literal: {e}")))?;
                Object::Literal(lit)
            }
            Tok::Integer(s) => Object::Literal(TypedLiteral {
                lexical: s.clone(),
                datatype: Datatype::Integer,
            }),
            Tok::Decimal(s) => Object::Literal(TypedLiteral {
                lexical: s.clone(),
                datatype: Datatype::Decimal,
            }),
            Tok::Boolean(b) => Object::Literal(TypedLiteral {
                lexical: b.to_string(),
                datatype: Datatype::Boolean,
            }),
            Tok::RBracket => return Err(self.error_at(&token, "unbalanced `]`")),
            _ => return Err(self.error_at(&token, "expected object")),
        };
        self.graph.triples.push(Triple {
            subject: subject.clone(),
            predicate: predicate.clone(),
            object,
            loc: token.loc,
            offset: token.offset,
        });
        Ok(())
    }
}
