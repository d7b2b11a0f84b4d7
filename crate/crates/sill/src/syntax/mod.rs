//! Parsing and printing of `.sill` source files.
//!
//! A file holds `type` declarations, `proc` definitions and at most one
//! `system { ... }` manifest that describes the initial configuration.

pub mod format;
pub mod lexer;
mod parser;

use std::collections::BTreeMap;

use crate::process::{Chan, Proc, ProcName, Signature};
use crate::types::{SessionType, TypeDefEnv, TypeName};

/// Byte range into the source text.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    /// 1-based line and column of the start offset.
    pub fn line_col(&self, src: &str) -> (usize, usize) {
        let upto = &src[..self.start.min(src.len())];
        let line = upto.matches('\n').count() + 1;
        let col = upto.rfind('\n').map(|i| upto.len() - i).unwrap_or(upto.len() + 1);
        (line, col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct ParseError {
    pub span: Span,
    pub message: String,
}

/// `x <- spawn P(a, b)` in a manifest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestSpawn {
    pub binder: Chan,
    pub proc: ProcName,
    pub args: Vec<Chan>,
}

/// The `system` block: a spawn prelude and the main process.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub spawns: Vec<ManifestSpawn>,
    pub main: ProcName,
    pub main_args: Vec<Chan>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceFile {
    pub types: TypeDefEnv,
    pub procs: Signature,
    pub system: Option<Manifest>,
}

/// Source positions recorded alongside a [`SourceFile`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Spans {
    pub types: BTreeMap<TypeName, Span>,
    pub proc_headers: BTreeMap<ProcName, Span>,
    /// Per definition, one span per body node in preorder (case branches in
    /// label order), matching [`Proc::children`].
    pub proc_nodes: BTreeMap<ProcName, Vec<Span>>,
    pub system: Option<Span>,
}

pub fn parse(src: &str) -> Result<SourceFile, ParseError> {
    parse_with_spans(src).map(|(sf, _)| sf)
}

pub fn parse_with_spans(src: &str) -> Result<(SourceFile, Spans), ParseError> {
    let toks = lexer::lex(src)?;
    parser::Parser::new(toks, src.len()).file()
}

/// The type definitions of a source text.
pub fn parse_types(src: &str) -> Result<TypeDefEnv, ParseError> {
    parse(src).map(|sf| sf.types)
}

/// A single process term, as written in a definition body.
pub fn parse_proc(src: &str) -> Result<Proc, ParseError> {
    let toks = lexer::lex(src)?;
    parser::Parser::new(toks, src.len()).standalone_proc()
}

/// A single type expression. Payload names stay linear since no
/// environment is available to classify them.
pub fn parse_type(src: &str) -> Result<SessionType, ParseError> {
    let toks = lexer::lex(src)?;
    parser::Parser::new(toks, src.len()).standalone_type()
}
