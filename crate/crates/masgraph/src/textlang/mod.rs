//! The model language, the query language and the abstraction-spec format.
//!
//! Models use a C-like declaration syntax with process templates:
//!
//! ```text
//! const int N = 2;
//! typedef int[1,N] id_t;
//! int[0,N] done;
//! chan go[id_t];
//! process Worker(const id_t id) {
//!     state idle, busy;
//!     init idle;
//!     trans idle -> busy { sync go[id]?; assign done++; };
//! }
//! process Boss {
//!     state s;
//!     init s;
//!     trans s -> s { select w : id_t; sync go[w]!; };
//! }
//! system Worker, Boss;
//! ```

pub mod ast;
mod elaborate;
mod lexer;
mod parser;
mod printer;

use crate::checker::Formula;
use crate::kernel::{AgentGraph, MasGraph, VarDecl};
use ast::{AbsDocument, ModelDocument, NamedQuery, QueryDocument, Span};
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

pub use elaborate::{Env, Sym};
pub(crate) use elaborate::{compile_merge, resolve_location, resolve_place};
pub use lexer::line_col;
pub use printer::{print_abstraction, print_expr, print_query, print_type};

#[derive(Debug, Error, Clone, PartialEq, Serialize)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub col: usize,
    #[serde(skip)]
    pub span: Span,
}

impl ParseError {
    pub(crate) fn at(text: &str, offset: usize, msg: &str) -> ParseError {
        let (line, col) = line_col(text, offset);
        ParseError {
            message: msg.to_string(),
            line,
            col,
            span: Span::new(offset, offset),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeErrorKind {
    Type,
    UnknownName,
    Duplicate,
    SideEffectInGuard,
    UnknownChannel,
    UnboundParameter,
    OutOfDomain,
}

#[derive(Debug, Error, Clone, PartialEq, Serialize)]
#[error("{line}:{col}: {message}")]
pub struct TypeError {
    pub kind: TypeErrorKind,
    pub message: String,
    pub line: usize,
    pub col: usize,
    #[serde(skip)]
    pub span: Span,
}

impl TypeError {
    pub(crate) fn new(kind: TypeErrorKind, text: &str, span: Span, message: String) -> TypeError {
        let (line, col) = line_col(text, span.start);
        TypeError {
            kind,
            message,
            line,
            col,
            span,
        }
    }
}

/// Either stage of loading a text.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadError {
    #[error("syntax error at {0}")]
    Parse(#[from] ParseError),
    #[error("type error at {0}")]
    Type(#[from] TypeError),
}

/// An elaborated model together with the symbol environment needed to
/// compile queries and abstraction specs against it.
#[derive(Clone, Debug)]
pub struct Model {
    pub graph: MasGraph,
    pub env: Arc<Env>,
}

/// A query compiled against a model.
#[derive(Clone, Debug)]
pub struct CompiledQuery {
    pub name: Option<String>,
    pub text: String,
    pub formula: Formula,
}

/// A template instance produced by [`instantiate`].
#[derive(Clone, Debug)]
pub struct Instance {
    pub agent: AgentGraph,
    /// Local variables, prefixed with the instance name.
    pub locals: Vec<VarDecl>,
}

pub fn parse_model(text: &str) -> Result<ModelDocument, ParseError> {
    let mut p = parser::Parser::new(text)?;
    let doc = p.model()?;
    p.finish()?;
    Ok(doc)
}

pub fn parse_query(text: &str) -> Result<QueryDocument, ParseError> {
    let mut p = parser::Parser::new(text)?;
    let doc = p.queries()?;
    p.finish()?;
    Ok(doc)
}

pub fn parse_abstraction(text: &str) -> Result<AbsDocument, ParseError> {
    let mut p = parser::Parser::new(text)?;
    let doc = p.abstraction()?;
    p.finish()?;
    Ok(doc)
}

/// Parse a standalone expression.
pub fn parse_expr(text: &str) -> Result<ast::Expr, ParseError> {
    let mut p = parser::Parser::new(text)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

pub fn pretty_print(doc: &ModelDocument) -> String {
    printer::print_model(doc)
}

pub fn print_queries(doc: &QueryDocument) -> String {
    doc.queries.iter().map(|q| print_query(q) + "\n").collect()
}

/// Elaborate a parsed document. `text` is the source the spans refer to.
pub fn typecheck(doc: &ModelDocument, text: &str) -> Result<Model, TypeError> {
    elaborate::elaborate(doc, text)
}

pub fn load_model(text: &str) -> Result<Model, LoadError> {
    let doc = parse_model(text)?;
    Ok(typecheck(&doc, text)?)
}

/// Instantiate one template of `doc` with explicit actuals.
pub fn instantiate(doc: &ModelDocument, text: &str, template: &str, actuals: &[i32]) -> Result<Instance, TypeError> {
    elaborate::instantiate_one(doc, text, template, actuals)
}

/// Compile a parsed query against a model; `text` is the query source.
pub fn compile_query(model: &Model, q: &NamedQuery, text: &str) -> Result<CompiledQuery, TypeError> {
    elaborate::compile_query(&model.env, q, text)
}

/// Parse and compile every query of a query file.
pub fn load_queries(model: &Model, text: &str) -> Result<Vec<CompiledQuery>, LoadError> {
    let doc = parse_query(text)?;
    let mut out = Vec::new();
    for q in &doc.queries {
        out.push(compile_query(model, q, text)?);
    }
    Ok(out)
}
