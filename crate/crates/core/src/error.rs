use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::ast::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub span: Span,
    pub found: String,
    pub expected: Vec<String>,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at {}: {}", self.span, self.found)?;
        if !self.expected.is_empty() {
            f.write_str(", expected ")?;
            for (i, e) in self.expected.iter().enumerate() {
                if i > 0 {
                    f.write_str(" or ")?;
                }
                f.write_str(e)?;
            }
        }
        Ok(())
    }
}

impl core::error::Error for SyntaxError {}

/// Failure to turn source text into a resolved, well-typed program.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unresolved name `{name}` at {span}")]
    Resolve { name: String, span: Span },
    #[error("type error at {span}: found {found}, expected {expected}")]
    Type { span: Span, found: String, expected: String },
}

impl ParseError {
    pub fn span(&self) -> Span {
        match self {
            ParseError::Syntax(e) => e.span,
            ParseError::Resolve { span, .. } | ParseError::Type { span, .. } => *span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExtractError {
    #[error("entry function `{0}` is not declared")]
    EntryNotFound(String),
    #[error("symbolic function `{0}` is not declared")]
    CalleeNotFound(String),
    #[error("max_paths must be at least 1")]
    InvalidConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("no paths to build a tree from")]
    Empty,
    #[error("paths {0} and {1} have identical step sequences")]
    DuplicatePath(u32, u32),
    #[error("unknown path {0}")]
    UnknownPath(u32),
    #[error("malformed tree document: {0}")]
    Malformed(String),
}

/// Problems with a textual test such as `tutorial(1, 6, 0)`.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("test calls `{found}` but the entry function is `{expected}`")]
    WrongFunction { found: String, expected: String },
    #[error("`{function}` takes {expected} arguments, test passes {found}")]
    Arity { function: String, expected: usize, found: usize },
    #[error("argument {index} has type {found}, expected {expected}")]
    ArgType { index: usize, found: String, expected: String },
}

/// Anything that can go wrong between source text and a built tree.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}
