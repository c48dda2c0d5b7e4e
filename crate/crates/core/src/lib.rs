//! Path-aware test generation for a small Java-flavored language.
//!
//! The crate is `no_std` (it needs `alloc`). Programs are parsed into an
//! [`ast::Program`], their execution paths are enumerated into linear
//! [`extract::PathVariant`]s whose branch decisions are spelled out as
//! `assertTrue`/`assertFalse` statements, the variants are organized into a
//! prefix-sharing [`tree::SymTree`], and the [`driver`] asks a pluggable
//! generator for one concrete test per path, validating each answer by running
//! the variant in the [`interp`] interpreter.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod ast;
pub mod builtins;
pub mod corpus;
pub mod coverage;
pub mod driver;
pub mod error;
pub mod extract;
pub mod interp;
mod lexer;
pub mod parser;
pub mod pretty;
mod resolve;
pub mod testcase;
pub mod tree;
pub mod value;

pub use analysis::{Analysis, Located};
pub use error::{AnalysisError, ParseError, SyntaxError};
pub use parser::parse;
pub use pretty::pretty_print;
