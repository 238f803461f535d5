//! The source language: syntax, parsing, printing, type checking and
//! expansion.

pub mod ast;
pub mod expand;
pub mod lexer;
pub mod parser;
pub mod printer;
pub mod typecheck;

use thiserror::Error;

pub use ast::*;
pub use expand::expand;
pub use parser::{parse_expr, parse_program, parse_stmts};
pub use printer::print_program;
pub use typecheck::{typecheck, FnInfo, Sig, TypeError, TypeErrorKind, TypedProgram, VTy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{loc}: {msg}")]
pub struct ParseError {
    pub loc: Loc,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("syntax error at {0}")]
    Parse(#[from] ParseError),
    #[error("type error at {0}")]
    Type(#[from] TypeError),
}

/// Parses and type checks a program.
pub fn load(src: &str) -> Result<TypedProgram, IrError> {
    Ok(typecheck(&parse_program(src)?)?)
}

/// Parses, type checks and expands a program.
pub fn compile(src: &str) -> Result<TypedProgram, IrError> {
    Ok(expand(&load(src)?)?)
}

#[cfg(test)]
mod tests;
