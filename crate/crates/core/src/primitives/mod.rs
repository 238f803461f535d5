//! Poly1305, ChaCha20 and Gimli: pure specifications, the corpus of DSL
//! implementations, and differential testing along hop chains.

use thiserror::Error;

use crate::interp::SafetyError;
use crate::ir::IrError;
use crate::leakage::HarnessError;
use crate::mem::MemError;

pub mod corpus;
pub mod difftest;
pub mod mutants;
pub mod spec;
pub mod vectors;

pub use corpus::{
    load_dsl_corpus, load_program, program_meta, program_source, ProgramMeta, PROGRAMS,
};
pub use difftest::{
    hop_difftest, standard_chain, Counterexample, DiffReport, Hop, HopChain, HopExec, PairReport,
    PrimInput, Shape,
};
pub use spec::{
    chacha20_block, chacha20_xor, clamp, gimli, poly1305, poly1305_spec, qround, ChaChaState,
    GimliState, Poly1305Key,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrimError {
    #[error("{what} must be {want} bytes, got {got}")]
    Length {
        what: &'static str,
        want: usize,
        got: usize,
    },
    #[error("unknown corpus program `{0}`")]
    UnknownProgram(String),
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("corpus program `{name}`: {err}")]
    Corpus { name: String, err: IrError },
    #[error("malformed vector file {file}: {msg}")]
    Vector { file: String, msg: String },
    #[error("unknown shape `{0}`")]
    UnknownShape(String),
    #[error("empty hop chain")]
    EmptyChain,
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Memory(#[from] MemError),
    #[error(transparent)]
    Run(#[from] SafetyError),
}

#[cfg(test)]
mod tests;
