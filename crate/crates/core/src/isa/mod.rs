//! Instruction descriptors.
//!
//! Each instruction is described once: where its sources and destinations
//! live, their types, and a total semantic function over typed values.
//! Vector instructions carry two semantics: a lane-wise one and a
//! whole-word one. Adding an instruction means adding one [`Descriptor`].

mod scalar;
mod vector;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, LazyLock};

use thiserror::Error;

use crate::word::{Width, Word};

/// Status flags modelled by the descriptors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flag {
    OF,
    CF,
    SF,
    PF,
    ZF,
}

impl Flag {
    pub const ALL: [Flag; 5] = [Flag::OF, Flag::CF, Flag::SF, Flag::PF, Flag::ZF];
}

/// Implicit registers used by some instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reg {
    RAX,
    RDX,
}

/// Location of an instruction argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArgLoc {
    /// A status flag.
    F(Flag),
    /// An implicit register.
    R(Reg),
    /// Explicit operand number `idx`, of the given width.
    E(Width, usize),
    /// An explicit boolean condition operand.
    C(usize),
}

impl fmt::Display for ArgLoc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgLoc::F(fl) => write!(f, "F {fl:?}"),
            ArgLoc::R(r) => write!(f, "R {r:?}"),
            ArgLoc::E(w, i) => write!(f, "E {} {i}", w.bits()),
            ArgLoc::C(i) => write!(f, "C {i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArgTy {
    Bool,
    Word(Width),
}

impl fmt::Display for ArgTy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgTy::Bool => write!(f, "bool"),
            ArgTy::Word(w) => write!(f, "{w}"),
        }
    }
}

/// Shape of an explicit operand in the assembly encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperandKind {
    /// Register or memory operand.
    Oprd,
    /// Register only.
    Reg,
    /// 8-bit immediate.
    Imm8,
    /// Condition code.
    Cond,
}

/// A flag value; instructions may leave flags undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FlagValue {
    False,
    True,
    Undefined,
}

impl From<bool> for FlagValue {
    fn from(b: bool) -> Self {
        if b {
            FlagValue::True
        } else {
            FlagValue::False
        }
    }
}

/// A typed instruction argument or result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IValue {
    Word(Word),
    Flag(FlagValue),
}

impl IValue {
    pub fn word(&self) -> Result<Word, IsaError> {
        match self {
            IValue::Word(w) => Ok(*w),
            IValue::Flag(_) => Err(IsaError::BadArgument("expected a word".into())),
        }
    }

    pub fn flag(&self) -> Result<bool, IsaError> {
        match self {
            IValue::Flag(FlagValue::True) => Ok(true),
            IValue::Flag(FlagValue::False) => Ok(false),
            IValue::Flag(FlagValue::Undefined) => Err(IsaError::UndefinedFlag),
            IValue::Word(_) => Err(IsaError::BadArgument("expected a flag".into())),
        }
    }

    pub fn ty(&self) -> ArgTy {
        match self {
            IValue::Word(w) => ArgTy::Word(w.width()),
            IValue::Flag(_) => ArgTy::Bool,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsaError {
    #[error("division by zero")]
    DivByZero,
    #[error("quotient does not fit the destination")]
    DivOverflow,
    #[error("read of an undefined flag")]
    UndefinedFlag,
    #[error("{0}")]
    BadArgument(String),
    #[error("unknown instruction `{0}`")]
    Unknown(String),
    #[error("invalid descriptor `{name}`: {msg}")]
    InvalidDescriptor { name: String, msg: String },
}

pub type SemFn = Arc<dyn Fn(&[IValue]) -> Result<Vec<IValue>, IsaError> + Send + Sync>;

/// Which semantics of vector instructions the interpreter uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VectorMode {
    /// Lane-by-lane semantics.
    Ops,
    /// Whole-word semantics.
    #[default]
    OpsV,
}

/// The two semantics of a vector instruction.
#[derive(Clone)]
pub struct VectorSem {
    /// Lane view of each source; `None` for scalar arguments such as
    /// immediates.
    pub lane_views: Vec<Option<Width>>,
    /// Whole-word semantics. The lane-wise semantics is
    /// [`Descriptor::semantics`].
    pub opsv: SemFn,
}

#[derive(Clone)]
pub struct Descriptor {
    /// Intrinsic name, without the leading `#`.
    pub name: String,
    /// Assembly mnemonic emitted for the instruction.
    pub mnemonic: String,
    pub sources: Vec<ArgLoc>,
    pub dests: Vec<ArgLoc>,
    pub src_types: Vec<ArgTy>,
    pub dst_types: Vec<ArgTy>,
    pub operands: Vec<OperandKind>,
    pub semantics: SemFn,
    pub vector: Option<VectorSem>,
    pub reads_memory: bool,
    pub writes_memory: bool,
    /// Execution time depends on operand values.
    pub variable_time: bool,
}

impl fmt::Debug for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Descriptor")
            .field("name", &self.name)
            .field("sources", &self.sources)
            .field("dests", &self.dests)
            .finish_non_exhaustive()
    }
}

fn locs(v: &[ArgLoc]) -> String {
    let parts: Vec<String> = v.iter().map(|l| l.to_string()).collect();
    format!("[:: {}]", parts.join("; "))
}

impl Descriptor {
    pub fn is_vector(&self) -> bool {
        self.vector.is_some()
    }

    /// Runs the descriptor with lane-wise semantics.
    pub fn exec(&self, args: &[IValue]) -> Result<Vec<IValue>, IsaError> {
        self.exec_mode(args, VectorMode::Ops)
    }

    /// Runs the descriptor; `mode` selects the vector semantics.
    pub fn exec_mode(&self, args: &[IValue], mode: VectorMode) -> Result<Vec<IValue>, IsaError> {
        if args.len() != self.src_types.len() {
            return Err(IsaError::BadArgument(format!(
                "{} expects {} arguments, got {}",
                self.name,
                self.src_types.len(),
                args.len()
            )));
        }
        for (i, (a, t)) in args.iter().zip(&self.src_types).enumerate() {
            if a.ty() != *t {
                return Err(IsaError::BadArgument(format!(
                    "{} argument {i}: expected {t}, got {}",
                    self.name,
                    a.ty()
                )));
            }
        }
        match (&self.vector, mode) {
            (Some(v), VectorMode::OpsV) => (v.opsv)(args),
            _ => (self.semantics)(args),
        }
    }

    /// Checks internal consistency.
    pub fn validate(&self) -> Result<(), IsaError> {
        let bad = |msg: String| {
            Err(IsaError::InvalidDescriptor {
                name: self.name.clone(),
                msg,
            })
        };
        if self.sources.len() != self.src_types.len() {
            return bad("source locations and types differ in length".into());
        }
        if self.dests.len() != self.dst_types.len() {
            return bad("destination locations and types differ in length".into());
        }
        let mut explicit = Vec::new();
        for (loc, ty) in self
            .sources
            .iter()
            .zip(&self.src_types)
            .chain(self.dests.iter().zip(&self.dst_types))
        {
            match (loc, ty) {
                (ArgLoc::F(_) | ArgLoc::C(_), ArgTy::Bool) => {}
                (ArgLoc::R(_), ArgTy::Word(_)) => {}
                (ArgLoc::E(w, _), ArgTy::Word(t)) if w == t => {}
                _ => return bad(format!("location {loc} has type {ty}")),
            }
            if let ArgLoc::E(_, i) | ArgLoc::C(i) = loc {
                explicit.push(*i);
            }
        }
        explicit.sort();
        explicit.dedup();
        if explicit.iter().enumerate().any(|(k, i)| k != *i)
            || explicit.len() != self.operands.len()
        {
            return bad("explicit operand indices must cover 0..arity".into());
        }
        if let Some(v) = &self.vector {
            if v.lane_views.len() != self.sources.len() {
                return bad("one lane view per source is required".into());
            }
        }
        Ok(())
    }

    /// One-line summary: `name  sources -> dests`.
    pub fn summary(&self) -> String {
        let kind = if self.is_vector() { "vector" } else { "scalar" };
        format!(
            "{:<24} {:<8} {} -> {}  ({})",
            self.name,
            kind,
            locs(&self.sources),
            locs(&self.dests),
            self.mnemonic
        )
    }
}

/// A name-indexed set of descriptors.
#[derive(Clone, Default)]
pub struct Registry {
    descs: Vec<Arc<Descriptor>>,
    by_name: HashMap<String, usize>,
}

static STANDARD: LazyLock<Registry> = LazyLock::new(|| {
    let mut r = Registry::new();
    for d in scalar::descriptors()
        .into_iter()
        .chain(vector::descriptors())
    {
        r.register(d).expect("standard descriptor is valid");
    }
    r
});

impl Registry {
    pub fn new() -> Registry {
        Registry::default()
    }

    /// The built-in instruction set.
    pub fn standard() -> &'static Registry {
        &STANDARD
    }

    /// Validates and adds a descriptor; names must be unique.
    pub fn register(&mut self, d: Descriptor) -> Result<(), IsaError> {
        d.validate()?;
        if self.by_name.contains_key(&d.name) {
            return Err(IsaError::InvalidDescriptor {
                name: d.name.clone(),
                msg: "duplicate name".into(),
            });
        }
        self.by_name.insert(d.name.clone(), self.descs.len());
        self.descs.push(Arc::new(d));
        Ok(())
    }

    /// Looks up a descriptor; a leading `#` is ignored.
    pub fn lookup(&self, name: &str) -> Option<&Arc<Descriptor>> {
        let name = name.strip_prefix('#').unwrap_or(name);
        self.by_name.get(name).map(|&i| &self.descs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<Descriptor>> {
        self.descs.iter()
    }

    pub fn len(&self) -> usize {
        self.descs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descs.is_empty()
    }
}

/// Looks up a descriptor in the standard registry.
pub fn lookup(name: &str) -> Option<&'static Arc<Descriptor>> {
    Registry::standard().lookup(name)
}

/// The MUL descriptor at the given width.
pub fn mul_descriptor(width: Width) -> &'static Arc<Descriptor> {
    lookup(&format!("x86_MUL_{}", width.bits())).expect("MUL is defined for scalar widths")
}

/// Runs a vector descriptor with both semantics and reports whether they
/// agree on `args`.
pub fn ops_opsv_agree(d: &Descriptor, args: &[IValue]) -> Result<bool, IsaError> {
    let a = d.exec_mode(args, VectorMode::Ops)?;
    let b = d.exec_mode(args, VectorMode::OpsV)?;
    Ok(a == b)
}

pub(crate) fn w(v: Word) -> IValue {
    IValue::Word(v)
}

pub(crate) fn fl(b: bool) -> IValue {
    IValue::Flag(b.into())
}

pub(crate) const UNDEF: IValue = IValue::Flag(FlagValue::Undefined);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_registry_validates() {
        let r = Registry::standard();
        assert!(r.len() > 40);
        for d in r.iter() {
            d.validate().unwrap();
        }
    }

    #[test]
    fn mul_shape() {
        let d = mul_descriptor(Width::W64);
        assert_eq!(
            locs(&d.dests),
            "[:: F OF; F CF; F SF; F PF; F ZF; R RDX; R RAX]"
        );
        assert_eq!(locs(&d.sources), "[:: R RAX; E 64 0]");
        assert_eq!(d.operands, vec![OperandKind::Oprd]);
        let out = d
            .exec(&[
                w(Word::from_u64(Width::W64, u64::MAX)),
                w(Word::from_u64(Width::W64, 2)),
            ])
            .unwrap();
        assert_eq!(out.len(), 7);
        assert_eq!(out[5], w(Word::from_u64(Width::W64, 1)));
        assert_eq!(out[6], w(Word::from_u64(Width::W64, u64::MAX - 1)));
        assert_eq!(out[0], fl(true));
    }

    #[test]
    fn lookup_strips_hash() {
        assert!(lookup("#x86_MUL_64").is_some());
        assert!(lookup("x86_NOPE").is_none());
    }

    #[test]
    fn duplicate_rejected() {
        let mut r = Registry::new();
        let d = (**mul_descriptor(Width::W32)).clone();
        r.register(d.clone()).unwrap();
        assert!(r.register(d).is_err());
    }
}
