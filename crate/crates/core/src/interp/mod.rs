//! Reference interpreter with dynamic safety checks and optional leakage
//! instrumentation.

mod exec;
mod lower;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::ir::{Loc, Stmt, TypedProgram, VTy};
use crate::isa::VectorMode;
use crate::mem::Memory;
use crate::word::{Width, Word};

use lower::{LFn, Lowerer};

pub const DEFAULT_BUDGET: u64 = 100_000_000;

/// A stack array: a private byte buffer with a declared element width.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrayBuf {
    pub elem: Width,
    pub bytes: Vec<u8>,
    pub init: Vec<bool>,
}

impl ArrayBuf {
    pub fn new(elem: Width, len: usize) -> ArrayBuf {
        let n = len * elem.bytes();
        ArrayBuf {
            elem,
            bytes: vec![0; n],
            init: vec![false; n],
        }
    }

    pub fn from_words(elem: Width, words: &[Word]) -> ArrayBuf {
        let mut bytes = Vec::new();
        for w in words {
            bytes.extend(w.zext(elem).to_le_bytes());
        }
        let init = vec![true; bytes.len()];
        ArrayBuf { elem, bytes, init }
    }

    pub fn len(&self) -> usize {
        self.bytes.len() / self.elem.bytes()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    /// Element `i`, if fully initialized.
    pub fn get(&self, i: usize) -> Option<Word> {
        let b = self.elem.bytes();
        let r = i * b..(i + 1) * b;
        self.init
            .get(r.clone())?
            .iter()
            .all(|x| *x)
            .then(|| Word::from_le_bytes(self.elem, &self.bytes[r]))
    }

    pub fn words(&self) -> Option<Vec<Word>> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Val {
    #[default]
    Undef,
    Bool(bool),
    Int(i128),
    Word(Word),
    Arr(Box<ArrayBuf>),
}

impl Val {
    pub fn u64(v: u64) -> Val {
        Val::Word(Word::from_u64(Width::W64, v))
    }

    pub fn as_word(&self) -> Option<Word> {
        match self {
            Val::Word(w) => Some(*w),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&ArrayBuf> {
        match self {
            Val::Arr(a) => Some(a),
            _ => None,
        }
    }

    pub fn has_type(&self, t: VTy) -> bool {
        match (self, t) {
            (Val::Bool(_), VTy::Bool) | (Val::Int(_), VTy::Int) => true,
            (Val::Word(w), VTy::Word(tw)) => w.width() == tw,
            (Val::Arr(a), VTy::Array(w, n)) => a.elem == w && a.len() == n,
            _ => false,
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Undef => write!(f, "undef"),
            Val::Bool(b) => write!(f, "{b}"),
            Val::Int(n) => write!(f, "{n}"),
            Val::Word(w) => write!(f, "{w}"),
            Val::Arr(a) => {
                let parts: Vec<String> = (0..a.len())
                    .map(|i| {
                        a.get(i)
                            .map(|w| w.to_string())
                            .unwrap_or_else(|| "undef".into())
                    })
                    .collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}

/// One observable event of an instrumented execution.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LeakEvent {
    /// Memory addresses and array indices accessed by one side of a
    /// statement, in evaluation order.
    Addr(Vec<u64>),
    /// Outcome of a branch or loop condition.
    Branch(bool),
    /// Iteration count of a counted loop.
    For(u64),
    /// Operands of a variable-time instruction.
    Op(Vec<u64>),
}

impl fmt::Display for LeakEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &[u64]| {
            v.iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join("; ")
        };
        match self {
            LeakEvent::Addr(v) => write!(f, "LeakAddr [{}]", list(v)),
            LeakEvent::Branch(b) => write!(f, "LeakBranch {b}"),
            LeakEvent::For(n) => write!(f, "LeakFor {n}"),
            LeakEvent::Op(v) => write!(f, "LeakOp [{}]", list(v)),
        }
    }
}

pub type LeakTrace = Vec<LeakEvent>;

/// A memory access performed by an execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemAccess {
    pub addr: u64,
    pub len: u64,
    pub write: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SafetyErrorKind {
    DivByZero,
    DivOverflow,
    OutOfBoundsArray { var: String, index: i128 },
    UninitializedUse(String),
    UninitializedRead(u64),
    OutOfRegion(u64),
    BudgetExhausted,
    IntOverflow,
    ModeSwitch,
    BadArguments(String),
}

impl fmt::Display for SafetyErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SafetyErrorKind::DivByZero => write!(f, "division by zero"),
            SafetyErrorKind::DivOverflow => write!(f, "division overflow"),
            SafetyErrorKind::OutOfBoundsArray { var, index } => {
                write!(f, "index {index} out of bounds for `{var}`")
            }
            SafetyErrorKind::UninitializedUse(x) => write!(f, "use of uninitialized `{x}`"),
            SafetyErrorKind::UninitializedRead(a) => {
                write!(f, "read of uninitialized memory at {a:#x}")
            }
            SafetyErrorKind::OutOfRegion(a) => {
                write!(f, "access at {a:#x} outside every valid region")
            }
            SafetyErrorKind::BudgetExhausted => write!(f, "step budget exhausted"),
            SafetyErrorKind::IntOverflow => write!(f, "compile-time integer overflow"),
            SafetyErrorKind::ModeSwitch => write!(f, "vector mode changed during a run"),
            SafetyErrorKind::BadArguments(m) => write!(f, "bad arguments: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{func}:{loc}: {kind}")]
pub struct SafetyError {
    pub kind: SafetyErrorKind,
    pub func: String,
    pub loc: Loc,
}

#[derive(Debug, Clone, Copy)]
pub struct Options {
    pub budget: u64,
    pub mode: VectorMode,
    pub trace: bool,
    pub log_memory: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            budget: DEFAULT_BUDGET,
            mode: VectorMode::OpsV,
            trace: false,
            log_memory: false,
        }
    }
}

impl Options {
    pub fn traced() -> Options {
        Options {
            trace: true,
            ..Options::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub results: Vec<Val>,
    pub memory: Memory,
    pub trace: LeakTrace,
    pub accesses: Vec<MemAccess>,
    pub steps: u64,
}

/// Execution state of one function activation, for statement-level
/// stepping.
#[derive(Debug, Clone)]
pub struct ExecState {
    pub func: String,
    pub env: HashMap<String, Val>,
    pub memory: Memory,
    pub budget: u64,
    pub trace: LeakTrace,
    mode: VectorMode,
    steps: u64,
}

impl ExecState {
    pub fn mode(&self) -> VectorMode {
        self.mode
    }

    /// Selects the vector semantics; only allowed before the first step.
    pub fn set_vector_mode(&mut self, mode: VectorMode) -> Result<(), SafetyError> {
        if self.steps > 0 && mode != self.mode {
            return Err(SafetyError {
                kind: SafetyErrorKind::ModeSwitch,
                func: self.func.clone(),
                loc: Loc::default(),
            });
        }
        self.mode = mode;
        Ok(())
    }

    pub fn get(&self, var: &str) -> Option<&Val> {
        self.env.get(var)
    }
}

/// A program prepared for execution.
pub struct Machine {
    tp: TypedProgram,
    fns: Vec<LFn>,
    index: HashMap<String, usize>,
}

impl Machine {
    pub fn new(tp: &TypedProgram) -> Machine {
        let fds: Vec<_> = tp.program.functions().collect();
        let index: HashMap<String, usize> = fds
            .iter()
            .enumerate()
            .map(|(i, f)| (f.name.clone(), i))
            .collect();
        let lw = Lowerer {
            tp,
            fn_index: &index,
        };
        let fns = fds
            .iter()
            .map(|f| lw.function(f, &tp.fns[&f.name]))
            .collect();
        Machine {
            tp: tp.clone(),
            fns,
            index,
        }
    }

    pub fn program(&self) -> &TypedProgram {
        &self.tp
    }

    pub fn has_function(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    fn entry(&self, name: &str) -> Result<usize, SafetyError> {
        self.index.get(name).copied().ok_or_else(|| SafetyError {
            kind: SafetyErrorKind::BadArguments(format!("no function `{name}`")),
            func: name.to_string(),
            loc: Loc::default(),
        })
    }

    pub fn run(
        &self,
        entry: &str,
        args: Vec<Val>,
        memory: Memory,
        opts: Options,
    ) -> Result<Outcome, SafetyError> {
        let fi = self.entry(entry)?;
        let mut st = exec::Run::new(memory, opts);
        let results = self
            .call(&mut st, fi, args)
            .map_err(|(kind, loc)| SafetyError {
                kind,
                func: st.err_fn.clone().unwrap_or_else(|| entry.to_string()),
                loc,
            })?;
        Ok(Outcome {
            results,
            memory: st.mem,
            trace: st.trace,
            accesses: st.accesses,
            steps: opts.budget - st.budget,
        })
    }

    /// Prepares an activation of `entry` for statement-level stepping.
    pub fn state(
        &self,
        entry: &str,
        args: Vec<Val>,
        memory: Memory,
    ) -> Result<ExecState, SafetyError> {
        let fi = self.entry(entry)?;
        let f = &self.fns[fi];
        let env = self.bind(f, args).map_err(|kind| SafetyError {
            kind,
            func: entry.into(),
            loc: Loc::default(),
        })?;
        Ok(ExecState {
            func: entry.to_string(),
            env: f.slot_names.iter().cloned().zip(env).collect(),
            memory,
            budget: DEFAULT_BUDGET,
            trace: Vec::new(),
            mode: VectorMode::default(),
            steps: 0,
        })
    }

    /// Executes one statement of the state's function.
    pub fn step(&self, s: &mut ExecState, stmt: &Stmt) -> Result<(), SafetyError> {
        let fi = self.entry(&s.func)?;
        let f = &self.fns[fi];
        let fn_index = &self.index;
        let lw = Lowerer {
            tp: &self.tp,
            fn_index,
        };
        let checked =
            crate::ir::typecheck::check_stmt(&self.tp, &s.func, stmt).map_err(|e| SafetyError {
                kind: SafetyErrorKind::BadArguments(e.msg),
                func: s.func.clone(),
                loc: e.loc,
            })?;
        let Some(ls) = lw.stmt(f, &checked) else {
            return Ok(());
        };
        let mut env: Vec<Val> = f
            .slot_names
            .iter()
            .map(|n| s.env.get(n).cloned().unwrap_or_default())
            .collect();
        let opts = Options {
            budget: s.budget,
            mode: s.mode,
            trace: true,
            log_memory: false,
        };
        let mut run = exec::Run::new(std::mem::take(&mut s.memory), opts);
        let r = self.exec_stmt(&mut run, f, &mut env, &ls);
        s.memory = run.mem;
        s.budget = run.budget;
        s.trace.extend(run.trace);
        s.steps += 1;
        for (n, v) in f.slot_names.iter().zip(env) {
            s.env.insert(n.clone(), v);
        }
        r.map(|_| ()).map_err(|(kind, loc)| SafetyError {
            kind,
            func: s.func.clone(),
            loc,
        })
    }

    fn bind(&self, f: &LFn, args: Vec<Val>) -> Result<Vec<Val>, SafetyErrorKind> {
        if args.len() != f.params.len() {
            return Err(SafetyErrorKind::BadArguments(format!(
                "`{}` expects {} arguments, got {}",
                f.name,
                f.params.len(),
                args.len()
            )));
        }
        let mut env = f.init.clone();
        for ((slot, t), a) in f.params.iter().zip(&f.param_tys).zip(args) {
            if !a.has_type(*t) {
                return Err(SafetyErrorKind::BadArguments(format!(
                    "argument `{}` of `{}` must have type {t}",
                    f.slot_names[*slot as usize], f.name
                )));
            }
            env[*slot as usize] = a;
        }
        Ok(env)
    }
}

#[cfg(test)]
mod tests;
