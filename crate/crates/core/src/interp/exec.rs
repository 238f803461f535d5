//! Statement and expression evaluation.

use num_bigint::BigInt;

use super::lower::{Desc, LFn, LStmt, LE, LL, LS};
use super::{LeakEvent, Machine, MemAccess, Options, SafetyErrorKind as K, Val};
use crate::ir::typecheck::{int_binop, veclit_word};
use crate::ir::{BinOp, Loc, UnOp};
use crate::isa::{FlagValue, IValue, IsaError, VectorMode};
use crate::mem::{MemError, Memory};
use crate::word::{Width, Word};

pub(crate) struct Run {
    pub mem: Memory,
    pub budget: u64,
    pub mode: VectorMode,
    pub tracing: bool,
    pub logging: bool,
    pub trace: Vec<LeakEvent>,
    pub accesses: Vec<MemAccess>,
    pub err_fn: Option<String>,
    side: Vec<u64>,
    optime: Vec<u64>,
}

impl Run {
    pub fn new(mem: Memory, opts: Options) -> Run {
        Run {
            mem,
            budget: opts.budget,
            mode: opts.mode,
            tracing: opts.trace,
            logging: opts.log_memory,
            trace: Vec::new(),
            accesses: Vec::new(),
            err_fn: None,
            side: Vec::new(),
            optime: Vec::new(),
        }
    }

    fn tick(&mut self) -> Result<(), K> {
        if self.budget == 0 {
            return Err(K::BudgetExhausted);
        }
        self.budget -= 1;
        Ok(())
    }

    fn leak(&mut self, a: u64) {
        if self.tracing {
            self.side.push(a);
        }
    }

    /// Ends one side of a statement: its accesses become one event.
    fn flush(&mut self) {
        if !self.tracing {
            return;
        }
        if !self.side.is_empty() {
            self.trace
                .push(LeakEvent::Addr(std::mem::take(&mut self.side)));
        }
        if !self.optime.is_empty() {
            self.trace
                .push(LeakEvent::Op(std::mem::take(&mut self.optime)));
        }
    }

    fn event(&mut self, e: LeakEvent) {
        if self.tracing {
            self.trace.push(e);
        }
    }

    fn log(&mut self, addr: u64, len: usize, write: bool) {
        if self.logging {
            self.accesses.push(MemAccess {
                addr,
                len: len as u64,
                write,
            });
        }
    }
}

fn mem_err(e: MemError) -> K {
    match e {
        MemError::OutOfRegion(a) => K::OutOfRegion(a),
        MemError::Uninitialized(a) => K::UninitializedRead(a),
        other => K::BadArguments(other.to_string()),
    }
}

fn isa_err(e: IsaError) -> K {
    match e {
        IsaError::DivByZero => K::DivByZero,
        IsaError::DivOverflow => K::DivOverflow,
        IsaError::UndefinedFlag => K::UninitializedUse("flag".into()),
        other => K::BadArguments(other.to_string()),
    }
}

pub(crate) enum Flow {
    Normal,
    Return(Vec<Val>),
}

type SR<T> = Result<T, (K, Loc)>;

enum Target {
    Ignore,
    Var(u32),
    Arr { slot: u32, off: usize },
    Mem(u64),
}

fn index_of(v: &Val) -> Result<i128, K> {
    match v {
        Val::Int(n) => Ok(*n),
        Val::Word(w) => Ok(w.low_u64() as i128),
        _ => Err(K::BadArguments("array index is not an integer".into())),
    }
}

fn word_of(v: Val) -> Result<Word, K> {
    match v {
        Val::Word(w) => Ok(w),
        other => Err(K::BadArguments(format!("expected a word, found {other}"))),
    }
}

fn shift_count(v: &Val, w: Width) -> u32 {
    let mask = w.bits() as u64 - 1;
    let c = match v {
        Val::Int(n) => *n as u64,
        Val::Word(c) => c.low_u64(),
        _ => 0,
    };
    (c & mask) as u32
}

fn signed_divrem(a: &Word, b: &Word) -> Result<(Word, Word), K> {
    if b.is_zero() {
        return Err(K::DivByZero);
    }
    let w = a.width();
    let (x, y) = (a.to_sint(), b.to_sint());
    let q: BigInt = &x / &y;
    let r: BigInt = &x % &y;
    let q_w = Word::of_int(w, &q);
    if q_w.to_sint() != q {
        return Err(K::DivOverflow);
    }
    Ok((q_w, Word::of_int(w, &r)))
}

fn word_binop(op: BinOp, signed: bool, a: Word, r: &Val) -> Result<Val, K> {
    let w = a.width();
    if op.is_shift() {
        let n = shift_count(r, w);
        let v = match op {
            BinOp::Shl => a.shl_wrapping(n),
            BinOp::Shr if signed => a.sar(n).expect("masked count"),
            BinOp::Shr => a.shr_wrapping(n),
            BinOp::Rol => a.rol(n).expect("masked count"),
            _ => a.ror(n).expect("masked count"),
        };
        return Ok(Val::Word(v));
    }
    let b = match r {
        Val::Word(b) => *b,
        other => return Err(K::BadArguments(format!("expected a word, found {other}"))),
    };
    Ok(match op {
        BinOp::Add => Val::Word(a.add(&b)),
        BinOp::Sub => Val::Word(a.sub(&b)),
        BinOp::Mul => Val::Word(a.mul(&b)),
        BinOp::Div | BinOp::Rem => {
            let (q, m) = if signed {
                signed_divrem(&a, &b)?
            } else {
                a.udivrem(&b).map_err(|_| K::DivByZero)?
            };
            Val::Word(if op == BinOp::Div { q } else { m })
        }
        BinOp::And => Val::Word(a.and(&b)),
        BinOp::Or => Val::Word(a.or(&b)),
        BinOp::Xor => Val::Word(a.xor(&b)),
        BinOp::Eq => Val::Bool(a == b),
        BinOp::Ne => Val::Bool(a != b),
        BinOp::Lt => Val::Bool(if signed { a.slt(&b) } else { a.ult(&b) }),
        BinOp::Le => Val::Bool(if signed { a.sle(&b) } else { a.ule(&b) }),
        BinOp::Gt => Val::Bool(if signed { b.slt(&a) } else { b.ult(&a) }),
        BinOp::Ge => Val::Bool(if signed { b.sle(&a) } else { b.ule(&a) }),
        _ => {
            return Err(K::BadArguments(format!(
                "operator `{}` on words",
                op.symbol()
            )))
        }
    })
}

impl Machine {
    pub(crate) fn call(&self, r: &mut Run, fi: usize, args: Vec<Val>) -> SR<Vec<Val>> {
        let f = &self.fns[fi];
        let mut env = self.bind(f, args).map_err(|k| (k, Loc::default()))?;
        match self.exec_block(r, f, &mut env, &f.body)? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(Vec::new()),
        }
    }

    fn exec_block(&self, r: &mut Run, f: &LFn, env: &mut [Val], body: &[LStmt]) -> SR<Flow> {
        for s in body {
            match self.exec_stmt(r, f, env, s) {
                Ok(Flow::Normal) => {}
                Ok(ret) => return Ok(ret),
                Err(e) => {
                    if r.err_fn.is_none() {
                        r.err_fn = Some(f.name.clone());
                    }
                    return Err(e);
                }
            }
        }
        Ok(Flow::Normal)
    }

    pub(crate) fn exec_stmt(&self, r: &mut Run, f: &LFn, env: &mut [Val], s: &LStmt) -> SR<Flow> {
        let loc = s.loc;
        let at = |k: K| (k, loc);
        r.tick().map_err(at)?;
        match &s.kind {
            LS::Assign { lhs, rhs } => {
                let v = self.eval(r, f, env, rhs).map_err(at)?;
                r.flush();
                let t = self.target(r, f, env, lhs).map_err(at)?;
                r.flush();
                self.store(r, env, t, v).map_err(at)?;
            }
            LS::Intr { lhs, d, args } => {
                let vals = self.intrinsic(r, f, env, d, args).map_err(at)?;
                r.flush();
                self.write_all(r, f, env, lhs, vals).map_err(at)?;
            }
            LS::Call { lhs, f: g, args } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(r, f, env, a).map_err(at)?);
                }
                r.flush();
                let res = self.call(r, *g, vals)?;
                self.write_all(r, f, env, lhs, res).map_err(at)?;
            }
            LS::If { c, t, e } => {
                let b = self.cond(r, f, env, c).map_err(at)?;
                return self.exec_block(r, f, env, if b { t } else { e });
            }
            LS::While { c, body } => loop {
                if !self.cond(r, f, env, c).map_err(at)? {
                    break;
                }
                if let Flow::Return(v) = self.exec_block(r, f, env, body)? {
                    return Ok(Flow::Return(v));
                }
                r.tick().map_err(at)?;
            },
            LS::For {
                var,
                from,
                to,
                down,
                body,
            } => {
                let a = self.int(r, f, env, from).map_err(at)?;
                let b = self.int(r, f, env, to).map_err(at)?;
                r.flush();
                let count = if *down { a - b + 1 } else { b - a + 1 }.max(0);
                r.event(LeakEvent::For(count as u64));
                for k in 0..count {
                    env[*var as usize] = Val::Int(if *down { a - k } else { a + k });
                    if let Flow::Return(v) = self.exec_block(r, f, env, body)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            LS::Return(es) => {
                let mut vals = Vec::with_capacity(es.len());
                for e in es {
                    vals.push(self.eval(r, f, env, e).map_err(at)?);
                }
                r.flush();
                return Ok(Flow::Return(vals));
            }
        }
        Ok(Flow::Normal)
    }

    fn cond(&self, r: &mut Run, f: &LFn, env: &[Val], c: &LE) -> Result<bool, K> {
        let v = self.eval(r, f, env, c)?;
        r.flush();
        let Val::Bool(b) = v else {
            return Err(K::BadArguments("condition is not a boolean".into()));
        };
        r.event(LeakEvent::Branch(b));
        Ok(b)
    }

    fn int(&self, r: &mut Run, f: &LFn, env: &[Val], e: &LE) -> Result<i128, K> {
        match self.eval(r, f, env, e)? {
            Val::Int(n) => Ok(n),
            other => Err(K::BadArguments(format!(
                "loop bound {other} is not an integer"
            ))),
        }
    }

    fn write_all(
        &self,
        r: &mut Run,
        f: &LFn,
        env: &mut [Val],
        lhs: &[LL],
        vals: Vec<Val>,
    ) -> Result<(), K> {
        let mut ts = Vec::with_capacity(lhs.len());
        for l in lhs {
            ts.push(self.target(r, f, env, l)?);
        }
        r.flush();
        for (t, v) in ts.into_iter().zip(vals) {
            self.store(r, env, t, v)?;
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn array_offset(
        &self,
        r: &mut Run,
        f: &LFn,
        env: &[Val],
        arr: u32,
        w: Width,
        unit: u32,
        idx: &LE,
    ) -> Result<usize, K> {
        let i = index_of(&self.eval(r, f, env, idx)?)?;
        r.leak(i as u64);
        let Val::Arr(buf) = &env[arr as usize] else {
            return Err(K::UninitializedUse(f.slot_names[arr as usize].clone()));
        };
        let off = i.checked_mul(unit as i128);
        match off {
            Some(o) if i >= 0 && o + w.bytes() as i128 <= buf.bytes.len() as i128 => Ok(o as usize),
            _ => Err(K::OutOfBoundsArray {
                var: f.slot_names[arr as usize].clone(),
                index: i,
            }),
        }
    }

    fn target(&self, r: &mut Run, f: &LFn, env: &[Val], l: &LL) -> Result<Target, K> {
        Ok(match l {
            LL::Ignore => Target::Ignore,
            LL::Var(s) => Target::Var(*s),
            LL::Set { arr, w, unit, idx } => Target::Arr {
                slot: *arr,
                off: self.array_offset(r, f, env, *arr, *w, *unit, idx)?,
            },
            LL::Store { addr, .. } => {
                let a = word_of(self.eval(r, f, env, addr)?)?.low_u64();
                r.leak(a);
                Target::Mem(a)
            }
        })
    }

    fn store(&self, r: &mut Run, env: &mut [Val], t: Target, v: Val) -> Result<(), K> {
        match t {
            Target::Ignore => {}
            Target::Var(s) => env[s as usize] = v,
            Target::Arr { slot, off } => {
                let w = word_of(v)?;
                let Val::Arr(buf) = &mut env[slot as usize] else {
                    unreachable!("checked array")
                };
                let limbs = w.limbs();
                for i in 0..w.width().bytes() {
                    buf.bytes[off + i] = (limbs[i / 8] >> (8 * (i % 8))) as u8;
                    buf.init[off + i] = true;
                }
            }
            Target::Mem(a) => {
                let w = word_of(v)?;
                r.log(a, w.width().bytes(), true);
                r.mem.store(a, &w).map_err(mem_err)?;
            }
        }
        Ok(())
    }

    fn intrinsic(
        &self,
        r: &mut Run,
        f: &LFn,
        env: &[Val],
        d: &Desc,
        args: &[LE],
    ) -> Result<Vec<Val>, K> {
        let mut iv = Vec::with_capacity(args.len());
        for a in args {
            iv.push(match self.eval(r, f, env, a)? {
                Val::Word(w) => IValue::Word(w),
                Val::Bool(b) => IValue::Flag(b.into()),
                other => return Err(K::BadArguments(format!("bad intrinsic argument {other}"))),
            });
        }
        if d.variable_time && r.tracing {
            for a in &iv {
                if let IValue::Word(w) = a {
                    r.optime.push(w.low_u64());
                }
            }
        }
        let out = d.exec_mode(&iv, r.mode).map_err(isa_err)?;
        Ok(out
            .into_iter()
            .map(|v| match v {
                IValue::Word(w) => Val::Word(w),
                IValue::Flag(FlagValue::True) => Val::Bool(true),
                IValue::Flag(FlagValue::False) => Val::Bool(false),
                IValue::Flag(FlagValue::Undefined) => Val::Undef,
            })
            .collect())
    }

    pub(crate) fn eval(&self, r: &mut Run, f: &LFn, env: &[Val], e: &LE) -> Result<Val, K> {
        Ok(match e {
            LE::Const(v) => v.clone(),
            LE::Var(s) => match &env[*s as usize] {
                Val::Undef => return Err(K::UninitializedUse(f.slot_names[*s as usize].clone())),
                v => v.clone(),
            },
            LE::Get { arr, w, unit, idx } => {
                let off = self.array_offset(r, f, env, *arr, *w, *unit, idx)?;
                let Val::Arr(buf) = &env[*arr as usize] else {
                    unreachable!("checked array")
                };
                let n = w.bytes();
                if !buf.init[off..off + n].iter().all(|b| *b) {
                    let name = &f.slot_names[*arr as usize];
                    return Err(K::UninitializedUse(format!("{name}.[{off}]")));
                }
                Val::Word(Word::from_le_bytes(*w, &buf.bytes[off..off + n]))
            }
            LE::Load { w, addr } => {
                let a = word_of(self.eval(r, f, env, addr)?)?.low_u64();
                r.leak(a);
                r.log(a, w.bytes(), false);
                Val::Word(r.mem.load(a, *w).map_err(mem_err)?)
            }
            LE::Un { op, e } => match (op, self.eval(r, f, env, e)?) {
                (UnOp::Not, Val::Bool(b)) => Val::Bool(!b),
                (UnOp::Not, Val::Word(w)) => Val::Word(w.not()),
                (UnOp::Not, Val::Int(n)) => Val::Int(!n),
                (UnOp::Neg, Val::Word(w)) => Val::Word(w.neg()),
                (UnOp::Neg, Val::Int(n)) => Val::Int(n.checked_neg().ok_or(K::IntOverflow)?),
                (_, other) => return Err(K::BadArguments(format!("bad operand {other}"))),
            },
            LE::Bin {
                op,
                signed,
                l,
                r: re,
            } => {
                let a = self.eval(r, f, env, l)?;
                match (op, &a) {
                    (BinOp::LAnd, Val::Bool(false)) => return Ok(Val::Bool(false)),
                    (BinOp::LOr, Val::Bool(true)) => return Ok(Val::Bool(true)),
                    _ => {}
                }
                let b = self.eval(r, f, env, re)?;
                match (a, b) {
                    (Val::Word(x), b) => word_binop(*op, *signed, x, &b)?,
                    (Val::Int(x), Val::Int(y)) => {
                        if matches!(op, BinOp::Div | BinOp::Rem) && y == 0 {
                            return Err(K::DivByZero);
                        }
                        let v = int_binop(*op, x, y).ok_or(K::IntOverflow)?;
                        if op.is_comparison() {
                            Val::Bool(v != 0)
                        } else {
                            Val::Int(v)
                        }
                    }
                    (Val::Bool(x), Val::Bool(y)) => match op {
                        BinOp::Eq => Val::Bool(x == y),
                        BinOp::Ne => Val::Bool(x != y),
                        BinOp::LAnd | BinOp::LOr => Val::Bool(y),
                        _ => return Err(K::BadArguments("bad boolean operator".into())),
                    },
                    (x, y) => return Err(K::BadArguments(format!("bad operands {x} and {y}"))),
                }
            }
            LE::Vec { d, l, r: re } => {
                let a = word_of(self.eval(r, f, env, l)?)?;
                let b = word_of(self.eval(r, f, env, re)?)?;
                let out = d
                    .exec_mode(&[IValue::Word(a), IValue::Word(b)], r.mode)
                    .map_err(isa_err)?;
                Val::Word(out[0].word().map_err(isa_err)?)
            }
            LE::Cast { to, signed, e } => match self.eval(r, f, env, e)? {
                Val::Word(w) if *signed => Val::Word(w.sext(*to)),
                Val::Word(w) => Val::Word(w.zext(*to)),
                Val::Int(n) => Val::Word(Word::from_i128(*to, n)),
                other => return Err(K::BadArguments(format!("cannot cast {other}"))),
            },
            LE::Intr { d, args } => {
                let mut out = self.intrinsic(r, f, env, d, args)?;
                match out.pop() {
                    Some(Val::Undef) => {
                        return Err(K::UninitializedUse(format!("result of #{}", d.name)))
                    }
                    Some(v) => v,
                    None => return Err(K::BadArguments(format!("#{} has no result", d.name))),
                }
            }
            LE::VecLit { bits, elems } => {
                let mut vals = Vec::with_capacity(elems.len());
                for x in elems {
                    match self.eval(r, f, env, x)? {
                        Val::Int(n) => vals.push(n),
                        other => {
                            return Err(K::BadArguments(format!(
                                "vector lane {other} is not an integer"
                            )))
                        }
                    }
                }
                Val::Word(veclit_word(*bits, &vals).ok_or(K::IntOverflow)?)
            }
        })
    }
}
