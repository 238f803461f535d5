//! Static safety analysis: symbolic ranges of the memory accessed through
//! each pointer input, plus checks for division by zero, array bounds and
//! initialization.

pub mod domain;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::ir::typecheck::FnInfo;
use crate::ir::*;
use crate::isa;
use crate::word::Width;

pub use domain::{AVal, Itv, Lin};

/// Loop iterations analysed exactly before widening.
pub const UNROLL: usize = 4;
const MAX_ITERATIONS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("unknown function `{0}`")]
    UnknownEntry(String),
    #[error("`{0}` is not a parameter of `{1}`")]
    NotParameter(String, String),
    #[error(transparent)]
    Type(#[from] TypeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FindingKind {
    DivByZero,
    ArrayBounds,
    Uninitialized,
    /// A memory access whose offset has no finite bound.
    UnboundedAccess,
    /// A memory access not derived from a declared pointer.
    UnknownBase,
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FindingKind::DivByZero => "possible division by zero",
            FindingKind::ArrayBounds => "possible out-of-bounds array access",
            FindingKind::Uninitialized => "possibly uninitialized variable",
            FindingKind::UnboundedAccess => "unbounded memory access",
            FindingKind::UnknownBase => "memory access through an unknown base",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub kind: FindingKind,
    pub func: String,
    pub loc: Loc,
    pub msg: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.func, self.loc, self.kind, self.msg)
    }
}

/// Half-open offset range `[lo, hi)` relative to a pointer input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Range {
    pub lo: Option<Lin>,
    pub hi: Option<Lin>,
}

impl Range {
    /// Evaluates the bounds at concrete values of the tracked inputs.
    pub fn eval(&self, env: &BTreeMap<String, i128>) -> (Option<i128>, Option<i128>) {
        let ev = |l: &Lin| {
            l.terms
                .iter()
                .try_fold(l.c, |acc, (v, k)| Some(acc + k * env.get(v)?))
        };
        (self.lo.as_ref().and_then(ev), self.hi.as_ref().and_then(ev))
    }
}

/// Memory calling contract of an entry function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeReport {
    /// Pointers and tracked inputs in parameter order; `None` when the
    /// input is never used as a base.
    pub entries: Vec<(String, Option<Range>)>,
    /// Accesses whose range could not be expressed.
    pub failures: Vec<Finding>,
}

impl RangeReport {
    pub fn range(&self, name: &str) -> Option<&Range> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .and_then(|(_, r)| r.as_ref())
    }

    /// One `range(name) = ...` line per entry.
    pub fn lines(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|(n, r)| match r {
                None => format!("range({n}) = empty"),
                Some(r) => {
                    let lo = r.lo.as_ref().map_or("-inf".to_string(), |l| l.to_string());
                    let hi = r.hi.as_ref().map_or("+inf".to_string(), |l| l.to_string());
                    format!("range({n}) = {n} + [{lo}; {hi})")
                }
            })
            .collect()
    }
}

impl fmt::Display for RangeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.lines() {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}

type State = HashMap<String, AVal>;

/// Lower bounds on tracked symbols that hold on the current path.
type Facts = BTreeMap<String, i128>;

/// Lower bounds recorded by guards, plus `s >= c` read off every variable
/// bounded by `[c, s + d]`.
fn facts(st: &State) -> Facts {
    let mut out = Facts::new();
    let mut note = |s: &str, b: i128| {
        if b > 0 {
            let e = out.entry(s.to_string()).or_insert(b);
            *e = (*e).max(b);
        }
    };
    for (k, v) in st {
        let AVal::Num(Itv { lo: Some(lo), hi }) = v else {
            continue;
        };
        if let Some(s) = k.strip_prefix(FACT) {
            if let Some(b) = lo.as_const() {
                note(s, b);
            }
            continue;
        }
        let Some(hi) = hi else { continue };
        let (Some(c), 1) = (lo.as_const(), hi.terms.len()) else {
            continue;
        };
        let (s, k) = hi.terms.iter().next().expect("one term");
        if *k == 1 {
            note(s, c - hi.c);
        }
    }
    out
}

/// Whether `d >= 0` given the facts and non-negative symbols.
fn nonneg_under(d: &Lin, fx: &Facts) -> bool {
    let mut c = d.c;
    for (s, k) in &d.terms {
        if *k < 0 {
            return false;
        }
        c += k * fx.get(s).copied().unwrap_or(0);
    }
    c >= 0
}

/// Joins the recorded accesses of one base. A bound that the path facts
/// place inside another recorded bound is absorbed by it.
fn merge(recs: &[(Range, Facts)]) -> Range {
    fn pick(
        recs: &[(Range, Facts)],
        get: impl Fn(&Range) -> &Option<Lin>,
        covers: impl Fn(&Lin, &Lin, &Facts) -> bool,
        join: impl Fn(&Lin, &Lin) -> Lin,
    ) -> Option<Lin> {
        let mut live: Vec<(&Lin, &Facts)> = Vec::new();
        for (r, fx) in recs {
            live.push((get(r).as_ref()?, fx));
        }
        let all = live.clone();
        let mut i = 0;
        while i < live.len() {
            let (b, fx) = live[i];
            if (0..live.len()).any(|j| j != i && covers(live[j].0, b, fx)) {
                live.remove(i);
            } else {
                i += 1;
            }
        }
        let fold = |xs: &[(&Lin, &Facts)]| {
            let mut it = xs.iter().map(|(b, _)| (*b).clone());
            let first = it.next().expect("non-empty");
            it.fold(first, |a, b| join(&a, &b))
        };
        let out = fold(&live);
        if all.iter().all(|(b, fx)| covers(&out, b, fx)) {
            Some(out)
        } else {
            Some(fold(&all))
        }
    }
    Range {
        lo: pick(
            recs,
            |r| &r.lo,
            |o, b, fx| b.sub(o).is_some_and(|d| nonneg_under(&d, fx)),
            |a, b| a.meet_lower(b),
        ),
        hi: pick(
            recs,
            |r| &r.hi,
            |o, b, fx| o.sub(b).is_some_and(|d| nonneg_under(&d, fx)),
            |a, b| a.join_upper(b),
        ),
    }
}

/// State keys holding a path lower bound on a tracked symbol.
const FACT: char = '#';

fn join_states(a: Option<State>, b: Option<State>) -> Option<State> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(mut a), Some(b)) => {
            a.retain(|k, _| !k.starts_with(FACT) || b.contains_key(k));
            for (k, v) in b {
                if k.starts_with(FACT) && !a.contains_key(&k) {
                    continue;
                }
                let e = a.entry(k).or_insert(AVal::Bot);
                *e = e.join(&v);
            }
            Some(a)
        }
    }
}

fn widen_states(old: &State, new: &State) -> State {
    let mut out = old.clone();
    out.retain(|k, _| !k.starts_with(FACT) || new.contains_key(k));
    for (k, v) in new {
        if k.starts_with(FACT) && !out.contains_key(k) {
            continue;
        }
        let e = out.entry(k.clone()).or_insert(AVal::Bot);
        *e = e.widen(v);
    }
    out
}

fn top_of(w: Width) -> AVal {
    if w.bits() <= 64 {
        AVal::Num(Itv::consts(0, (1i128 << w.bits()) - 1))
    } else {
        AVal::Top
    }
}

fn const_of(e: &Expr) -> Option<i128> {
    match e {
        Expr::Int(n) => Some(*n),
        Expr::Cast { e, .. } => const_of(e),
        _ => None,
    }
}

fn scalar(ann: &Option<OpAnn>) -> bool {
    !matches!(ann, Some(OpAnn::Vector { .. }))
}

/// `x + k` patterns usable for guard refinement.
fn linear_var(e: &Expr) -> Option<(&str, i128)> {
    match e {
        Expr::Var(x) => Some((x, 0)),
        Expr::Cast { e, .. } => linear_var(e),
        Expr::Binary {
            op: BinOp::Add,
            ann,
            l,
            r,
            ..
        } if scalar(ann) => {
            let k = const_of(r)?;
            linear_var(l).map(|(x, c)| (x, c + k))
        }
        Expr::Binary {
            op: BinOp::Sub,
            ann,
            l,
            r,
            ..
        } if scalar(ann) => {
            let k = const_of(r)?;
            linear_var(l).map(|(x, c)| (x, c - k))
        }
        _ => None,
    }
}

fn negate(op: BinOp) -> BinOp {
    match op {
        BinOp::Lt => BinOp::Ge,
        BinOp::Ge => BinOp::Lt,
        BinOp::Le => BinOp::Gt,
        BinOp::Gt => BinOp::Le,
        BinOp::Eq => BinOp::Ne,
        BinOp::Ne => BinOp::Eq,
        o => o,
    }
}

fn flip(op: BinOp) -> BinOp {
    match op {
        BinOp::Lt => BinOp::Gt,
        BinOp::Gt => BinOp::Lt,
        BinOp::Le => BinOp::Ge,
        BinOp::Ge => BinOp::Le,
        o => o,
    }
}

struct Cx<'a> {
    name: &'a str,
    info: &'a FnInfo,
}

impl Cx<'_> {
    fn array(&self, x: &str) -> Option<(Width, usize)> {
        match self.info.vars.get(x)?.1 {
            VTy::Array(w, n) => Some((w, n)),
            _ => None,
        }
    }
}

/// Position, kind and subject of a finding, for deduplication.
type FindingKey = ((u32, u32), FindingKind, String);

struct Analyzer<'a> {
    tp: &'a TypedProgram,
    ranges: HashMap<String, Vec<(Range, Facts)>>,
    findings: BTreeMap<FindingKey, (Loc, String)>,
    ret: Vec<Option<Vec<AVal>>>,
    /// Nonzero while computing loop invariants: accesses and findings are
    /// recorded only once the invariant is known.
    quiet: usize,
}

impl<'a> Analyzer<'a> {
    fn find(&mut self, cx: &Cx, loc: Loc, kind: FindingKind, msg: String) {
        if self.quiet > 0 {
            return;
        }
        self.findings
            .entry(((loc.line, loc.col), kind, cx.name.to_string()))
            .or_insert((loc, msg));
    }

    fn access(&mut self, cx: &Cx, loc: Loc, st: &State, addr: &AVal, bytes: usize) {
        if self.quiet > 0 {
            return;
        }
        match addr {
            AVal::Bot => {}
            AVal::Ptr(b, off) => {
                let r = Range {
                    lo: off.lo.clone(),
                    hi: off.hi.as_ref().and_then(|h| h.add_const(bytes as i128)),
                };
                if r.lo.is_none() || r.hi.is_none() {
                    self.find(
                        cx,
                        loc,
                        FindingKind::UnboundedAccess,
                        format!("offset {off} from `{b}`"),
                    );
                }
                let seen = self.ranges.entry(b.clone()).or_default();
                let rec = (r, facts(st));
                if !seen.contains(&rec) {
                    seen.push(rec);
                }
            }
            _ => self.find(
                cx,
                loc,
                FindingKind::UnknownBase,
                "address is not derived from a pointer input".into(),
            ),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn index(
        &mut self,
        cx: &Cx,
        loc: Loc,
        st: &State,
        arr: &str,
        view: Option<Width>,
        scale: Scale,
        idx: &Expr,
    ) {
        let Some((elem, n)) = cx.array(arr) else {
            return;
        };
        let w = view.unwrap_or(elem);
        let unit = match scale {
            Scale::Elem => w.bytes(),
            Scale::Byte => 1,
        } as i128;
        let len = (n * elem.bytes()) as i128;
        match self.expr(cx, loc, st, idx) {
            AVal::Bot => {}
            AVal::Num(i) => {
                let off = i.scale(unit);
                if !off.within(0, len - w.bytes() as i128) {
                    self.find(
                        cx,
                        loc,
                        FindingKind::ArrayBounds,
                        format!("`{arr}` accessed at byte offsets {off}, length {len}"),
                    );
                }
            }
            _ => self.find(
                cx,
                loc,
                FindingKind::ArrayBounds,
                format!("index into `{arr}` is unbounded"),
            ),
        }
    }

    fn divisor(&mut self, cx: &Cx, loc: Loc, d: &AVal) {
        let ok = match d {
            AVal::Num(i) => {
                i.lo.as_ref()
                    .is_some_and(|l| l.dominates(&Lin::constant(1)))
            }
            AVal::Bot => true,
            _ => false,
        };
        if !ok {
            self.find(
                cx,
                loc,
                FindingKind::DivByZero,
                "divisor may be zero".into(),
            );
        }
    }

    fn expr(&mut self, cx: &Cx, loc: Loc, st: &State, e: &Expr) -> AVal {
        match e {
            Expr::Int(n) => AVal::Num(Itv::consts(*n, *n)),
            Expr::Bool(b) => AVal::Num(Itv::consts(*b as i128, *b as i128)),
            Expr::Var(x) => {
                if let Some(v) = st.get(x) {
                    v.clone()
                } else if let Some((_, w)) = self.tp.globals.get(x) {
                    match w.width().bits() {
                        0..=64 => AVal::Num(Itv::consts(w.low_u64() as i128, w.low_u64() as i128)),
                        _ => AVal::Top,
                    }
                } else if let Some(n) = self.tp.params.get(x) {
                    AVal::Num(Itv::consts(*n, *n))
                } else {
                    AVal::Bot
                }
            }
            Expr::Get {
                arr,
                view,
                scale,
                idx,
            } => {
                self.index(cx, loc, st, arr, *view, *scale, idx);
                let (elem, _) = cx.array(arr).unwrap_or((Width::W64, 0));
                match st.get(arr) {
                    Some(AVal::Num(i)) if view.is_none_or(|v| v == elem) => AVal::Num(i.clone()),
                    Some(AVal::Bot) | None => AVal::Bot,
                    _ => top_of(view.unwrap_or(elem)),
                }
            }
            Expr::Load { width, addr } => {
                let a = self.expr(cx, loc, st, addr);
                self.access(cx, loc, st, &a, width.bytes());
                top_of(*width)
            }
            Expr::VecLit { elems, .. } => {
                elems.iter().for_each(|x| {
                    self.expr(cx, loc, st, x);
                });
                AVal::Top
            }
            Expr::Unary { op, e, ann } => {
                let v = self.expr(cx, loc, st, e);
                match (op, ann, v) {
                    (UnOp::Neg, a, AVal::Num(i)) if scalar(a) => AVal::Num(i.scale(-1)),
                    _ => AVal::Top,
                }
            }
            Expr::Binary {
                op,
                signed,
                ann,
                l,
                r,
            } => {
                let a = self.expr(cx, loc, st, l);
                let b = self.expr(cx, loc, st, r);
                if !scalar(ann) {
                    return AVal::Top;
                }
                if matches!(op, BinOp::Div | BinOp::Rem) {
                    self.divisor(cx, loc, &b);
                }
                binop(*op, *signed, a, b)
            }
            Expr::Cast { to, e, .. } => match self.expr(cx, loc, st, e) {
                AVal::Num(i) => match i.const_bounds() {
                    Some((lo, hi)) if to.bits() <= 64 && (lo < 0 || hi >= 1i128 << to.bits()) => {
                        top_of(*to)
                    }
                    _ => AVal::Num(i),
                },
                AVal::Top => top_of(*to),
                v => v,
            },
            Expr::Intrinsic { name, args } => {
                let vs: Vec<AVal> = args.iter().map(|a| self.expr(cx, loc, st, a)).collect();
                self.intrinsic_checks(cx, loc, name, &vs);
                AVal::Top
            }
        }
    }

    fn intrinsic_checks(&mut self, cx: &Cx, loc: Loc, name: &str, args: &[AVal]) {
        if let Some(d) = isa::lookup(name) {
            if d.name.starts_with("x86_DIV_") {
                self.divisor(cx, loc, &args[2]);
            }
        }
    }

    fn write(&mut self, cx: &Cx, loc: Loc, st: &mut State, l: &Lval, v: AVal) {
        match l {
            Lval::Ignore => {}
            Lval::Var(x) => {
                st.insert(x.clone(), v);
            }
            Lval::Set {
                arr,
                view,
                scale,
                idx,
            } => {
                self.index(cx, loc, st, arr, *view, *scale, idx);
                let (elem, _) = cx.array(arr).unwrap_or((Width::W64, 0));
                let v = if view.is_none_or(|w| w == elem) {
                    v
                } else {
                    AVal::Top
                };
                let e = st.entry(arr.clone()).or_insert(AVal::Bot);
                *e = e.join(&v);
            }
            Lval::Store { width, addr } => {
                let a = self.expr(cx, loc, st, addr);
                self.access(cx, loc, st, &a, width.bytes());
            }
        }
    }

    fn refine(&mut self, cx: &Cx, st: Option<State>, c: &Expr, truth: bool) -> Option<State> {
        let st = st?;
        match c {
            Expr::Unary {
                op: UnOp::Not, e, ..
            } => self.refine(cx, Some(st), e, !truth),
            Expr::Binary {
                op: BinOp::LAnd,
                l,
                r,
                ..
            } => {
                if truth {
                    let s = self.refine(cx, Some(st), l, true);
                    self.refine(cx, s, r, true)
                } else {
                    let a = self.refine(cx, Some(st.clone()), l, false);
                    let b = self.refine(cx, Some(st), r, false);
                    join_states(a, b)
                }
            }
            Expr::Binary {
                op: BinOp::LOr,
                l,
                r,
                ..
            } => {
                if truth {
                    let a = self.refine(cx, Some(st.clone()), l, true);
                    let b = self.refine(cx, Some(st), r, true);
                    join_states(a, b)
                } else {
                    let s = self.refine(cx, Some(st), l, false);
                    self.refine(cx, s, r, false)
                }
            }
            Expr::Binary {
                op,
                signed: false,
                ann,
                l,
                r,
            } if op.is_comparison() && scalar(ann) => {
                let op = if truth { *op } else { negate(*op) };
                let mut st = st;
                if let Some((x, k)) = linear_var(l) {
                    let rv = self.expr(cx, Loc::default(), &st, r);
                    if !constrain(&mut st, x, k, op, &rv) {
                        return None;
                    }
                }
                if let Some((y, k)) = linear_var(r) {
                    let lv = self.expr(cx, Loc::default(), &st, l);
                    if !constrain(&mut st, y, k, flip(op), &lv) {
                        return None;
                    }
                }
                let a = self.expr(cx, Loc::default(), &st, l);
                let b = self.expr(cx, Loc::default(), &st, r);
                if decided_false(op, &a, &b) {
                    return None;
                }
                Some(st)
            }
            _ => Some(st),
        }
    }

    fn block(
        &mut self,
        cx: &Cx,
        mut st: Option<State>,
        body: &[Stmt],
        depth: usize,
    ) -> Option<State> {
        for s in body {
            st = self.stmt(cx, st, s, depth);
        }
        st
    }

    fn stmt(&mut self, cx: &Cx, st: Option<State>, s: &Stmt, depth: usize) -> Option<State> {
        let mut st = st?;
        let loc = s.loc;
        match &s.kind {
            StmtKind::Decl(_) => Some(st),
            StmtKind::Assign { lhs, rhs } => {
                let vals: Vec<AVal> = match rhs {
                    Rhs::Expr(e) => vec![self.expr(cx, loc, &st, e)],
                    Rhs::Intrinsic { name, args } => {
                        let vs: Vec<AVal> =
                            args.iter().map(|a| self.expr(cx, loc, &st, a)).collect();
                        self.intrinsic_checks(cx, loc, name, &vs);
                        let d = isa::lookup(name).expect("checked intrinsic");
                        d.dst_types
                            .iter()
                            .map(|t| match t {
                                isa::ArgTy::Word(w) => top_of(*w),
                                _ => AVal::Top,
                            })
                            .collect()
                    }
                    Rhs::Call { name, args } => {
                        let vs: Vec<AVal> =
                            args.iter().map(|a| self.expr(cx, loc, &st, a)).collect();
                        self.call(name, vs, depth)
                    }
                };
                for (l, v) in lhs.iter().zip(vals) {
                    self.write(cx, loc, &mut st, l, v);
                }
                Some(st)
            }
            StmtKind::If { cond, then_, else_ } => {
                self.expr(cx, loc, &st, cond);
                let t = self.refine(cx, Some(st.clone()), cond, true);
                let e = self.refine(cx, Some(st), cond, false);
                let t = self.block(cx, t, then_, depth);
                let e = self.block(cx, e, else_, depth);
                join_states(t, e)
            }
            StmtKind::While { cond, body } => {
                let x = self.invariant(st, |az, x| {
                    let t = az.refine(cx, Some(x.clone()), cond, true);
                    az.block(cx, t, body, depth)
                });
                self.expr(cx, loc, &x, cond);
                let t = self.refine(cx, Some(x.clone()), cond, true);
                self.block(cx, t, body, depth);
                self.refine(cx, Some(x), cond, false)
            }
            StmtKind::For {
                var,
                from,
                to,
                down,
                body,
            } => {
                let a = self.expr(cx, loc, &st, from);
                let b = self.expr(cx, loc, &st, to);
                let range = if *down { b.join(&a) } else { a.join(&b) };
                let enter = |x: &State| {
                    let mut t = x.clone();
                    t.insert(var.clone(), range.clone());
                    t
                };
                let x = self.invariant(st, |az, x| az.block(cx, Some(enter(x)), body, depth));
                self.block(cx, Some(enter(&x)), body, depth);
                Some(x)
            }
            StmtKind::Return(es) => {
                let vs: Vec<AVal> = es.iter().map(|e| self.expr(cx, loc, &st, e)).collect();
                let slot = self.ret.last_mut().expect("inside a function");
                *slot = Some(match slot.take() {
                    None => vs,
                    Some(old) => old.iter().zip(&vs).map(|(a, b)| a.join(b)).collect(),
                });
                Some(st)
            }
        }
    }

    /// Loop-head invariant: exact iterations, then widening, then two
    /// narrowing steps. `iter` maps a head state to the state after one
    /// more iteration.
    fn invariant(
        &mut self,
        init: State,
        mut iter: impl FnMut(&mut Self, &State) -> Option<State>,
    ) -> State {
        self.quiet += 1;
        let mut x = init.clone();
        for k in 0.. {
            let y = iter(self, &x);
            let mut n = join_states(Some(x.clone()), y).expect("joined with a reachable state");
            if k >= UNROLL {
                n = widen_states(&x, &n);
            }
            if n == x {
                break;
            }
            x = n;
            assert!(k < MAX_ITERATIONS, "widening failed to converge");
        }
        for _ in 0..2 {
            let y = iter(self, &x);
            x = join_states(Some(init.clone()), y).expect("joined with a reachable state");
        }
        self.quiet -= 1;
        x
    }

    fn call(&mut self, name: &str, args: Vec<AVal>, depth: usize) -> Vec<AVal> {
        let f = self.tp.function(name).expect("checked call");
        let info = &self.tp.fns[name];
        let tp = self.tp;
        let cx = Cx {
            name: &tp.function(name).expect("checked call").name,
            info,
        };
        let st: State = f.params.iter().map(|p| p.name.clone()).zip(args).collect();
        self.ret.push(None);
        self.block(&cx, Some(st), &f.body, depth + 1);
        let r = self.ret.pop().flatten();
        r.unwrap_or_else(|| vec![AVal::Bot; info.sig.results.len()])
    }
}

/// Tightens the variable `x` (offset by `k`) so that `x + k op v` holds.
/// Returns false when the constraint is unsatisfiable.
fn constrain(st: &mut State, x: &str, k: i128, op: BinOp, v: &AVal) -> bool {
    if let Some(AVal::Num(i)) = st.get(x) {
        if let Some((s, d)) = symbolic_point(i) {
            // The point stays exact; the guard becomes a fact on its symbol.
            let key = format!("{FACT}{s}");
            let known = match st.get(&key) {
                Some(AVal::Num(Itv { lo: Some(l), .. })) => l.as_const(),
                _ => None,
            };
            let mut tight = i.clone();
            if let Some(b) = known {
                tight.cap_lo(Some(Lin::constant(b + d)));
            }
            if !constrain_itv(&mut tight, k, op, v) {
                return false;
            }
            if let Some(c) = tight.lo.as_ref().and_then(Lin::as_const) {
                let b = known.map_or(c - d, |o| o.max(c - d));
                st.insert(
                    key,
                    AVal::Num(Itv {
                        lo: Some(Lin::constant(b)),
                        hi: None,
                    }),
                );
            }
            return true;
        }
    }
    let Some(cur) = st.get_mut(x) else {
        return true;
    };
    constrain_val(cur, k, op, v)
}

/// `s + d` when the interval is exactly that point.
fn symbolic_point(i: &Itv) -> Option<(String, i128)> {
    let (Some(lo), Some(hi)) = (&i.lo, &i.hi) else {
        return None;
    };
    if lo != hi || lo.terms.len() != 1 {
        return None;
    }
    let (s, k) = lo.terms.iter().next()?;
    (*k == 1).then(|| (s.clone(), lo.c))
}

fn constrain_itv(i: &mut Itv, k: i128, op: BinOp, v: &AVal) -> bool {
    let mut a = AVal::Num(i.clone());
    let ok = constrain_val(&mut a, k, op, v);
    if let AVal::Num(n) = a {
        *i = n;
    }
    ok
}

fn constrain_val(cur: &mut AVal, k: i128, op: BinOp, v: &AVal) -> bool {
    let (itv, other) = match (cur, v) {
        (AVal::Num(i), AVal::Num(o)) => (i, o),
        (AVal::Ptr(p, i), AVal::Ptr(q, o)) if p == q => (i, o),
        _ => return true,
    };
    let shift = |b: &Option<Lin>, d: i128| b.as_ref().and_then(|l| l.add_const(d - k));
    match op {
        BinOp::Lt => itv.cap_hi(shift(&other.hi, -1)),
        BinOp::Le => itv.cap_hi(shift(&other.hi, 0)),
        BinOp::Gt => itv.cap_lo(shift(&other.lo, 1)),
        BinOp::Ge => itv.cap_lo(shift(&other.lo, 0)),
        BinOp::Eq => {
            itv.cap_hi(shift(&other.hi, 0));
            itv.cap_lo(shift(&other.lo, 0));
        }
        _ => {}
    }
    !itv.is_empty()
}

fn decided_false(op: BinOp, a: &AVal, b: &AVal) -> bool {
    let (a, b) = match (a, b) {
        (AVal::Num(a), AVal::Num(b)) => (a, b),
        (AVal::Ptr(p, a), AVal::Ptr(q, b)) if p == q => (a, b),
        _ => return false,
    };
    let ge = |x: &Option<Lin>, y: &Option<Lin>, d: i128| match (x, y) {
        (Some(x), Some(y)) => y.add_const(d).is_some_and(|y| x.dominates(&y)),
        _ => false,
    };
    match op {
        BinOp::Lt => ge(&a.lo, &b.hi, 0),
        BinOp::Le => ge(&a.lo, &b.hi, 1),
        BinOp::Gt => ge(&b.lo, &a.hi, 0),
        BinOp::Ge => ge(&b.lo, &a.hi, 1),
        BinOp::Eq => ge(&a.lo, &b.hi, 1) || ge(&b.lo, &a.hi, 1),
        BinOp::Ne => matches!((a.as_const(), b.as_const()), (Some(x), Some(y)) if x == y),
        _ => false,
    }
}

fn pow2_ceil_mask(v: i128) -> i128 {
    let mut m = 0i128;
    while m < v {
        m = (m << 1) | 1;
    }
    m
}

fn binop(op: BinOp, signed: bool, a: AVal, b: AVal) -> AVal {
    use AVal::*;
    if matches!(a, Bot) || matches!(b, Bot) {
        return Bot;
    }
    if op.is_comparison() || op.is_logical() {
        return Num(Itv::consts(0, 1));
    }
    let kb = match &b {
        Num(i) => i.as_const(),
        _ => None,
    };
    let ka = match &a {
        Num(i) => i.as_const(),
        _ => None,
    };
    match (op, a, b) {
        (BinOp::Add, Num(x), Num(y)) => Num(x.add(&y)),
        (BinOp::Add, Ptr(p, x), Num(y)) | (BinOp::Add, Num(y), Ptr(p, x)) => Ptr(p, x.add(&y)),
        (BinOp::Sub, Num(x), Num(y)) => Num(x.sub(&y)),
        (BinOp::Sub, Ptr(p, x), Num(y)) => Ptr(p, x.sub(&y)),
        (BinOp::Sub, Ptr(p, x), Ptr(q, y)) if p == q => Num(x.sub(&y)),
        (BinOp::Mul, Num(x), Num(y)) => match (ka, kb) {
            (_, Some(k)) => Num(x.scale(k)),
            (Some(k), _) => Num(y.scale(k)),
            _ => match (x.const_bounds(), y.const_bounds()) {
                (Some((a0, a1)), Some((b0, b1))) if a0 >= 0 && b0 >= 0 => {
                    match a1.checked_mul(b1) {
                        Some(h) => Num(Itv::consts(a0 * b0, h)),
                        None => Top,
                    }
                }
                _ => Top,
            },
        },
        (BinOp::Shl, Num(x), _) if !signed => match kb {
            Some(k) if (0..64).contains(&k) => Num(x.scale(1i128 << k)),
            _ => Top,
        },
        (BinOp::Shr | BinOp::Div, Num(x), _) if !signed => {
            let k = match (op, kb) {
                (BinOp::Shr, Some(k)) if (0..64).contains(&k) => 1i128 << k,
                (BinOp::Div, Some(k)) if k > 0 => k,
                _ => return Top,
            };
            match x.const_bounds() {
                Some((lo, hi)) if lo >= 0 => Num(Itv::consts(lo / k, hi / k)),
                _ if x.is_nonneg() => Num(Itv {
                    lo: Some(Lin::constant(0)),
                    hi: x.hi,
                }),
                _ => Top,
            }
        }
        (BinOp::Rem, _, _) if !signed => match kb {
            Some(k) if k > 0 => Num(Itv::consts(0, k - 1)),
            _ => Top,
        },
        (BinOp::And, Num(x), Num(y)) => {
            let m = [x.const_bounds(), y.const_bounds()]
                .into_iter()
                .flatten()
                .filter(|(lo, _)| *lo >= 0)
                .map(|(_, hi)| hi)
                .min();
            m.map_or(Top, |m| Num(Itv::consts(0, m)))
        }
        (BinOp::Or | BinOp::Xor, Num(x), Num(y)) => match (x.const_bounds(), y.const_bounds()) {
            (Some((a0, a1)), Some((b0, b1))) if a0 >= 0 && b0 >= 0 => {
                Num(Itv::consts(0, pow2_ceil_mask(a1.max(b1))))
            }
            _ => Top,
        },
        _ => Top,
    }
}

fn entry_info<'a>(tp: &'a TypedProgram, entry: &str) -> Result<&'a FnInfo, AnalysisError> {
    tp.info(entry)
        .ok_or_else(|| AnalysisError::UnknownEntry(entry.into()))
}

fn run(
    tp: &TypedProgram,
    entry: &str,
    pointers: &[&str],
    tracked: &[&str],
) -> Result<(HashMap<String, Range>, Vec<Finding>), AnalysisError> {
    let info = entry_info(tp, entry)?;
    for n in pointers.iter().chain(tracked) {
        if !info.sig.params.iter().any(|(p, _, _)| p == n) {
            return Err(AnalysisError::NotParameter(n.to_string(), entry.into()));
        }
    }
    let mut st = State::new();
    for (p, _, ty) in &info.sig.params {
        let v = if pointers.contains(&p.as_str()) {
            AVal::Ptr(p.clone(), Itv::consts(0, 0))
        } else if tracked.contains(&p.as_str()) {
            AVal::Num(Itv::point(Lin::var(p)))
        } else {
            match ty {
                VTy::Word(w) => top_of(*w),
                _ => AVal::Top,
            }
        };
        st.insert(p.clone(), v);
    }
    let mut az = Analyzer {
        tp,
        ranges: HashMap::new(),
        findings: BTreeMap::new(),
        ret: vec![None],
        quiet: 0,
    };
    let cx = Cx { name: entry, info };
    let f = tp.function(entry).expect("entry has info");
    az.block(&cx, Some(st), &f.body, 0);
    let findings = az
        .findings
        .into_iter()
        .map(|((_, kind, func), (loc, msg))| Finding {
            kind,
            func,
            loc,
            msg,
        })
        .collect();
    let ranges = az
        .ranges
        .into_iter()
        .map(|(b, recs)| (b, merge(&recs)))
        .collect();
    Ok((ranges, findings))
}

/// Infers, for each pointer input, the offsets the entry may access.
pub fn analyze(
    tp: &TypedProgram,
    entry: &str,
    pointers: &[&str],
    tracked: &[&str],
) -> Result<RangeReport, AnalysisError> {
    let tp = expand(tp)?;
    let (ranges, findings) = run(&tp, entry, pointers, tracked)?;
    let info = entry_info(&tp, entry)?;
    let entries = info
        .sig
        .params
        .iter()
        .filter(|(p, _, _)| pointers.contains(&p.as_str()) || tracked.contains(&p.as_str()))
        .map(|(p, _, _)| (p.clone(), ranges.get(p).cloned()))
        .collect();
    let failures = findings
        .into_iter()
        .filter(|f| {
            matches!(
                f.kind,
                FindingKind::UnboundedAccess | FindingKind::UnknownBase
            )
        })
        .collect();
    Ok(RangeReport { entries, failures })
}

/// Static findings: possible division by zero, out-of-bounds array
/// accesses, unexpressible memory accesses and possibly uninitialized
/// variables.
pub fn check_safety(
    tp: &TypedProgram,
    entry: &str,
    pointers: &[&str],
    tracked: &[&str],
) -> Result<Vec<Finding>, AnalysisError> {
    let tp = expand(tp)?;
    let (_, mut findings) = run(&tp, entry, pointers, tracked)?;
    let mut seen = Seen::new();
    for f in tp.program.functions() {
        let info = &tp.fns[&f.name];
        let mut init: BTreeSet<String> = f.params.iter().map(|p| p.name.clone()).collect();
        init.extend(
            info.vars
                .iter()
                .filter(|(_, (_, t))| matches!(t, VTy::Array(..)))
                .map(|(n, _)| n.clone()),
        );
        init_block(&tp, &f.name, &f.body, &mut init, &mut seen);
    }
    findings.extend(seen.into_iter().map(|((func, _, x), loc)| Finding {
        kind: FindingKind::Uninitialized,
        func,
        loc,
        msg: format!("`{x}` may be read before it is assigned"),
    }));
    findings.sort_by_key(|f| (f.loc.line, f.loc.col, f.kind));
    Ok(findings)
}

type Seen = BTreeMap<(String, (u32, u32), String), Loc>;

fn init_reads(
    tp: &TypedProgram,
    func: &str,
    e: &Expr,
    loc: Loc,
    init: &BTreeSet<String>,
    seen: &mut Seen,
) {
    e.walk(&mut |x| {
        if let Expr::Var(v) = x {
            if !init.contains(v) && !tp.globals.contains_key(v) && !tp.params.contains_key(v) {
                seen.insert((func.to_string(), (loc.line, loc.col), v.clone()), loc);
            }
        }
    });
}

fn init_block(
    tp: &TypedProgram,
    func: &str,
    body: &[Stmt],
    init: &mut BTreeSet<String>,
    seen: &mut Seen,
) {
    for s in body {
        match &s.kind {
            StmtKind::Decl(_) => {}
            StmtKind::Assign { lhs, rhs } => {
                match rhs {
                    Rhs::Expr(e) => init_reads(tp, func, e, s.loc, init, seen),
                    Rhs::Intrinsic { args, .. } | Rhs::Call { args, .. } => args
                        .iter()
                        .for_each(|a| init_reads(tp, func, a, s.loc, init, seen)),
                }
                for l in lhs {
                    match l {
                        Lval::Var(x) => {
                            init.insert(x.clone());
                        }
                        Lval::Set { idx, .. } => init_reads(tp, func, idx, s.loc, init, seen),
                        Lval::Store { addr, .. } => init_reads(tp, func, addr, s.loc, init, seen),
                        Lval::Ignore => {}
                    }
                }
            }
            StmtKind::If { cond, then_, else_ } => {
                init_reads(tp, func, cond, s.loc, init, seen);
                let mut a = init.clone();
                let mut b = init.clone();
                init_block(tp, func, then_, &mut a, seen);
                init_block(tp, func, else_, &mut b, seen);
                *init = a.intersection(&b).cloned().collect();
            }
            StmtKind::While { cond, body } => {
                init_reads(tp, func, cond, s.loc, init, seen);
                let mut a = init.clone();
                init_block(tp, func, body, &mut a, seen);
            }
            StmtKind::For {
                var,
                from,
                to,
                body,
                ..
            } => {
                init_reads(tp, func, from, s.loc, init, seen);
                init_reads(tp, func, to, s.loc, init, seen);
                let mut a = init.clone();
                a.insert(var.clone());
                init_block(tp, func, body, &mut a, seen);
            }
            StmtKind::Return(es) => es
                .iter()
                .for_each(|e| init_reads(tp, func, e, s.loc, init, seen)),
        }
    }
}

/// Scalar inputs that flow into a branch or loop condition: candidates for
/// the tracked set.
pub fn preanalyze(tp: &TypedProgram, entry: &str) -> Result<BTreeSet<String>, AnalysisError> {
    let info = entry_info(tp, entry)?;
    let mut out = crate::leakage::condition_inputs(tp, entry)?;
    out.retain(|x| {
        info.sig
            .params
            .iter()
            .any(|(p, _, t)| p == x && matches!(t, VTy::Word(_)))
    });
    Ok(out)
}

#[cfg(test)]
mod tests;
