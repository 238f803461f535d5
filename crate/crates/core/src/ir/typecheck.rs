//! Type checking.
//!
//! Checking rewrites the program into an explicit form: every implicit
//! truncation becomes a cast, every integer constant used as a word gets a
//! cast, and every word operator carries its width annotation.

use std::collections::{BTreeMap, HashMap, HashSet};

use thiserror::Error;

use super::ast::*;
use crate::isa::{self, ArgTy};
use crate::word::{Width, Word};

/// Resolved type of a variable or expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VTy {
    Bool,
    Int,
    Word(Width),
    Array(Width, usize),
}

impl std::fmt::Display for VTy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VTy::Bool => write!(f, "bool"),
            VTy::Int => write!(f, "int"),
            VTy::Word(w) => write!(f, "{w}"),
            VTy::Array(w, n) => write!(f, "{w}[{n}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeErrorKind {
    UnknownName,
    Duplicate,
    WidthMismatch,
    TypeMismatch,
    RuntimeRegIndex,
    GlobalWrite,
    Recursion,
    BadReturn,
    NotConstant,
    IndexOutOfBounds,
    BadCall,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{loc}: {msg}")]
pub struct TypeError {
    pub loc: Loc,
    pub kind: TypeErrorKind,
    pub msg: String,
}

fn terr<T>(loc: Loc, kind: TypeErrorKind, msg: impl Into<String>) -> Result<T, TypeError> {
    Err(TypeError {
        loc,
        kind,
        msg: msg.into(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sig {
    pub kind: FnKind,
    pub params: Vec<(String, Storage, VTy)>,
    pub results: Vec<(Storage, VTy)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FnInfo {
    pub sig: Sig,
    /// Every parameter and local of the function.
    pub vars: HashMap<String, (Storage, VTy)>,
}

/// A checked program in explicit form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedProgram {
    pub program: Program,
    pub params: BTreeMap<String, i128>,
    pub globals: BTreeMap<String, (Width, Word)>,
    pub fns: HashMap<String, FnInfo>,
}

impl TypedProgram {
    pub fn function(&self, name: &str) -> Option<&FnDecl> {
        self.program.function(name)
    }

    pub fn info(&self, name: &str) -> Option<&FnInfo> {
        self.fns.get(name)
    }
}

/// Evaluates an integer expression over literals and known names.
pub fn eval_int(e: &Expr, env: &dyn Fn(&str) -> Option<i128>) -> Option<i128> {
    Some(match e {
        Expr::Int(n) => *n,
        Expr::Var(x) => env(x)?,
        Expr::Unary {
            op: UnOp::Neg,
            ann: None,
            e,
        } => eval_int(e, env)?.checked_neg()?,
        Expr::Unary {
            op: UnOp::Not,
            ann: None,
            e,
        } => !eval_int(e, env)?,
        Expr::Binary {
            op,
            ann: None,
            l,
            r,
            ..
        } => {
            let a = eval_int(l, env)?;
            let b = eval_int(r, env)?;
            int_binop(*op, a, b)?
        }
        _ => return None,
    })
}

/// Integer arithmetic on compile-time values; `None` on overflow or
/// division by zero. Comparisons yield 0 or 1.
pub fn int_binop(op: BinOp, a: i128, b: i128) -> Option<i128> {
    Some(match op {
        BinOp::Add => a.checked_add(b)?,
        BinOp::Sub => a.checked_sub(b)?,
        BinOp::Mul => a.checked_mul(b)?,
        BinOp::Div => a.checked_div_euclid(b)?,
        BinOp::Rem => a.checked_rem_euclid(b)?,
        BinOp::And => a & b,
        BinOp::Or => a | b,
        BinOp::Xor => a ^ b,
        BinOp::Shl => {
            let s = u32::try_from(b).ok().filter(|s| *s < 127)?;
            a.checked_mul(1i128 << s)?
        }
        BinOp::Shr => a >> u32::try_from(b).ok()?.min(127),
        BinOp::Eq => (a == b) as i128,
        BinOp::Ne => (a != b) as i128,
        BinOp::Lt => (a < b) as i128,
        BinOp::Le => (a <= b) as i128,
        BinOp::Gt => (a > b) as i128,
        BinOp::Ge => (a >= b) as i128,
        BinOp::Rol | BinOp::Ror | BinOp::LAnd | BinOp::LOr => return None,
    })
}

/// Builds the word denoted by a vector literal with constant lanes.
pub fn veclit_word(bits: u32, elems: &[i128]) -> Option<Word> {
    let total = Width::from_bits(bits * elems.len() as u32)?;
    let mut acc = Word::zero(total);
    for (k, v) in elems.iter().rev().enumerate() {
        if *v < 0 || (bits < 128 && *v >> bits != 0) {
            return None;
        }
        let lane = Word::from_u128(total, *v as u128);
        acc = acc.or(&lane.shl_wrapping(k as u32 * bits));
    }
    Some(acc)
}

/// Evaluates a constant word expression: an integer (at `width`), a vector
/// literal, or a cast of either.
pub fn eval_word(e: &Expr, width: Width, env: &dyn Fn(&str) -> Option<i128>) -> Option<Word> {
    match e {
        Expr::VecLit { bits, elems, .. } => {
            let vals: Option<Vec<i128>> = elems.iter().map(|x| eval_int(x, env)).collect();
            let w = veclit_word(*bits, &vals?)?;
            (w.width() == width).then_some(w)
        }
        Expr::Cast {
            to,
            signed: false,
            e,
        } if *to == width => match eval_word(e, width, env) {
            Some(w) => Some(w),
            None => eval_int(e, env).map(|n| Word::from_i128(width, n)),
        },
        _ => eval_int(e, env).map(|n| Word::from_i128(width, n)),
    }
}

struct Checker<'a> {
    params: &'a BTreeMap<String, i128>,
    globals: &'a BTreeMap<String, (Width, Word)>,
    sigs: &'a HashMap<String, Sig>,
    vars: HashMap<String, (Storage, VTy)>,
}

fn resolve_ty(t: &Ty, params: &BTreeMap<String, i128>, loc: Loc) -> Result<VTy, TypeError> {
    Ok(match t {
        Ty::Bool => VTy::Bool,
        Ty::Int => VTy::Int,
        Ty::Word(w) => VTy::Word(*w),
        Ty::Array(w, n) => {
            let Some(n) = eval_int(n, &|x| params.get(x).copied()) else {
                return terr(
                    loc,
                    TypeErrorKind::NotConstant,
                    "array length is not a constant",
                );
            };
            if n <= 0 || n > 1 << 24 {
                return terr(
                    loc,
                    TypeErrorKind::NotConstant,
                    format!("invalid array length {n}"),
                );
            }
            VTy::Array(*w, n as usize)
        }
    })
}

pub fn typecheck(p: &Program) -> Result<TypedProgram, TypeError> {
    let loc0 = Loc::default();
    let mut params = BTreeMap::new();
    let mut globals = BTreeMap::new();
    let mut top_names = HashSet::new();
    for item in &p.items {
        let name = match item {
            Item::Param { name, .. } | Item::Global { name, .. } => name,
            Item::Fn(f) => &f.name,
        };
        if !top_names.insert(name.clone()) {
            return terr(
                loc0,
                TypeErrorKind::Duplicate,
                format!("`{name}` is defined twice"),
            );
        }
        match item {
            Item::Param { name, value } => {
                let Some(v) = eval_int(value, &|x| params.get(x).copied()) else {
                    return terr(
                        loc0,
                        TypeErrorKind::NotConstant,
                        format!("parameter `{name}` is not constant"),
                    );
                };
                params.insert(name.clone(), v);
            }
            Item::Global { name, width, value } => {
                let Some(v) = eval_word(value, *width, &|x| params.get(x).copied()) else {
                    return terr(
                        loc0,
                        TypeErrorKind::NotConstant,
                        format!("global `{name}` is not a constant {width}"),
                    );
                };
                globals.insert(name.clone(), (*width, v));
            }
            Item::Fn(_) => {}
        }
    }

    let mut sigs = HashMap::new();
    for f in p.functions() {
        let mut ps = Vec::new();
        for d in &f.params {
            ps.push((
                d.name.clone(),
                d.storage,
                resolve_ty(&d.ty, &params, f.loc)?,
            ));
        }
        let mut rs = Vec::new();
        for (s, t) in &f.results {
            rs.push((*s, resolve_ty(t, &params, f.loc)?));
        }
        sigs.insert(
            f.name.clone(),
            Sig {
                kind: f.kind,
                params: ps,
                results: rs,
            },
        );
    }
    check_recursion(p)?;

    let mut items = Vec::new();
    let mut fns = HashMap::new();
    for item in &p.items {
        match item {
            Item::Fn(f) => {
                let (nf, info) = check_fn(f, &params, &globals, &sigs, &top_names)?;
                fns.insert(f.name.clone(), info);
                items.push(Item::Fn(nf));
            }
            other => items.push(other.clone()),
        }
    }
    Ok(TypedProgram {
        program: Program { items },
        params,
        globals,
        fns,
    })
}

fn check_recursion(p: &Program) -> Result<(), TypeError> {
    let mut calls: HashMap<&str, Vec<(&str, Loc)>> = HashMap::new();
    for f in p.functions() {
        let mut cs = Vec::new();
        walk_stmts(&f.body, &mut |s| {
            if let StmtKind::Assign {
                rhs: Rhs::Call { name, .. },
                ..
            } = &s.kind
            {
                cs.push((name.as_str(), s.loc));
            }
        });
        calls.insert(&f.name, cs);
    }
    fn visit<'a>(
        f: &'a str,
        calls: &HashMap<&'a str, Vec<(&'a str, Loc)>>,
        state: &mut HashMap<&'a str, u8>,
    ) -> Result<(), TypeError> {
        state.insert(f, 1);
        for (g, loc) in calls.get(f).into_iter().flatten() {
            match state.get(g) {
                Some(1) => {
                    return terr(
                        *loc,
                        TypeErrorKind::Recursion,
                        format!("recursive call to `{g}`"),
                    )
                }
                Some(_) => {}
                None => {
                    if calls.contains_key(g) {
                        visit(g, calls, state)?;
                    }
                }
            }
        }
        state.insert(f, 2);
        Ok(())
    }
    let mut state = HashMap::new();
    for f in p.functions() {
        if !state.contains_key(f.name.as_str()) {
            visit(&f.name, &calls, &mut state)?;
        }
    }
    Ok(())
}

fn check_fn(
    f: &FnDecl,
    params: &BTreeMap<String, i128>,
    globals: &BTreeMap<String, (Width, Word)>,
    sigs: &HashMap<String, Sig>,
    top_names: &HashSet<String>,
) -> Result<(FnDecl, FnInfo), TypeError> {
    let mut vars = HashMap::new();
    let mut add = |name: &str, st: Storage, ty: VTy, loc: Loc| -> Result<(), TypeError> {
        if vars.contains_key(name) || top_names.contains(name) {
            return terr(
                loc,
                TypeErrorKind::Duplicate,
                format!("`{name}` is declared twice"),
            );
        }
        if st == Storage::Inline && ty != VTy::Int && ty != VTy::Bool {
            return terr(
                loc,
                TypeErrorKind::TypeMismatch,
                format!("inline variable `{name}` must be int or bool"),
            );
        }
        if st != Storage::Inline && ty == VTy::Int {
            return terr(
                loc,
                TypeErrorKind::TypeMismatch,
                format!("int variable `{name}` must be inline"),
            );
        }
        vars.insert(name.to_string(), (st, ty));
        Ok(())
    };
    for d in &f.params {
        add(&d.name, d.storage, resolve_ty(&d.ty, params, f.loc)?, f.loc)?;
    }
    let mut decl_err = Ok(());
    walk_stmts(&f.body, &mut |s| {
        if let StmtKind::Decl(ds) = &s.kind {
            for d in ds {
                if decl_err.is_ok() {
                    decl_err = resolve_ty(&d.ty, params, s.loc)
                        .and_then(|t| add(&d.name, d.storage, t, s.loc));
                }
            }
        }
    });
    decl_err?;

    let mut ck = Checker {
        params,
        globals,
        sigs,
        vars,
    };
    let sig = &sigs[&f.name];
    let body = ck.block(&f.body, Some(&sig.results), f.loc)?;
    let nf = FnDecl { body, ..f.clone() };
    Ok((
        nf,
        FnInfo {
            sig: sig.clone(),
            vars: ck.vars,
        },
    ))
}

impl Checker<'_> {
    fn block(
        &mut self,
        body: &[Stmt],
        results: Option<&[(Storage, VTy)]>,
        fn_loc: Loc,
    ) -> Result<Vec<Stmt>, TypeError> {
        let mut out = Vec::new();
        for (i, s) in body.iter().enumerate() {
            let last = i + 1 == body.len();
            if let StmtKind::Return(es) = &s.kind {
                let Some(rs) = results.filter(|_| last) else {
                    return terr(
                        s.loc,
                        TypeErrorKind::BadReturn,
                        "return must be the last statement of a function",
                    );
                };
                if es.len() != rs.len() {
                    return terr(
                        s.loc,
                        TypeErrorKind::BadReturn,
                        format!("expected {} results", rs.len()),
                    );
                }
                let mut ne = Vec::new();
                for (e, (_, t)) in es.iter().zip(rs) {
                    let (e2, et) = self.expr(e, s.loc)?;
                    ne.push(self.coerce(e2, et, *t, s.loc)?);
                }
                out.push(Stmt::new(StmtKind::Return(ne), s.loc));
                continue;
            }
            out.push(self.stmt(s)?);
        }
        if let Some(rs) = results {
            if !rs.is_empty() && !matches!(out.last().map(|s| &s.kind), Some(StmtKind::Return(_))) {
                return terr(fn_loc, TypeErrorKind::BadReturn, "missing return statement");
            }
        }
        Ok(out)
    }

    fn stmt(&mut self, s: &Stmt) -> Result<Stmt, TypeError> {
        let loc = s.loc;
        let kind = match &s.kind {
            StmtKind::Decl(ds) => StmtKind::Decl(ds.clone()),
            StmtKind::Assign { lhs, rhs } => self.assign(lhs, rhs, loc)?,
            StmtKind::If { cond, then_, else_ } => {
                let cond = self.cond(cond, loc)?;
                StmtKind::If {
                    cond,
                    then_: self.block(then_, None, loc)?,
                    else_: self.block(else_, None, loc)?,
                }
            }
            StmtKind::While { cond, body } => {
                let cond = self.cond(cond, loc)?;
                StmtKind::While {
                    cond,
                    body: self.block(body, None, loc)?,
                }
            }
            StmtKind::For {
                var,
                from,
                to,
                down,
                body,
            } => {
                match self.vars.get(var) {
                    Some((Storage::Inline, VTy::Int)) => {}
                    _ => {
                        return terr(
                            loc,
                            TypeErrorKind::TypeMismatch,
                            format!("loop counter `{var}` must be an inline int"),
                        )
                    }
                }
                let (from, ft) = self.expr(from, loc)?;
                let (to, tt) = self.expr(to, loc)?;
                if ft != VTy::Int || tt != VTy::Int {
                    return terr(
                        loc,
                        TypeErrorKind::NotConstant,
                        "loop bounds must be compile-time integers",
                    );
                }
                StmtKind::For {
                    var: var.clone(),
                    from,
                    to,
                    down: *down,
                    body: self.block(body, None, loc)?,
                }
            }
            StmtKind::Return(_) => unreachable!("handled by block"),
        };
        Ok(Stmt::new(kind, loc))
    }

    fn cond(&mut self, c: &Expr, loc: Loc) -> Result<Expr, TypeError> {
        let (e, t) = self.expr(c, loc)?;
        if t != VTy::Bool {
            return terr(
                loc,
                TypeErrorKind::TypeMismatch,
                format!("condition has type {t}, expected bool"),
            );
        }
        Ok(e)
    }

    fn lval(&mut self, l: &Lval, loc: Loc) -> Result<(Lval, Option<VTy>), TypeError> {
        Ok(match l {
            Lval::Ignore => (Lval::Ignore, None),
            Lval::Var(x) => match self.vars.get(x) {
                Some((_, t)) => (l.clone(), Some(*t)),
                None if self.globals.contains_key(x) => {
                    return terr(
                        loc,
                        TypeErrorKind::GlobalWrite,
                        format!("cannot assign to global `{x}`"),
                    )
                }
                None if self.params.contains_key(x) => {
                    return terr(
                        loc,
                        TypeErrorKind::GlobalWrite,
                        format!("cannot assign to parameter `{x}`"),
                    )
                }
                None => {
                    return terr(
                        loc,
                        TypeErrorKind::UnknownName,
                        format!("unknown variable `{x}`"),
                    )
                }
            },
            Lval::Set {
                arr,
                view,
                scale,
                idx,
            } => {
                let (idx, w) = self.index(arr, *view, *scale, idx, loc)?;
                (
                    Lval::Set {
                        arr: arr.clone(),
                        view: *view,
                        scale: *scale,
                        idx,
                    },
                    Some(VTy::Word(w)),
                )
            }
            Lval::Store { width, addr } => {
                let addr = self.address(addr, loc)?;
                (
                    Lval::Store {
                        width: *width,
                        addr,
                    },
                    Some(VTy::Word(*width)),
                )
            }
        })
    }

    fn assign(&mut self, lhs: &[Lval], rhs: &Rhs, loc: Loc) -> Result<StmtKind, TypeError> {
        let mut nl = Vec::new();
        let mut lts = Vec::new();
        for l in lhs {
            let (l2, t) = self.lval(l, loc)?;
            nl.push(l2);
            lts.push(t);
        }
        let rhs = match rhs {
            Rhs::Expr(e) => {
                if lhs.len() != 1 {
                    return terr(
                        loc,
                        TypeErrorKind::TypeMismatch,
                        "an expression assigns exactly one destination",
                    );
                }
                let (e2, et) = self.expr(e, loc)?;
                let e3 = match lts[0] {
                    Some(t) => self.coerce(e2, et, t, loc)?,
                    None => e2,
                };
                Rhs::Expr(e3)
            }
            Rhs::Intrinsic { name, args } => {
                let Some(d) = isa::lookup(name) else {
                    return terr(
                        loc,
                        TypeErrorKind::UnknownName,
                        format!("unknown intrinsic `#{name}`"),
                    );
                };
                let args = self.intrinsic_args(d, args, loc)?;
                if lhs.len() != d.dests.len() {
                    return terr(
                        loc,
                        TypeErrorKind::TypeMismatch,
                        format!(
                            "`#{name}` produces {} values, {} destinations given",
                            d.dests.len(),
                            lhs.len()
                        ),
                    );
                }
                for (t, dt) in lts.iter().zip(&d.dst_types) {
                    let dt = match dt {
                        ArgTy::Bool => VTy::Bool,
                        ArgTy::Word(w) => VTy::Word(*w),
                    };
                    if let Some(t) = t {
                        if *t != dt {
                            return terr(
                                loc,
                                TypeErrorKind::WidthMismatch,
                                format!("destination of type {t} receives {dt}"),
                            );
                        }
                    }
                }
                Rhs::Intrinsic {
                    name: name.clone(),
                    args,
                }
            }
            Rhs::Call { name, args } => {
                let Some(sig) = self.sigs.get(name) else {
                    return terr(
                        loc,
                        TypeErrorKind::UnknownName,
                        format!("unknown function `{name}`"),
                    );
                };
                if args.len() != sig.params.len() {
                    return terr(
                        loc,
                        TypeErrorKind::BadCall,
                        format!("`{name}` expects {} arguments", sig.params.len()),
                    );
                }
                let mut na = Vec::new();
                for (a, (_, _, pt)) in args.iter().zip(sig.params.clone()) {
                    let (a2, at) = self.expr(a, loc)?;
                    na.push(self.coerce(a2, at, pt, loc)?);
                }
                if lhs.len() != sig.results.len() {
                    return terr(
                        loc,
                        TypeErrorKind::BadCall,
                        format!("`{name}` returns {} values", sig.results.len()),
                    );
                }
                for (t, (_, rt)) in lts.iter().zip(&sig.results) {
                    if let Some(t) = t {
                        if t != rt {
                            return terr(
                                loc,
                                TypeErrorKind::WidthMismatch,
                                format!("destination of type {t} receives {rt}"),
                            );
                        }
                    }
                }
                Rhs::Call {
                    name: name.clone(),
                    args: na,
                }
            }
        };
        Ok(StmtKind::Assign { lhs: nl, rhs })
    }

    /// Converts `e` of type `from` to type `to`, inserting casts for word
    /// truncation and integer constants.
    fn coerce(&self, e: Expr, from: VTy, to: VTy, loc: Loc) -> Result<Expr, TypeError> {
        match (from, to) {
            (a, b) if a == b => Ok(e),
            (VTy::Word(s), VTy::Word(d)) if s > d => Ok(Expr::cast(d, e)),
            (VTy::Word(s), VTy::Word(d)) => terr(
                loc,
                TypeErrorKind::WidthMismatch,
                format!("cannot widen {s} to {d} implicitly"),
            ),
            (VTy::Int, VTy::Word(d)) => Ok(Expr::cast(d, e)),
            (f, t) => terr(
                loc,
                TypeErrorKind::TypeMismatch,
                format!("expected {t}, found {f}"),
            ),
        }
    }

    fn to_width(&self, e: Expr, t: VTy, w: Width, loc: Loc) -> Result<Expr, TypeError> {
        self.coerce(e, t, VTy::Word(w), loc)
    }

    fn address(&mut self, a: &Expr, loc: Loc) -> Result<Expr, TypeError> {
        let (e, t) = self.expr(a, loc)?;
        match t {
            VTy::Word(Width::W64) => Ok(e),
            VTy::Int => Ok(Expr::cast(Width::W64, e)),
            t => terr(
                loc,
                TypeErrorKind::WidthMismatch,
                format!("address has type {t}, expected u64"),
            ),
        }
    }

    /// Checks an array access and returns the rewritten index and access width.
    fn index(
        &mut self,
        arr: &str,
        view: Option<Width>,
        scale: Scale,
        idx: &Expr,
        loc: Loc,
    ) -> Result<(Expr, Width), TypeError> {
        let Some((st, t)) = self.vars.get(arr).copied() else {
            return terr(
                loc,
                TypeErrorKind::UnknownName,
                format!("unknown array `{arr}`"),
            );
        };
        let VTy::Array(ew, n) = t else {
            return terr(
                loc,
                TypeErrorKind::TypeMismatch,
                format!("`{arr}` is not an array"),
            );
        };
        let w = view.unwrap_or(ew);
        let (i, it) = self.expr(idx, loc)?;
        let i = match it {
            VTy::Int => i,
            VTy::Word(_) if st == Storage::Reg => {
                return terr(
                    loc,
                    TypeErrorKind::RuntimeRegIndex,
                    format!("register array `{arr}` indexed by a run-time value"),
                )
            }
            VTy::Word(Width::W64) => i,
            VTy::Word(_) => {
                return terr(
                    loc,
                    TypeErrorKind::WidthMismatch,
                    "array index must be u64 or int",
                )
            }
            t => {
                return terr(
                    loc,
                    TypeErrorKind::TypeMismatch,
                    format!("array index has type {t}"),
                )
            }
        };
        let params = self.params;
        if let Some(k) = eval_int(&i, &|x| params.get(x).copied()) {
            let unit = match scale {
                Scale::Elem => w.bytes() as i128,
                Scale::Byte => 1,
            };
            let size = (n * ew.bytes()) as i128;
            if k < 0 || k * unit + w.bytes() as i128 > size {
                return terr(
                    loc,
                    TypeErrorKind::IndexOutOfBounds,
                    format!("index {k} out of bounds for `{arr}`"),
                );
            }
        }
        Ok((i, w))
    }

    fn intrinsic_args(
        &mut self,
        d: &isa::Descriptor,
        args: &[Expr],
        loc: Loc,
    ) -> Result<Vec<Expr>, TypeError> {
        if args.len() != d.src_types.len() {
            return terr(
                loc,
                TypeErrorKind::BadCall,
                format!(
                    "`#{}` expects {} arguments, got {}",
                    d.name,
                    d.src_types.len(),
                    args.len()
                ),
            );
        }
        let mut out = Vec::new();
        for (a, t) in args.iter().zip(&d.src_types) {
            let (a2, at) = self.expr(a, loc)?;
            let want = match t {
                ArgTy::Bool => VTy::Bool,
                ArgTy::Word(w) => VTy::Word(*w),
            };
            out.push(self.coerce(a2, at, want, loc)?);
        }
        Ok(out)
    }

    pub fn expr(&mut self, e: &Expr, loc: Loc) -> Result<(Expr, VTy), TypeError> {
        use TypeErrorKind as K;
        Ok(match e {
            Expr::Int(_) => (e.clone(), VTy::Int),
            Expr::Bool(_) => (e.clone(), VTy::Bool),
            Expr::Var(x) => {
                if let Some((_, t)) = self.vars.get(x) {
                    (e.clone(), *t)
                } else if let Some((w, _)) = self.globals.get(x) {
                    (e.clone(), VTy::Word(*w))
                } else if self.params.contains_key(x) {
                    (e.clone(), VTy::Int)
                } else {
                    return terr(loc, K::UnknownName, format!("unknown variable `{x}`"));
                }
            }
            Expr::Get {
                arr,
                view,
                scale,
                idx,
            } => {
                let (i, w) = self.index(arr, *view, *scale, idx, loc)?;
                (
                    Expr::Get {
                        arr: arr.clone(),
                        view: *view,
                        scale: *scale,
                        idx: Box::new(i),
                    },
                    VTy::Word(w),
                )
            }
            Expr::Load { width, addr } => {
                let a = self.address(addr, loc)?;
                (
                    Expr::Load {
                        width: *width,
                        addr: Box::new(a),
                    },
                    VTy::Word(*width),
                )
            }
            Expr::VecLit { lanes, bits, elems } => {
                let mut ne = Vec::new();
                for x in elems {
                    let (x2, t) = self.expr(x, loc)?;
                    if t != VTy::Int {
                        return terr(
                            loc,
                            K::NotConstant,
                            "vector literal lanes must be compile-time integers",
                        );
                    }
                    ne.push(x2);
                }
                let w = Width::from_bits(lanes * bits).expect("parser checked shape");
                (
                    Expr::VecLit {
                        lanes: *lanes,
                        bits: *bits,
                        elems: ne,
                    },
                    VTy::Word(w),
                )
            }
            Expr::Unary { op, ann, e: inner } => {
                let (x, t) = self.expr(inner, loc)?;
                let t2 = match (op, t) {
                    (UnOp::Not, VTy::Bool | VTy::Word(_) | VTy::Int) => t,
                    (UnOp::Neg, VTy::Word(_) | VTy::Int) => t,
                    _ => {
                        return terr(
                            loc,
                            K::TypeMismatch,
                            format!("operator cannot be applied to {t}"),
                        )
                    }
                };
                if let Some(a) = ann {
                    let w = a.width();
                    let x = self.to_width(x, t, w, loc)?;
                    return Ok((
                        Expr::Unary {
                            op: *op,
                            ann: *ann,
                            e: Box::new(x),
                        },
                        VTy::Word(w),
                    ));
                }
                (
                    Expr::Unary {
                        op: *op,
                        ann: None,
                        e: Box::new(x),
                    },
                    t2,
                )
            }
            Expr::Binary {
                op,
                signed,
                ann,
                l,
                r,
            } => self.binary(*op, *signed, *ann, l, r, loc)?,
            Expr::Cast {
                to,
                signed,
                e: inner,
            } => {
                let (x, t) = self.expr(inner, loc)?;
                match t {
                    VTy::Word(_) | VTy::Int => {}
                    _ => return terr(loc, K::TypeMismatch, format!("cannot cast {t} to a word")),
                }
                (
                    Expr::Cast {
                        to: *to,
                        signed: *signed,
                        e: Box::new(x),
                    },
                    VTy::Word(*to),
                )
            }
            Expr::Intrinsic { name, args } => {
                let Some(d) = isa::lookup(name) else {
                    return terr(loc, K::UnknownName, format!("unknown intrinsic `#{name}`"));
                };
                if d.dests.len() != 1 {
                    return terr(
                        loc,
                        K::TypeMismatch,
                        format!("`#{name}` produces several values"),
                    );
                }
                let args = self.intrinsic_args(d, args, loc)?;
                let t = match d.dst_types[0] {
                    ArgTy::Bool => VTy::Bool,
                    ArgTy::Word(w) => VTy::Word(w),
                };
                (
                    Expr::Intrinsic {
                        name: name.clone(),
                        args,
                    },
                    t,
                )
            }
        })
    }

    fn binary(
        &mut self,
        op: BinOp,
        signed: bool,
        ann: Option<OpAnn>,
        l: &Expr,
        r: &Expr,
        loc: Loc,
    ) -> Result<(Expr, VTy), TypeError> {
        use TypeErrorKind as K;
        let (le, lt) = self.expr(l, loc)?;
        let (re, rt) = self.expr(r, loc)?;
        let mk = |le: Expr, re: Expr, ann: Option<OpAnn>| Expr::Binary {
            op,
            signed,
            ann,
            l: Box::new(le),
            r: Box::new(re),
        };
        if op.is_logical() {
            if lt != VTy::Bool || rt != VTy::Bool || ann.is_some() {
                return terr(loc, K::TypeMismatch, "logical operators take booleans");
            }
            return Ok((mk(le, re, None), VTy::Bool));
        }
        if lt == VTy::Int && rt == VTy::Int && ann.is_none() {
            if matches!(op, BinOp::Rol | BinOp::Ror) {
                return terr(loc, K::TypeMismatch, "rotation needs a word operand");
            }
            let t = if op.is_comparison() {
                VTy::Bool
            } else {
                VTy::Int
            };
            return Ok((mk(le, re, None), t));
        }
        if lt == VTy::Bool
            && rt == VTy::Bool
            && matches!(op, BinOp::Eq | BinOp::Ne)
            && ann.is_none()
        {
            return Ok((mk(le, re, None), VTy::Bool));
        }
        if let Some(OpAnn::Vector { lanes, lane }) = ann {
            let total = Width::from_bits(lanes * lane.bits()).expect("parser checked shape");
            let desc = vector_op_name(op, lanes, lane)
                .filter(|n| isa::lookup(n).is_some())
                .ok_or_else(|| TypeError {
                    loc,
                    kind: K::TypeMismatch,
                    msg: format!(
                        "operator `{}` has no {lanes}u{} vector form",
                        op.symbol(),
                        lane.bits()
                    ),
                })?;
            let _ = desc;
            let le = self.to_width(le, lt, total, loc)?;
            let re = if op.is_shift() {
                self.count(re, rt, loc)?
            } else {
                self.to_width(re, rt, total, loc)?
            };
            return Ok((mk(le, re, ann), VTy::Word(total)));
        }
        let w = match (ann, lt, rt) {
            (Some(OpAnn::Scalar(w)), _, _) => w,
            (None, VTy::Word(a), _) if op.is_shift() => a,
            (None, VTy::Word(a), VTy::Word(b)) if a == b => a,
            (None, VTy::Word(a), VTy::Int) => a,
            (None, VTy::Int, VTy::Word(b)) => b,
            (None, VTy::Word(a), VTy::Word(b)) => {
                return terr(
                    loc,
                    K::WidthMismatch,
                    format!("operands of `{}` have types {a} and {b}", op.symbol()),
                )
            }
            _ => {
                return terr(
                    loc,
                    K::TypeMismatch,
                    format!("operator `{}` cannot combine {lt} and {rt}", op.symbol()),
                )
            }
        };
        let le = self.to_width(le, lt, w, loc)?;
        let re = if op.is_shift() {
            match rt {
                VTy::Int | VTy::Word(_) => re,
                t => return terr(loc, K::TypeMismatch, format!("shift count has type {t}")),
            }
        } else {
            self.to_width(re, rt, w, loc)?
        };
        let t = if op.is_comparison() {
            VTy::Bool
        } else {
            VTy::Word(w)
        };
        Ok((mk(le, re, Some(OpAnn::Scalar(w))), t))
    }

    /// Vector shift counts are 8-bit immediates.
    fn count(&self, e: Expr, t: VTy, loc: Loc) -> Result<Expr, TypeError> {
        match t {
            VTy::Int => Ok(Expr::cast(Width::W8, e)),
            VTy::Word(Width::W8) => Ok(e),
            VTy::Word(_) => Ok(Expr::cast(Width::W8, e)),
            t => terr(
                loc,
                TypeErrorKind::TypeMismatch,
                format!("shift count has type {t}"),
            ),
        }
    }
}

/// Descriptor implementing a lane-annotated operator.
pub fn vector_op_name(op: BinOp, lanes: u32, lane: Width) -> Option<String> {
    let total = lanes * lane.bits();
    let shape = format!("{lanes}u{}", lane.bits());
    Some(match op {
        BinOp::Add => format!("x86_VPADD_{shape}"),
        BinOp::Sub => format!("x86_VPSUB_{shape}"),
        BinOp::Shl => format!("x86_VPSLL_{shape}"),
        BinOp::Shr => format!("x86_VPSRL_{shape}"),
        BinOp::And => format!("x86_VPAND_{total}"),
        BinOp::Or => format!("x86_VPOR_{total}"),
        BinOp::Xor => format!("x86_VPXOR_{total}"),
        _ => return None,
    })
}

/// Checks one statement in the context of function `func` of a checked
/// program.
pub fn check_stmt(tp: &TypedProgram, func: &str, s: &Stmt) -> Result<Stmt, TypeError> {
    let Some(info) = tp.fns.get(func) else {
        return terr(
            s.loc,
            TypeErrorKind::UnknownName,
            format!("unknown function `{func}`"),
        );
    };
    let sigs: HashMap<String, Sig> = tp
        .fns
        .iter()
        .map(|(k, v)| (k.clone(), v.sig.clone()))
        .collect();
    let mut ck = Checker {
        params: &tp.params,
        globals: &tp.globals,
        sigs: &sigs,
        vars: info.vars.clone(),
    };
    if let StmtKind::Return(_) = s.kind {
        return Ok(ck
            .block(std::slice::from_ref(s), Some(&info.sig.results), s.loc)?
            .remove(0));
    }
    ck.stmt(s)
}
