//! Expansion: parameter substitution, inlining, loop unrolling, constant
//! propagation and global merging.
//!
//! The result contains no parameters, inline variables, `for` loops or
//! inline functions, and every declaration sits at the top of its function.

use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::typecheck::{
    eval_word, int_binop, typecheck, FnInfo, TypeError, TypeErrorKind as K, TypedProgram, VTy,
};
use crate::word::{Width, Word};

pub const MAX_UNROLL: i128 = 1 << 16;
const MAX_STMTS: usize = 1 << 22;

fn err<T>(loc: Loc, kind: K, msg: impl Into<String>) -> Result<T, TypeError> {
    Err(TypeError {
        loc,
        kind,
        msg: msg.into(),
    })
}

fn fresh(used: &mut HashSet<String>, base: &str) -> String {
    let mut name = base.to_string();
    let mut k = 1;
    while used.contains(&name) {
        name = format!("{base}_{k}");
        k += 1;
    }
    used.insert(name.clone());
    name
}

pub fn vty_to_ty(t: VTy) -> Ty {
    match t {
        VTy::Bool => Ty::Bool,
        VTy::Int => Ty::Int,
        VTy::Word(w) => Ty::Word(w),
        VTy::Array(w, n) => Ty::Array(w, Box::new(Expr::Int(n as i128))),
    }
}

/// Canonical constant expression denoting `w`.
pub fn word_expr(w: &Word) -> Expr {
    if w.width().bits() <= 64 {
        return Expr::Int(w.low_u64() as i128);
    }
    let limbs = w.width().limbs();
    let elems = (0..limbs)
        .rev()
        .map(|i| Expr::Int(w.limbs()[i] as i128))
        .collect();
    Expr::VecLit {
        lanes: limbs as u32,
        bits: 64,
        elems,
    }
}

struct Frame<'a> {
    info: &'a FnInfo,
    fname: &'a str,
    top: bool,
    consts: HashMap<String, Option<Expr>>,
    rename: HashMap<String, String>,
    gmap: HashMap<String, String>,
    ret: Option<Vec<Expr>>,
}

impl Frame<'_> {
    fn storage(&self, x: &str) -> Option<Storage> {
        self.info.vars.get(x).map(|(s, _)| *s)
    }
}

struct Expander<'a> {
    tp: &'a TypedProgram,
    used: HashSet<String>,
    globals: Vec<(String, Width, Word)>,
    by_value: HashMap<(Width, Word), String>,
    grename: HashMap<String, String>,
    decls: Vec<VarDecl>,
}

pub fn expand(tp: &TypedProgram) -> Result<TypedProgram, TypeError> {
    let mut used = HashSet::new();
    for item in &tp.program.items {
        match item {
            Item::Param { name, .. } => {
                used.insert(name.clone());
            }
            Item::Fn(f) => {
                used.insert(f.name.clone());
            }
            Item::Global { .. } => {}
        }
    }
    for info in tp.fns.values() {
        for (x, (st, _)) in &info.vars {
            if *st != Storage::Global {
                used.insert(x.clone());
            }
        }
    }
    let mut ex = Expander {
        tp,
        used,
        globals: Vec::new(),
        by_value: HashMap::new(),
        grename: HashMap::new(),
        decls: Vec::new(),
    };
    for (name, width, _) in tp.program.globals() {
        let (_, v) = tp.globals[name];
        let canon = ex.intern(name, width, v);
        ex.grename.insert(name.to_string(), canon);
    }
    let mut fns = Vec::new();
    for f in tp.program.functions() {
        if f.kind != FnKind::Inline {
            fns.push(ex.expand_fn(f, &tp.fns[&f.name])?);
        }
    }
    let mut items: Vec<Item> = ex
        .globals
        .iter()
        .map(|(name, width, v)| Item::Global {
            name: name.clone(),
            width: *width,
            value: word_expr(v),
        })
        .collect();
    items.extend(fns.into_iter().map(Item::Fn));
    typecheck(&Program { items })
}

impl<'a> Expander<'a> {
    fn intern(&mut self, preferred: &str, width: Width, v: Word) -> String {
        if let Some(n) = self.by_value.get(&(width, v)) {
            return n.clone();
        }
        let name = fresh(&mut self.used, preferred);
        self.by_value.insert((width, v), name.clone());
        self.globals.push((name.clone(), width, v));
        name
    }

    fn expand_fn(&mut self, fd: &'a FnDecl, info: &'a FnInfo) -> Result<FnDecl, TypeError> {
        let mut frame = Frame {
            info,
            fname: &fd.name,
            top: true,
            consts: HashMap::new(),
            rename: HashMap::new(),
            gmap: HashMap::new(),
            ret: None,
        };
        for (x, (st, _)) in &info.vars {
            match st {
                Storage::Inline => {
                    frame.consts.insert(x.clone(), None);
                }
                Storage::Global => {}
                _ => {
                    frame.rename.insert(x.clone(), x.clone());
                }
            }
        }
        let mut params = Vec::new();
        for (name, st, t) in &info.sig.params {
            if matches!(st, Storage::Inline | Storage::Global) {
                return err(
                    fd.loc,
                    K::NotConstant,
                    format!("`{}` cannot take {st} parameter `{name}`", fd.name),
                );
            }
            params.push(VarDecl {
                name: name.clone(),
                storage: *st,
                ty: vty_to_ty(*t),
            });
        }
        self.decls.clear();
        let mut order = Vec::new();
        walk_stmts(&fd.body, &mut |s| {
            if let StmtKind::Decl(ds) = &s.kind {
                order.extend(ds.iter().map(|d| d.name.clone()));
            }
        });
        for x in order {
            let (st, t) = info.vars[&x];
            if matches!(st, Storage::Reg | Storage::Stack) {
                self.decls.push(VarDecl {
                    name: x,
                    storage: st,
                    ty: vty_to_ty(t),
                });
            }
        }
        let mut out = Vec::new();
        self.block(&mut frame, &fd.body, &mut out, fd.loc)?;
        let mut body: Vec<Stmt> = self
            .decls
            .drain(..)
            .map(|d| Stmt::new(StmtKind::Decl(vec![d]), Loc::default()))
            .collect();
        body.extend(out);
        let results = info
            .sig
            .results
            .iter()
            .map(|(s, t)| (*s, vty_to_ty(*t)))
            .collect();
        Ok(FnDecl {
            name: fd.name.clone(),
            kind: fd.kind,
            params,
            results,
            body,
            loc: fd.loc,
        })
    }

    fn push(&self, out: &mut Vec<Stmt>, s: Stmt) -> Result<(), TypeError> {
        if out.len() >= MAX_STMTS {
            return err(
                s.loc,
                K::NotConstant,
                "expansion produces too many statements",
            );
        }
        out.push(s);
        Ok(())
    }

    fn var(&self, f: &Frame, x: &str, loc: Loc) -> Result<Expr, TypeError> {
        if let Some(c) = f.consts.get(x) {
            return match c {
                Some(e) => Ok(e.clone()),
                None => err(
                    loc,
                    K::NotConstant,
                    format!("inline variable `{x}` has no compile-time value here"),
                ),
            };
        }
        if let Some(g) = f.gmap.get(x) {
            return Ok(Expr::Var(g.clone()));
        }
        if let Some(r) = f.rename.get(x) {
            return Ok(Expr::Var(r.clone()));
        }
        if f.storage(x) == Some(Storage::Global) {
            return err(
                loc,
                K::NotConstant,
                format!("global variable `{x}` read before assignment"),
            );
        }
        if let Some(g) = self.grename.get(x) {
            return Ok(Expr::Var(g.clone()));
        }
        if let Some(v) = self.tp.params.get(x) {
            return Ok(Expr::Int(*v));
        }
        err(loc, K::UnknownName, format!("unknown variable `{x}`"))
    }

    fn arr(&self, f: &Frame, a: &str, loc: Loc) -> Result<String, TypeError> {
        match f.rename.get(a) {
            Some(r) => Ok(r.clone()),
            None => err(loc, K::UnknownName, format!("unknown array `{a}`")),
        }
    }

    fn subst(&self, f: &Frame, e: &Expr, loc: Loc) -> Result<Expr, TypeError> {
        let bx =
            |e: &Expr| -> Result<Box<Expr>, TypeError> { Ok(Box::new(self.subst(f, e, loc)?)) };
        Ok(match e {
            Expr::Int(_) | Expr::Bool(_) => e.clone(),
            Expr::Var(x) => self.var(f, x, loc)?,
            Expr::Get {
                arr,
                view,
                scale,
                idx,
            } => Expr::Get {
                arr: self.arr(f, arr, loc)?,
                view: *view,
                scale: *scale,
                idx: bx(idx)?,
            },
            Expr::Load { width, addr } => Expr::Load {
                width: *width,
                addr: bx(addr)?,
            },
            Expr::VecLit { lanes, bits, elems } => Expr::VecLit {
                lanes: *lanes,
                bits: *bits,
                elems: elems
                    .iter()
                    .map(|x| self.subst(f, x, loc))
                    .collect::<Result<_, _>>()?,
            },
            Expr::Unary { op, ann, e } => fold_unary(*op, *ann, self.subst(f, e, loc)?),
            Expr::Binary {
                op,
                signed,
                ann,
                l,
                r,
            } => {
                let l = self.subst(f, l, loc)?;
                let r = self.subst(f, r, loc)?;
                fold_binary(*op, *signed, *ann, l, r, loc)?
            }
            Expr::Cast { to, signed, e } => Expr::Cast {
                to: *to,
                signed: *signed,
                e: bx(e)?,
            },
            Expr::Intrinsic { name, args } => Expr::Intrinsic {
                name: name.clone(),
                args: args
                    .iter()
                    .map(|x| self.subst(f, x, loc))
                    .collect::<Result<_, _>>()?,
            },
        })
    }

    fn lval(&self, f: &Frame, l: &Lval, loc: Loc) -> Result<Lval, TypeError> {
        Ok(match l {
            Lval::Ignore => Lval::Ignore,
            Lval::Var(x) => {
                if f.consts.contains_key(x) || f.storage(x) == Some(Storage::Global) {
                    return err(
                        loc,
                        K::NotConstant,
                        format!("`{x}` is assigned a run-time value"),
                    );
                }
                Lval::Var(self.arr(f, x, loc)?)
            }
            Lval::Set {
                arr,
                view,
                scale,
                idx,
            } => Lval::Set {
                arr: self.arr(f, arr, loc)?,
                view: *view,
                scale: *scale,
                idx: self.subst(f, idx, loc)?,
            },
            Lval::Store { width, addr } => Lval::Store {
                width: *width,
                addr: self.subst(f, addr, loc)?,
            },
        })
    }

    /// Assigns an already substituted expression to a destination of frame `f`.
    fn assign_expr(
        &mut self,
        f: &mut Frame,
        l: &Lval,
        r: Expr,
        loc: Loc,
        out: &mut Vec<Stmt>,
    ) -> Result<(), TypeError> {
        if let Lval::Var(x) = l {
            if f.consts.contains_key(x) {
                if !matches!(r, Expr::Int(_) | Expr::Bool(_)) {
                    return err(
                        loc,
                        K::NotConstant,
                        format!("inline variable `{x}` needs a compile-time value"),
                    );
                }
                f.consts.insert(x.clone(), Some(r));
                return Ok(());
            }
            if f.storage(x) == Some(Storage::Global) {
                let (_, t) = f.info.vars[x];
                let VTy::Word(w) = t else {
                    return err(
                        loc,
                        K::TypeMismatch,
                        format!("global variable `{x}` must be a word"),
                    );
                };
                let Some(v) = eval_word(&r, w, &|_| None) else {
                    return err(
                        loc,
                        K::NotConstant,
                        format!("global variable `{x}` needs a compile-time value"),
                    );
                };
                let name = self.intern(x, w, v);
                f.gmap.insert(x.clone(), name);
                return Ok(());
            }
        }
        let l = self.lval(f, l, loc)?;
        if l == Lval::Ignore {
            return Ok(());
        }
        self.push(
            out,
            Stmt::new(
                StmtKind::Assign {
                    lhs: vec![l],
                    rhs: Rhs::Expr(r),
                },
                loc,
            ),
        )
    }

    fn block(
        &mut self,
        f: &mut Frame<'a>,
        body: &'a [Stmt],
        out: &mut Vec<Stmt>,
        _loc: Loc,
    ) -> Result<(), TypeError> {
        for s in body {
            self.stmt(f, s, out)?;
        }
        Ok(())
    }

    fn stmt(
        &mut self,
        f: &mut Frame<'a>,
        s: &'a Stmt,
        out: &mut Vec<Stmt>,
    ) -> Result<(), TypeError> {
        let loc = s.loc;
        match &s.kind {
            StmtKind::Decl(_) => {}
            StmtKind::Assign { lhs, rhs } => match rhs {
                Rhs::Expr(e) => {
                    let r = self.subst(f, e, loc)?;
                    self.assign_expr(f, &lhs[0], r, loc, out)?;
                }
                Rhs::Intrinsic { name, args } => {
                    let args = args
                        .iter()
                        .map(|a| self.subst(f, a, loc))
                        .collect::<Result<_, _>>()?;
                    let lhs = lhs
                        .iter()
                        .map(|l| self.lval(f, l, loc))
                        .collect::<Result<_, _>>()?;
                    let st = StmtKind::Assign {
                        lhs,
                        rhs: Rhs::Intrinsic {
                            name: name.clone(),
                            args,
                        },
                    };
                    self.push(out, Stmt::new(st, loc))?;
                }
                Rhs::Call { name, args } => {
                    let tp: &'a TypedProgram = self.tp;
                    let callee = tp.function(name).expect("checked call");
                    if callee.kind == FnKind::Inline {
                        self.inline_call(f, lhs, callee, args, loc, out)?;
                    } else {
                        let args = args
                            .iter()
                            .map(|a| self.subst(f, a, loc))
                            .collect::<Result<_, _>>()?;
                        let lhs = lhs
                            .iter()
                            .map(|l| self.lval(f, l, loc))
                            .collect::<Result<_, _>>()?;
                        let st = StmtKind::Assign {
                            lhs,
                            rhs: Rhs::Call {
                                name: name.clone(),
                                args,
                            },
                        };
                        self.push(out, Stmt::new(st, loc))?;
                    }
                }
            },
            StmtKind::If { cond, then_, else_ } => {
                let c = self.subst(f, cond, loc)?;
                if let Expr::Bool(b) = c {
                    return self.block(f, if b { then_ } else { else_ }, out, loc);
                }
                let saved = f.consts.clone();
                let gsaved = f.gmap.clone();
                let mut t = Vec::new();
                self.block(f, then_, &mut t, loc)?;
                let after_then = std::mem::replace(&mut f.consts, saved);
                let gthen = std::mem::replace(&mut f.gmap, gsaved.clone());
                let mut e = Vec::new();
                self.block(f, else_, &mut e, loc)?;
                if f.gmap != gsaved || gthen != gsaved {
                    return err(
                        loc,
                        K::NotConstant,
                        "global variable assigned under a run-time condition",
                    );
                }
                for (x, v) in after_then {
                    if f.consts.get(&x) != Some(&v) {
                        f.consts.insert(x, None);
                    }
                }
                self.push(
                    out,
                    Stmt::new(
                        StmtKind::If {
                            cond: c,
                            then_: t,
                            else_: e,
                        },
                        loc,
                    ),
                )?;
            }
            StmtKind::While { cond, body } => {
                let assigned = inline_assigned(f, body);
                for x in &assigned {
                    f.consts.insert(x.clone(), None);
                }
                let c = self.subst(f, cond, loc)?;
                if c == Expr::Bool(false) {
                    return Ok(());
                }
                let gsaved = f.gmap.clone();
                let mut b = Vec::new();
                self.block(f, body, &mut b, loc)?;
                if f.gmap != gsaved {
                    return err(
                        loc,
                        K::NotConstant,
                        "global variable assigned inside a while loop",
                    );
                }
                for x in &assigned {
                    f.consts.insert(x.clone(), None);
                }
                self.push(out, Stmt::new(StmtKind::While { cond: c, body: b }, loc))?;
            }
            StmtKind::For {
                var,
                from,
                to,
                down,
                body,
            } => {
                let (Expr::Int(a), Expr::Int(b)) =
                    (self.subst(f, from, loc)?, self.subst(f, to, loc)?)
                else {
                    return err(
                        loc,
                        K::NotConstant,
                        "loop bounds are not compile-time constants",
                    );
                };
                let count = if *down { a - b + 1 } else { b - a + 1 };
                if count > MAX_UNROLL {
                    return err(
                        loc,
                        K::NotConstant,
                        format!("loop of {count} iterations exceeds the unroll limit"),
                    );
                }
                for k in 0..count.max(0) {
                    let v = if *down { a - k } else { a + k };
                    f.consts.insert(var.clone(), Some(Expr::Int(v)));
                    self.block(f, body, out, loc)?;
                }
            }
            StmtKind::Return(es) => {
                let es: Vec<Expr> = es
                    .iter()
                    .map(|e| self.subst(f, e, loc))
                    .collect::<Result<_, _>>()?;
                if f.top {
                    self.push(out, Stmt::new(StmtKind::Return(es), loc))?;
                } else {
                    f.ret = Some(es);
                }
            }
        }
        Ok(())
    }

    fn inline_call(
        &mut self,
        f: &mut Frame<'a>,
        lhs: &[Lval],
        callee: &'a FnDecl,
        args: &[Expr],
        loc: Loc,
        out: &mut Vec<Stmt>,
    ) -> Result<(), TypeError> {
        let tp: &'a TypedProgram = self.tp;
        let info = &tp.fns[&callee.name];
        let mut cf = Frame {
            info,
            fname: &callee.name,
            top: false,
            consts: HashMap::new(),
            rename: HashMap::new(),
            gmap: HashMap::new(),
            ret: None,
        };
        let mut order: Vec<String> = info.sig.params.iter().map(|(n, _, _)| n.clone()).collect();
        walk_stmts(&callee.body, &mut |s| {
            if let StmtKind::Decl(ds) = &s.kind {
                order.extend(ds.iter().map(|d| d.name.clone()));
            }
        });
        for x in order {
            let (st, t) = info.vars[&x];
            match st {
                Storage::Inline => {
                    cf.consts.insert(x, None);
                }
                Storage::Global => {}
                _ => {
                    let n = fresh(&mut self.used, &format!("{x}_{}", cf.fname));
                    self.decls.push(VarDecl {
                        name: n.clone(),
                        storage: st,
                        ty: vty_to_ty(t),
                    });
                    cf.rename.insert(x, n);
                }
            }
        }
        for ((pname, st, _), a) in info.sig.params.iter().zip(args) {
            let a = self.subst(f, a, loc)?;
            match st {
                Storage::Inline => {
                    if !matches!(a, Expr::Int(_) | Expr::Bool(_)) {
                        return err(
                            loc,
                            K::NotConstant,
                            format!("argument `{pname}` of `{}` must be constant", callee.name),
                        );
                    }
                    cf.consts.insert(pname.clone(), Some(a));
                }
                Storage::Global => {
                    return err(
                        loc,
                        K::BadCall,
                        format!("parameter `{pname}` cannot be global"),
                    );
                }
                _ => {
                    let st = StmtKind::Assign {
                        lhs: vec![Lval::Var(cf.rename[pname].clone())],
                        rhs: Rhs::Expr(a),
                    };
                    self.push(out, Stmt::new(st, loc))?;
                }
            }
        }
        self.block(&mut cf, &callee.body, out, loc)?;
        let rets = cf.ret.take().unwrap_or_default();
        for (l, r) in lhs.iter().zip(rets) {
            self.assign_expr(f, l, r, loc, out)?;
        }
        Ok(())
    }
}

/// Inline variables of `f` assigned anywhere in `body`.
fn inline_assigned(f: &Frame, body: &[Stmt]) -> Vec<String> {
    let mut xs = Vec::new();
    walk_stmts(body, &mut |s| match &s.kind {
        StmtKind::Assign { lhs, .. } => {
            for l in lhs {
                if let Lval::Var(x) = l {
                    if f.consts.contains_key(x) && !xs.contains(x) {
                        xs.push(x.clone());
                    }
                }
            }
        }
        StmtKind::For { var, .. } if !xs.contains(var) => xs.push(var.clone()),
        _ => {}
    });
    xs
}

fn fold_unary(op: UnOp, ann: Option<OpAnn>, e: Expr) -> Expr {
    match (op, ann, &e) {
        (UnOp::Neg, None, Expr::Int(n)) if n.checked_neg().is_some() => Expr::Int(-n),
        (UnOp::Not, None, Expr::Int(n)) => Expr::Int(!n),
        (UnOp::Not, None, Expr::Bool(b)) => Expr::Bool(!b),
        _ => Expr::Unary {
            op,
            ann,
            e: Box::new(e),
        },
    }
}

fn fold_binary(
    op: BinOp,
    signed: bool,
    ann: Option<OpAnn>,
    l: Expr,
    r: Expr,
    loc: Loc,
) -> Result<Expr, TypeError> {
    match (&l, &r) {
        (Expr::Int(a), Expr::Int(b)) if ann.is_none() => {
            let Some(v) = int_binop(op, *a, *b) else {
                return err(
                    loc,
                    K::NotConstant,
                    format!("constant `{a} {} {b}` overflows", op.symbol()),
                );
            };
            return Ok(if op.is_comparison() {
                Expr::Bool(v != 0)
            } else {
                Expr::Int(v)
            });
        }
        (Expr::Bool(a), Expr::Bool(b)) if matches!(op, BinOp::Eq | BinOp::Ne) => {
            return Ok(Expr::Bool((a == b) == (op == BinOp::Eq)));
        }
        (Expr::Bool(a), _) if op == BinOp::LAnd => {
            return Ok(if *a { r } else { Expr::Bool(false) })
        }
        (Expr::Bool(a), _) if op == BinOp::LOr => return Ok(if *a { Expr::Bool(true) } else { r }),
        _ => {}
    }
    Ok(Expr::Binary {
        op,
        signed,
        ann,
        l: Box::new(l),
        r: Box::new(r),
    })
}
