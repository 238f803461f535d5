//! Lowering of checked programs to a slot-indexed form.

use std::collections::HashMap;
use std::sync::Arc;

use crate::ir::typecheck::{veclit_word, vector_op_name, FnInfo};
use crate::ir::*;
use crate::isa::{self, Descriptor};
use crate::word::{Width, Word};

use super::{ArrayBuf, Val};

pub(crate) type Desc = &'static Arc<Descriptor>;

#[derive(Debug, Clone)]
pub(crate) enum LE {
    Const(Val),
    Var(u32),
    Get {
        arr: u32,
        w: Width,
        unit: u32,
        idx: Box<LE>,
    },
    Load {
        w: Width,
        addr: Box<LE>,
    },
    Un {
        op: UnOp,
        e: Box<LE>,
    },
    Bin {
        op: BinOp,
        signed: bool,
        l: Box<LE>,
        r: Box<LE>,
    },
    Vec {
        d: Desc,
        l: Box<LE>,
        r: Box<LE>,
    },
    Cast {
        to: Width,
        signed: bool,
        e: Box<LE>,
    },
    Intr {
        d: Desc,
        args: Vec<LE>,
    },
    VecLit {
        bits: u32,
        elems: Vec<LE>,
    },
}

#[derive(Debug, Clone)]
pub(crate) enum LL {
    Ignore,
    Var(u32),
    Set {
        arr: u32,
        w: Width,
        unit: u32,
        idx: LE,
    },
    Store {
        addr: LE,
    },
}

#[derive(Debug, Clone)]
pub(crate) enum LS {
    Assign {
        lhs: LL,
        rhs: LE,
    },
    Intr {
        lhs: Vec<LL>,
        d: Desc,
        args: Vec<LE>,
    },
    Call {
        lhs: Vec<LL>,
        f: usize,
        args: Vec<LE>,
    },
    If {
        c: LE,
        t: Vec<LStmt>,
        e: Vec<LStmt>,
    },
    While {
        c: LE,
        body: Vec<LStmt>,
    },
    For {
        var: u32,
        from: LE,
        to: LE,
        down: bool,
        body: Vec<LStmt>,
    },
    Return(Vec<LE>),
}

#[derive(Debug, Clone)]
pub(crate) struct LStmt {
    pub kind: LS,
    pub loc: Loc,
}

#[derive(Debug, Clone)]
pub(crate) struct LFn {
    pub name: String,
    pub slot_names: Vec<String>,
    pub slots: HashMap<String, u32>,
    pub params: Vec<u32>,
    pub param_tys: Vec<VTy>,
    pub init: Vec<Val>,
    pub body: Vec<LStmt>,
}

pub(crate) struct Lowerer<'a> {
    pub tp: &'a TypedProgram,
    pub fn_index: &'a HashMap<String, usize>,
}

impl Lowerer<'_> {
    pub fn function(&self, f: &FnDecl, info: &FnInfo) -> LFn {
        let mut names: Vec<&String> = info.vars.keys().collect();
        names.sort();
        let mut slots = HashMap::new();
        let mut slot_names = Vec::new();
        let mut init = Vec::new();
        for n in names {
            slots.insert(n.clone(), slot_names.len() as u32);
            slot_names.push(n.clone());
            init.push(match info.vars[n].1 {
                VTy::Array(w, len) => Val::Arr(Box::new(ArrayBuf::new(w, len))),
                _ => Val::Undef,
            });
        }
        let params = info.sig.params.iter().map(|(n, _, _)| slots[n]).collect();
        let param_tys = info.sig.params.iter().map(|(_, _, t)| *t).collect();
        let mut lf = LFn {
            name: f.name.clone(),
            slot_names,
            slots,
            params,
            param_tys,
            init,
            body: Vec::new(),
        };
        lf.body = self.block(&lf, &f.body);
        lf
    }

    pub fn block(&self, f: &LFn, body: &[Stmt]) -> Vec<LStmt> {
        body.iter().filter_map(|s| self.stmt(f, s)).collect()
    }

    pub fn stmt(&self, f: &LFn, s: &Stmt) -> Option<LStmt> {
        let kind = match &s.kind {
            StmtKind::Decl(_) => return None,
            StmtKind::Assign { lhs, rhs } => {
                let lhs: Vec<LL> = lhs.iter().map(|l| self.lval(f, l)).collect();
                match rhs {
                    Rhs::Expr(e) => LS::Assign {
                        lhs: lhs.into_iter().next().expect("one destination"),
                        rhs: self.expr(f, e),
                    },
                    Rhs::Intrinsic { name, args } => LS::Intr {
                        lhs,
                        d: isa::lookup(name).expect("checked intrinsic"),
                        args: args.iter().map(|a| self.expr(f, a)).collect(),
                    },
                    Rhs::Call { name, args } => LS::Call {
                        lhs,
                        f: self.fn_index[name],
                        args: args.iter().map(|a| self.expr(f, a)).collect(),
                    },
                }
            }
            StmtKind::If { cond, then_, else_ } => LS::If {
                c: self.expr(f, cond),
                t: self.block(f, then_),
                e: self.block(f, else_),
            },
            StmtKind::While { cond, body } => LS::While {
                c: self.expr(f, cond),
                body: self.block(f, body),
            },
            StmtKind::For {
                var,
                from,
                to,
                down,
                body,
            } => LS::For {
                var: f.slots[var],
                from: self.expr(f, from),
                to: self.expr(f, to),
                down: *down,
                body: self.block(f, body),
            },
            StmtKind::Return(es) => LS::Return(es.iter().map(|e| self.expr(f, e)).collect()),
        };
        Some(LStmt { kind, loc: s.loc })
    }

    fn access(&self, f: &LFn, arr: &str, view: Option<Width>, scale: Scale) -> (u32, Width, u32) {
        let slot = f.slots[arr];
        let Val::Arr(buf) = &f.init[slot as usize] else {
            panic!("`{arr}` is not an array")
        };
        let w = view.unwrap_or(buf.elem);
        let unit = match scale {
            Scale::Elem => w.bytes() as u32,
            Scale::Byte => 1,
        };
        (slot, w, unit)
    }

    fn lval(&self, f: &LFn, l: &Lval) -> LL {
        match l {
            Lval::Ignore => LL::Ignore,
            Lval::Var(x) => LL::Var(f.slots[x]),
            Lval::Set {
                arr,
                view,
                scale,
                idx,
            } => {
                let (arr, w, unit) = self.access(f, arr, *view, *scale);
                LL::Set {
                    arr,
                    w,
                    unit,
                    idx: self.expr(f, idx),
                }
            }
            Lval::Store { addr, .. } => LL::Store {
                addr: self.expr(f, addr),
            },
        }
    }

    pub fn expr(&self, f: &LFn, e: &Expr) -> LE {
        let bx = |e: &Expr| Box::new(self.expr(f, e));
        match e {
            Expr::Int(n) => LE::Const(Val::Int(*n)),
            Expr::Bool(b) => LE::Const(Val::Bool(*b)),
            Expr::Var(x) => {
                if let Some(s) = f.slots.get(x) {
                    LE::Var(*s)
                } else if let Some((_, w)) = self.tp.globals.get(x) {
                    LE::Const(Val::Word(*w))
                } else {
                    LE::Const(Val::Int(self.tp.params[x]))
                }
            }
            Expr::Get {
                arr,
                view,
                scale,
                idx,
            } => {
                let (arr, w, unit) = self.access(f, arr, *view, *scale);
                LE::Get {
                    arr,
                    w,
                    unit,
                    idx: bx(idx),
                }
            }
            Expr::Load { width, addr } => LE::Load {
                w: *width,
                addr: bx(addr),
            },
            Expr::VecLit { bits, elems, .. } => {
                let consts: Option<Vec<i128>> = elems
                    .iter()
                    .map(|x| if let Expr::Int(n) = x { Some(*n) } else { None })
                    .collect();
                if let Some(w) = consts.and_then(|c| veclit_word(*bits, &c)) {
                    return LE::Const(Val::Word(w));
                }
                LE::VecLit {
                    bits: *bits,
                    elems: elems.iter().map(|x| self.expr(f, x)).collect(),
                }
            }
            Expr::Unary { op, e, .. } => LE::Un { op: *op, e: bx(e) },
            Expr::Binary {
                op,
                signed,
                ann,
                l,
                r,
            } => match ann {
                Some(OpAnn::Vector { lanes, lane }) => {
                    let name = vector_op_name(*op, *lanes, *lane).expect("checked vector operator");
                    LE::Vec {
                        d: isa::lookup(&name).expect("checked vector operator"),
                        l: bx(l),
                        r: bx(r),
                    }
                }
                _ => LE::Bin {
                    op: *op,
                    signed: *signed,
                    l: bx(l),
                    r: bx(r),
                },
            },
            Expr::Cast { to, signed, e } => {
                if let Expr::Int(n) = **e {
                    return LE::Const(Val::Word(Word::from_i128(*to, n)));
                }
                LE::Cast {
                    to: *to,
                    signed: *signed,
                    e: bx(e),
                }
            }
            Expr::Intrinsic { name, args } => LE::Intr {
                d: isa::lookup(name).expect("checked intrinsic"),
                args: args.iter().map(|a| self.expr(f, a)).collect(),
            },
        }
    }
}
