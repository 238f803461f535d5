//! Flow-insensitive taint analysis computing the inputs that may influence
//! leakage.

use std::collections::{BTreeSet, HashMap};

use crate::ir::typecheck::FnInfo;
use crate::ir::*;
use crate::isa;

/// Label for the initial contents of memory.
pub const MEM_LABEL: &str = "@mem";

const MEM_BIT: u64 = 1 << 63;

type T = u64;

struct Fn<'a> {
    decl: &'a FnDecl,
    info: &'a FnInfo,
}

#[derive(Default)]
struct State {
    vars: HashMap<(usize, String), T>,
    arrs: HashMap<(usize, String), Vec<T>>,
    results: HashMap<usize, Vec<T>>,
    pc_in: HashMap<usize, T>,
    mem: T,
    leaked: T,
    changed: bool,
}

impl State {
    fn join_var(&mut self, f: usize, x: &str, t: T) {
        let e = self.vars.entry((f, x.to_string())).or_insert(0);
        if *e | t != *e {
            *e |= t;
            self.changed = true;
        }
    }

    fn join_bytes(
        &mut self,
        f: usize,
        x: &str,
        len: usize,
        r: Option<std::ops::Range<usize>>,
        t: T,
    ) {
        let a = self
            .arrs
            .entry((f, x.to_string()))
            .or_insert_with(|| vec![0; len]);
        let r = r.filter(|r| r.end <= a.len()).unwrap_or(0..a.len());
        for b in &mut a[r] {
            if *b | t != *b {
                *b |= t;
                self.changed = true;
            }
        }
    }

    fn join_mem(&mut self, t: T) {
        if self.mem | t != self.mem {
            self.mem |= t;
            self.changed = true;
        }
    }

    fn join_result(&mut self, f: usize, i: usize, n: usize, t: T) {
        let r = self.results.entry(f).or_insert_with(|| vec![0; n]);
        if r[i] | t != r[i] {
            r[i] |= t;
            self.changed = true;
        }
    }

    fn join_pc(&mut self, f: usize, t: T) {
        let e = self.pc_in.entry(f).or_insert(0);
        if *e | t != *e {
            *e |= t;
            self.changed = true;
        }
    }
}

struct Analysis<'a> {
    fns: Vec<Fn<'a>>,
    index: HashMap<&'a str, usize>,
    st: State,
    /// Whether addresses, indices and variable-time operands leak, besides
    /// conditions.
    data_sites: bool,
}

impl<'a> Analysis<'a> {
    fn array_len(&self, f: usize, x: &str) -> Option<(usize, crate::word::Width)> {
        match self.fns[f].info.vars.get(x)?.1 {
            VTy::Array(w, n) => Some((n * w.bytes(), w)),
            _ => None,
        }
    }

    fn span(
        &self,
        f: usize,
        arr: &str,
        view: Option<crate::word::Width>,
        scale: Scale,
        idx: &Expr,
    ) -> Option<std::ops::Range<usize>> {
        let (_, elem) = self.array_len(f, arr)?;
        let w = view.unwrap_or(elem);
        let Expr::Int(i) = idx else { return None };
        let unit = match scale {
            Scale::Elem => w.bytes(),
            Scale::Byte => 1,
        };
        let start = usize::try_from(*i).ok()?.checked_mul(unit)?;
        Some(start..start + w.bytes())
    }

    fn arr_taint(&self, f: usize, x: &str, r: Option<std::ops::Range<usize>>) -> T {
        match self.st.arrs.get(&(f, x.to_string())) {
            Some(a) => {
                let r = r.filter(|r| r.end <= a.len()).unwrap_or(0..a.len());
                a[r].iter().fold(0, |acc, t| acc | t)
            }
            None => 0,
        }
    }

    fn leak_data(&mut self, t: T) {
        if self.data_sites {
            self.leak(t);
        }
    }

    fn leak(&mut self, t: T) {
        if self.st.leaked | t != self.st.leaked {
            self.st.leaked |= t;
            self.st.changed = true;
        }
    }

    fn expr(&mut self, f: usize, e: &Expr) -> T {
        match e {
            Expr::Int(_) | Expr::Bool(_) => 0,
            Expr::Var(x) => {
                if self.array_len(f, x).is_some() {
                    self.arr_taint(f, x, None)
                } else {
                    self.st.vars.get(&(f, x.clone())).copied().unwrap_or(0)
                }
            }
            Expr::Get {
                arr,
                view,
                scale,
                idx,
            } => {
                let ti = self.expr(f, idx);
                self.leak_data(ti);
                let r = self.span(f, arr, *view, *scale, idx);
                self.arr_taint(f, arr, r)
            }
            Expr::Load { addr, .. } => {
                let ta = self.expr(f, addr);
                self.leak_data(ta);
                self.st.mem
            }
            Expr::VecLit { elems, .. } => elems.iter().fold(0, |acc, x| acc | self.expr(f, x)),
            Expr::Unary { e, .. } | Expr::Cast { e, .. } => self.expr(f, e),
            Expr::Binary { l, r, .. } => self.expr(f, l) | self.expr(f, r),
            Expr::Intrinsic { name, args } => self.intrinsic(f, name, args),
        }
    }

    fn intrinsic(&mut self, f: usize, name: &str, args: &[Expr]) -> T {
        let t = args.iter().fold(0, |acc, a| acc | self.expr(f, a));
        if isa::lookup(name).is_some_and(|d| d.variable_time) {
            self.leak_data(t);
        }
        t
    }

    fn write(&mut self, f: usize, l: &Lval, t: T) {
        match l {
            Lval::Ignore => {}
            Lval::Var(x) => match self.array_len(f, x) {
                Some((n, _)) => self.st.join_bytes(f, x, n, None, t),
                None => self.st.join_var(f, x, t),
            },
            Lval::Set {
                arr,
                view,
                scale,
                idx,
            } => {
                let ti = self.expr(f, idx);
                self.leak_data(ti);
                let r = self.span(f, arr, *view, *scale, idx);
                if let Some((n, _)) = self.array_len(f, arr) {
                    self.st.join_bytes(f, arr, n, r, t);
                }
            }
            Lval::Store { addr, .. } => {
                let ta = self.expr(f, addr);
                self.leak_data(ta);
                self.st.join_mem(t);
            }
        }
    }

    fn block(&mut self, f: usize, body: &[Stmt], pc: T) {
        for s in body {
            self.stmt(f, s, pc);
        }
    }

    fn stmt(&mut self, f: usize, s: &Stmt, pc: T) {
        match &s.kind {
            StmtKind::Decl(_) => {}
            StmtKind::Assign { lhs, rhs } => match rhs {
                Rhs::Expr(e) => {
                    let t = self.expr(f, e) | pc;
                    lhs.iter().for_each(|l| self.write(f, l, t));
                }
                Rhs::Intrinsic { name, args } => {
                    let t = self.intrinsic(f, name, args) | pc;
                    lhs.iter().for_each(|l| self.write(f, l, t));
                }
                Rhs::Call { name, args } => {
                    let g = self.index[name.as_str()];
                    let params: Vec<String> = self.fns[g]
                        .decl
                        .params
                        .iter()
                        .map(|p| p.name.clone())
                        .collect();
                    for (p, a) in params.iter().zip(args) {
                        let t = self.expr(f, a) | pc;
                        match self.array_len(g, p) {
                            Some((n, _)) => self.st.join_bytes(g, p, n, None, t),
                            None => self.st.join_var(g, p, t),
                        }
                    }
                    self.st.join_pc(g, pc);
                    let rs = self.st.results.get(&g).cloned().unwrap_or_default();
                    for (i, l) in lhs.iter().enumerate() {
                        self.write(f, l, rs.get(i).copied().unwrap_or(0) | pc);
                    }
                }
            },
            StmtKind::If { cond, then_, else_ } => {
                let c = self.expr(f, cond);
                self.leak(c);
                self.block(f, then_, pc | c);
                self.block(f, else_, pc | c);
            }
            StmtKind::While { cond, body } => {
                let c = self.expr(f, cond);
                self.leak(c);
                self.block(f, body, pc | c);
            }
            StmtKind::For {
                var,
                from,
                to,
                body,
                ..
            } => {
                let c = self.expr(f, from) | self.expr(f, to);
                self.leak(c);
                self.st.join_var(f, var, c | pc);
                self.block(f, body, pc | c);
            }
            StmtKind::Return(es) => {
                let n = es.len();
                for (i, e) in es.iter().enumerate() {
                    let t = self.expr(f, e) | pc;
                    self.st.join_result(f, i, n, t);
                }
            }
        }
    }
}

/// Entry inputs that may flow into a branch condition, a memory address, an
/// array index or a variable-time operand. Initial memory contents are
/// reported as [`MEM_LABEL`].
pub fn infer_public(tp: &TypedProgram, entry: &str) -> Result<BTreeSet<String>, TypeError> {
    leaking_inputs(tp, entry, true)
}

/// Entry inputs that may flow into a branch or loop condition.
pub fn condition_inputs(tp: &TypedProgram, entry: &str) -> Result<BTreeSet<String>, TypeError> {
    leaking_inputs(tp, entry, false)
}

fn leaking_inputs(
    tp: &TypedProgram,
    entry: &str,
    data_sites: bool,
) -> Result<BTreeSet<String>, TypeError> {
    let tp = expand(tp)?;
    let decls: Vec<&FnDecl> = tp.program.functions().collect();
    let mut a = Analysis {
        fns: decls
            .iter()
            .map(|d| Fn {
                decl: d,
                info: &tp.fns[&d.name],
            })
            .collect(),
        index: decls
            .iter()
            .enumerate()
            .map(|(i, d)| (d.name.as_str(), i))
            .collect(),
        st: State {
            mem: MEM_BIT,
            ..State::default()
        },
        data_sites,
    };
    let Some(&e) = a.index.get(entry) else {
        return Err(TypeError {
            loc: Loc::default(),
            kind: TypeErrorKind::UnknownName,
            msg: format!("unknown function `{entry}`"),
        });
    };
    let params: Vec<String> = decls[e].params.iter().map(|p| p.name.clone()).collect();
    for (i, p) in params.iter().enumerate() {
        let bit = 1u64 << i.min(62);
        match a.array_len(e, p) {
            Some((n, _)) => a.st.join_bytes(e, p, n, None, bit),
            None => a.st.join_var(e, p, bit),
        }
    }
    loop {
        a.st.changed = false;
        for f in 0..a.fns.len() {
            let pc = a.st.pc_in.get(&f).copied().unwrap_or(0);
            let d = a.fns[f].decl;
            a.block(f, &d.body, pc);
        }
        if !a.st.changed {
            break;
        }
    }
    let mut out = BTreeSet::new();
    for (i, p) in params.iter().enumerate() {
        if a.st.leaked & (1u64 << i.min(62)) != 0 {
            out.insert(p.clone());
        }
    }
    if a.st.leaked & MEM_BIT != 0 {
        out.insert(MEM_LABEL.to_string());
    }
    Ok(out)
}
