//! Canonical pretty-printer. Binary operations are always parenthesized, so
//! the output reparses to the same tree.

use std::fmt::Write as _;

use super::ast::*;
use crate::word::Width;

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    let mut prev_fn = false;
    for (i, item) in p.items.iter().enumerate() {
        let is_fn = matches!(item, Item::Fn(_));
        if i > 0 && (is_fn || prev_fn) {
            out.push('\n');
        }
        prev_fn = is_fn;
        match item {
            Item::Param { name, value } => {
                let _ = writeln!(out, "param int {name} = {};", expr(value));
            }
            Item::Global { name, width, value } => {
                let _ = writeln!(out, "global {width} {name} = {};", expr(value));
            }
            Item::Fn(f) => print_fn(&mut out, f),
        }
    }
    out
}

fn print_fn(out: &mut String, f: &FnDecl) {
    let kind = match f.kind {
        FnKind::Normal => "",
        FnKind::Inline => "inline ",
        FnKind::Export => "export ",
    };
    let params: Vec<String> = f
        .params
        .iter()
        .map(|p| format!("{} {} {}", p.storage, ty(&p.ty), p.name))
        .collect();
    let _ = write!(out, "{kind}fn {}({})", f.name, params.join(", "));
    if !f.results.is_empty() {
        let rs: Vec<String> = f
            .results
            .iter()
            .map(|(s, t)| format!("{s} {}", ty(t)))
            .collect();
        let _ = write!(out, " -> {}", rs.join(", "));
    }
    out.push_str(" {\n");
    block(out, &f.body, 1);
    out.push_str("}\n");
}

pub fn ty(t: &Ty) -> String {
    match t {
        Ty::Bool => "bool".into(),
        Ty::Int => "int".into(),
        Ty::Word(w) => w.to_string(),
        Ty::Array(w, n) => format!("{w}[{}]", expr(n)),
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn block(out: &mut String, body: &[Stmt], depth: usize) {
    for s in body {
        stmt(out, s, depth);
    }
}

pub fn print_stmts(body: &[Stmt]) -> String {
    let mut out = String::new();
    block(&mut out, body, 0);
    out
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Decl(ds) => {
            let names: Vec<&str> = ds.iter().map(|d| d.name.as_str()).collect();
            let _ = writeln!(
                out,
                "{} {} {};",
                ds[0].storage,
                ty(&ds[0].ty),
                names.join(", ")
            );
        }
        StmtKind::Assign { lhs, rhs } => {
            let r = match rhs {
                Rhs::Expr(e) => expr(e),
                Rhs::Intrinsic { name, args } => call(&format!("#{name}"), args),
                Rhs::Call { name, args } => call(name, args),
            };
            if lhs.is_empty() {
                let _ = writeln!(out, "{r};");
            } else {
                let ls: Vec<String> = lhs.iter().map(lval).collect();
                let _ = writeln!(out, "{} = {r};", ls.join(", "));
            }
        }
        StmtKind::If { cond, then_, else_ } => {
            let _ = writeln!(out, "if {} {{", expr(cond));
            block(out, then_, depth + 1);
            indent(out, depth);
            if else_.is_empty() {
                out.push_str("}\n");
            } else {
                out.push_str("} else {\n");
                block(out, else_, depth + 1);
                indent(out, depth);
                out.push_str("}\n");
            }
        }
        StmtKind::While { cond, body } => {
            let _ = writeln!(out, "while {} {{", expr(cond));
            block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::For {
            var,
            from,
            to,
            down,
            body,
        } => {
            let dir = if *down { "downto" } else { "to" };
            let _ = writeln!(out, "for {var} = {} {dir} {} {{", expr(from), expr(to));
            block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Return(es) => {
            if es.is_empty() {
                out.push_str("return;\n");
            } else {
                let parts: Vec<String> = es.iter().map(expr).collect();
                let _ = writeln!(out, "return {};", parts.join(", "));
            }
        }
    }
}

fn call(name: &str, args: &[Expr]) -> String {
    let parts: Vec<String> = args.iter().map(expr).collect();
    format!("{name}({})", parts.join(", "))
}

fn view(v: Option<Width>) -> String {
    v.map(|w| format!("({w})")).unwrap_or_default()
}

fn index(arr: &str, scale: Scale, idx: &Expr) -> String {
    match scale {
        Scale::Elem => format!("{arr}[{}]", expr(idx)),
        Scale::Byte => format!("{arr}.[{}]", expr(idx)),
    }
}

pub fn lval(l: &Lval) -> String {
    match l {
        Lval::Ignore => "_".into(),
        Lval::Var(x) => x.clone(),
        Lval::Set {
            arr,
            view: v,
            scale,
            idx,
        } => format!("{}{}", view(*v), index(arr, *scale, idx)),
        Lval::Store { width, addr } => format!("({width})[{}]", expr(addr)),
    }
}

fn int(n: i128) -> String {
    if n.unsigned_abs() < 1 << 16 {
        n.to_string()
    } else if n < 0 {
        format!("-0x{:x}", n.unsigned_abs())
    } else {
        format!("0x{n:x}")
    }
}

fn ann_suffix(signed: bool, ann: Option<OpAnn>) -> String {
    match ann {
        None if signed => "s".into(),
        None => String::new(),
        Some(OpAnn::Scalar(w)) => format!("{}{}", w.bits(), if signed { 's' } else { 'u' }),
        Some(OpAnn::Vector { lanes, lane }) => format!("{lanes}u{}", lane.bits()),
    }
}

pub fn expr(e: &Expr) -> String {
    match e {
        Expr::Int(n) => int(*n),
        Expr::Bool(b) => b.to_string(),
        Expr::Var(x) => x.clone(),
        Expr::Get {
            arr,
            view: v,
            scale,
            idx,
        } => format!("{}{}", view(*v), index(arr, *scale, idx)),
        Expr::Load { width, addr } => format!("({width})[{}]", expr(addr)),
        Expr::VecLit { lanes, bits, elems } => {
            let parts: Vec<String> = elems.iter().map(expr).collect();
            format!("({lanes}u{bits})[{}]", parts.join(", "))
        }
        Expr::Unary { op, ann, e } => {
            let sym = match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            };
            let a = ann_suffix(false, *ann);
            if a.is_empty() {
                format!("({sym}{})", expr(e))
            } else {
                format!("({sym}{a} {})", expr(e))
            }
        }
        Expr::Binary {
            op,
            signed,
            ann,
            l,
            r,
        } => {
            format!(
                "({} {}{} {})",
                expr(l),
                op.symbol(),
                ann_suffix(*signed, *ann),
                expr(r)
            )
        }
        Expr::Cast { to, signed, e } => {
            format!(
                "({}{}){}",
                to.bits(),
                if *signed { 's' } else { 'u' },
                expr(e)
            )
        }
        Expr::Intrinsic { name, args } => call(&format!("#{name}"), args),
    }
}
