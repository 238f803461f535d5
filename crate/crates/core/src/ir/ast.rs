//! Abstract syntax of the assembly-level language.

use std::fmt;

use crate::word::Width;

/// Source position. Positions never take part in AST equality, so a program
/// and its pretty-printed reparse compare equal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Loc {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Loc {
    fn eq(&self, _: &Loc) -> bool {
        true
    }
}

impl Eq for Loc {}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Storage {
    Reg,
    Stack,
    Inline,
    Global,
}

impl fmt::Display for Storage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Storage::Reg => "reg",
            Storage::Stack => "stack",
            Storage::Inline => "inline",
            Storage::Global => "global",
        })
    }
}

/// Declared type. Array lengths are expressions over parameters until
/// expansion replaces them by literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ty {
    Bool,
    Int,
    Word(Width),
    Array(Width, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub storage: Storage,
    pub ty: Ty,
}

/// How an array index is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scale {
    /// `a[i]`: the index counts elements of the access width.
    Elem,
    /// `a.[i]`: the index counts bytes.
    Byte,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Rol,
    Ror,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    LAnd,
    LOr,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Xor => "^",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::Rol => "<<r",
            BinOp::Ror => ">>r",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::LAnd => "&&",
            BinOp::LOr => "||",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn is_shift(self) -> bool {
        matches!(self, BinOp::Shl | BinOp::Shr | BinOp::Rol | BinOp::Ror)
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::LAnd | BinOp::LOr)
    }
}

/// Operator annotation: a scalar width (`+64u`) or a lane shape (`+4u64`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpAnn {
    Scalar(Width),
    Vector { lanes: u32, lane: Width },
}

impl OpAnn {
    /// Total width the operator works on.
    pub fn width(self) -> Width {
        match self {
            OpAnn::Scalar(w) => w,
            OpAnn::Vector { lanes, lane } => {
                Width::from_bits(lanes * lane.bits()).expect("checked lane shape")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Int(i128),
    Bool(bool),
    Var(String),
    /// Array read. `view` is the access width (element width when `None`).
    Get {
        arr: String,
        view: Option<Width>,
        scale: Scale,
        idx: Box<Expr>,
    },
    /// Little-endian memory read.
    Load {
        width: Width,
        addr: Box<Expr>,
    },
    /// `(NuM)[e_{N-1}, ..., e_0]`: the first element is the most significant
    /// lane.
    VecLit {
        lanes: u32,
        bits: u32,
        elems: Vec<Expr>,
    },
    Unary {
        op: UnOp,
        ann: Option<OpAnn>,
        e: Box<Expr>,
    },
    Binary {
        op: BinOp,
        signed: bool,
        ann: Option<OpAnn>,
        l: Box<Expr>,
        r: Box<Expr>,
    },
    /// `(Wu)e` zero-extends or truncates; `(Ws)e` sign-extends or truncates.
    Cast {
        to: Width,
        signed: bool,
        e: Box<Expr>,
    },
    /// Single-result intrinsic in expression position.
    Intrinsic {
        name: String,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary {
            op,
            signed: false,
            ann: None,
            l: Box::new(l),
            r: Box::new(r),
        }
    }

    pub fn cast(to: Width, e: Expr) -> Expr {
        Expr::Cast {
            to,
            signed: false,
            e: Box::new(e),
        }
    }

    /// Visits this expression and all subexpressions, parents first.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Int(_) | Expr::Bool(_) | Expr::Var(_) => {}
            Expr::Get { idx, .. } => idx.walk(f),
            Expr::Load { addr, .. } => addr.walk(f),
            Expr::VecLit { elems, .. } | Expr::Intrinsic { args: elems, .. } => {
                elems.iter().for_each(|e| e.walk(f))
            }
            Expr::Unary { e, .. } | Expr::Cast { e, .. } => e.walk(f),
            Expr::Binary { l, r, .. } => {
                l.walk(f);
                r.walk(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lval {
    /// `_`: the value is discarded.
    Ignore,
    Var(String),
    Set {
        arr: String,
        view: Option<Width>,
        scale: Scale,
        idx: Expr,
    },
    Store {
        width: Width,
        addr: Expr,
    },
}

impl Lval {
    /// The expression reading the same location.
    pub fn as_expr(&self) -> Option<Expr> {
        Some(match self {
            Lval::Ignore => return None,
            Lval::Var(x) => Expr::Var(x.clone()),
            Lval::Set {
                arr,
                view,
                scale,
                idx,
            } => Expr::Get {
                arr: arr.clone(),
                view: *view,
                scale: *scale,
                idx: Box::new(idx.clone()),
            },
            Lval::Store { width, addr } => Expr::Load {
                width: *width,
                addr: Box::new(addr.clone()),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rhs {
    Expr(Expr),
    Intrinsic { name: String, args: Vec<Expr> },
    Call { name: String, args: Vec<Expr> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Decl(Vec<VarDecl>),
    Assign {
        lhs: Vec<Lval>,
        rhs: Rhs,
    },
    If {
        cond: Expr,
        then_: Vec<Stmt>,
        else_: Vec<Stmt>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    /// Counted loop; both bounds are inclusive.
    For {
        var: String,
        from: Expr,
        to: Expr,
        down: bool,
        body: Vec<Stmt>,
    },
    Return(Vec<Expr>),
}

impl Stmt {
    pub fn new(kind: StmtKind, loc: Loc) -> Stmt {
        Stmt { kind, loc }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FnKind {
    Normal,
    Inline,
    Export,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FnDecl {
    pub name: String,
    pub kind: FnKind,
    pub params: Vec<VarDecl>,
    pub results: Vec<(Storage, Ty)>,
    pub body: Vec<Stmt>,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Param {
        name: String,
        value: Expr,
    },
    Global {
        name: String,
        width: Width,
        value: Expr,
    },
    Fn(FnDecl),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub items: Vec<Item>,
}

impl Program {
    pub fn functions(&self) -> impl Iterator<Item = &FnDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Fn(f) => Some(f),
            _ => None,
        })
    }

    pub fn function(&self, name: &str) -> Option<&FnDecl> {
        self.functions().find(|f| f.name == name)
    }

    pub fn globals(&self) -> impl Iterator<Item = (&str, Width, &Expr)> {
        self.items.iter().filter_map(|i| match i {
            Item::Global { name, width, value } => Some((name.as_str(), *width, value)),
            _ => None,
        })
    }
}

/// Visits every statement, parents before children.
pub fn walk_stmts<'a>(body: &'a [Stmt], f: &mut impl FnMut(&'a Stmt)) {
    for s in body {
        f(s);
        match &s.kind {
            StmtKind::If { then_, else_, .. } => {
                walk_stmts(then_, f);
                walk_stmts(else_, f);
            }
            StmtKind::While { body, .. } | StmtKind::For { body, .. } => walk_stmts(body, f),
            _ => {}
        }
    }
}
