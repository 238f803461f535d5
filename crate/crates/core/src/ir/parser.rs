//! Recursive-descent parser.

use super::ast::*;
use super::lexer::{tokenize, RawAnn, Tok, Token};
use super::ParseError;
use crate::isa::{self, ArgLoc, Flag};
use crate::word::Width;

const KEYWORDS: &[&str] = &[
    "fn", "inline", "export", "param", "global", "reg", "stack", "int", "bool", "if", "else",
    "while", "for", "to", "downto", "return", "true", "false", "u8", "u16", "u32", "u64", "u128",
    "u256",
];

pub(crate) fn width_of_ident(s: &str) -> Option<Width> {
    s.strip_prefix('u')
        .and_then(|n| n.parse().ok())
        .and_then(Width::from_bits)
}

fn storage_of(s: &str) -> Option<Storage> {
    Some(match s {
        "reg" => Storage::Reg,
        "stack" => Storage::Stack,
        "inline" => Storage::Inline,
        "global" => Storage::Global,
        _ => return None,
    })
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn loc(&self) -> Loc {
        self.toks[self.pos].loc
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        Err(ParseError {
            loc: self.loc(),
            msg: msg.into(),
        })
    }

    fn expect(&mut self, t: Tok, what: &str) -> PResult<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn is_ident(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == s)
    }

    fn eat_ident(&mut self, s: &str) -> bool {
        if self.is_ident(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn name(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            t => self.err(format!("expected a name, found {}", describe(&t))),
        }
    }

    fn program(&mut self) -> PResult<Program> {
        let mut items = Vec::new();
        while *self.peek() != Tok::Eof {
            items.push(self.item()?);
        }
        Ok(Program { items })
    }

    fn item(&mut self) -> PResult<Item> {
        if self.eat_ident("param") {
            if !self.eat_ident("int") {
                return self.err("parameters have type int");
            }
            let name = self.name()?;
            self.expect(Tok::Assign, "`=`")?;
            let value = self.expr()?;
            self.expect(Tok::Semi, "`;`")?;
            return Ok(Item::Param { name, value });
        }
        if self.is_ident("global") && !matches!(self.peek_at(1), Tok::Ident(f) if f == "fn") {
            self.bump();
            let width = self.word_type()?;
            let name = self.name()?;
            self.expect(Tok::Assign, "`=`")?;
            let value = self.expr()?;
            self.expect(Tok::Semi, "`;`")?;
            return Ok(Item::Global { name, width, value });
        }
        let loc = self.loc();
        let kind = if self.eat_ident("inline") {
            FnKind::Inline
        } else if self.eat_ident("export") {
            FnKind::Export
        } else {
            FnKind::Normal
        };
        if !self.eat_ident("fn") {
            return self.err(format!("expected an item, found {}", describe(self.peek())));
        }
        let name = self.name()?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let storage = self.storage()?;
                let ty = self.ty()?;
                let name = self.name()?;
                params.push(VarDecl { name, storage, ty });
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        let mut results = Vec::new();
        if *self.peek() == Tok::Arrow {
            self.bump();
            loop {
                let storage = self.storage()?;
                results.push((storage, self.ty()?));
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        let body = self.block()?;
        Ok(Item::Fn(FnDecl {
            name,
            kind,
            params,
            results,
            body,
            loc,
        }))
    }

    fn storage(&mut self) -> PResult<Storage> {
        if let Tok::Ident(s) = self.peek() {
            if let Some(st) = storage_of(s) {
                self.bump();
                return Ok(st);
            }
        }
        self.err(format!(
            "expected a storage class, found {}",
            describe(self.peek())
        ))
    }

    fn word_type(&mut self) -> PResult<Width> {
        if let Tok::Ident(s) = self.peek() {
            if let Some(w) = width_of_ident(s) {
                self.bump();
                return Ok(w);
            }
        }
        self.err(format!(
            "expected a word type, found {}",
            describe(self.peek())
        ))
    }

    fn ty(&mut self) -> PResult<Ty> {
        if self.eat_ident("int") {
            return Ok(Ty::Int);
        }
        if self.eat_ident("bool") {
            return Ok(Ty::Bool);
        }
        let w = self.word_type()?;
        if *self.peek() == Tok::LBrack {
            self.bump();
            let len = self.expr()?;
            self.expect(Tok::RBrack, "`]`")?;
            return Ok(Ty::Array(w, Box::new(len)));
        }
        Ok(Ty::Word(w))
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return self.err("unexpected end of input inside a block");
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        let kind = match self.peek().clone() {
            Tok::Ident(s) if storage_of(&s).is_some() => {
                let storage = self.storage()?;
                let ty = self.ty()?;
                let mut decls = vec![VarDecl {
                    name: self.name()?,
                    storage,
                    ty: ty.clone(),
                }];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    decls.push(VarDecl {
                        name: self.name()?,
                        storage,
                        ty: ty.clone(),
                    });
                }
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Decl(decls)
            }
            Tok::Ident(s) if s == "if" => return self.if_stmt(),
            Tok::Ident(s) if s == "while" => {
                self.bump();
                let cond = self.expr()?;
                let body = self.block()?;
                StmtKind::While { cond, body }
            }
            Tok::Ident(s) if s == "for" => {
                self.bump();
                let var = self.name()?;
                self.expect(Tok::Assign, "`=`")?;
                let from = self.expr()?;
                let down = if self.eat_ident("to") {
                    false
                } else if self.eat_ident("downto") {
                    true
                } else {
                    return self.err("expected `to` or `downto`");
                };
                let to = self.expr()?;
                let body = self.block()?;
                StmtKind::For {
                    var,
                    from,
                    to,
                    down,
                    body,
                }
            }
            Tok::Ident(s) if s == "return" => {
                self.bump();
                let mut es = Vec::new();
                if *self.peek() != Tok::Semi {
                    es.push(self.expr()?);
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        es.push(self.expr()?);
                    }
                }
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Return(es)
            }
            Tok::Ident(s) if *self.peek_at(1) == Tok::LParen && !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                let args = self.args()?;
                self.expect(Tok::Semi, "`;`")?;
                StmtKind::Assign {
                    lhs: vec![],
                    rhs: Rhs::Call { name: s, args },
                }
            }
            Tok::FlagsOpen => self.flag_assign()?,
            _ => self.assign()?,
        };
        Ok(Stmt::new(kind, loc))
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let loc = self.loc();
        self.bump();
        let cond = self.expr()?;
        let then_ = self.block()?;
        let else_ = if self.eat_ident("else") {
            if self.is_ident("if") {
                vec![self.if_stmt()?]
            } else {
                self.block()?
            }
        } else {
            vec![]
        };
        Ok(Stmt::new(StmtKind::If { cond, then_, else_ }, loc))
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            args.push(self.expr()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                args.push(self.expr()?);
            }
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(args)
    }

    fn lval(&mut self) -> PResult<Lval> {
        match self.peek().clone() {
            Tok::Ident(s) if s == "_" => {
                self.bump();
                Ok(Lval::Ignore)
            }
            Tok::LBrack => {
                self.bump();
                let addr = self.expr()?;
                self.expect(Tok::RBrack, "`]`")?;
                Ok(Lval::Store {
                    width: Width::W64,
                    addr,
                })
            }
            Tok::LParen => {
                self.bump();
                let w = self.word_type()?;
                self.expect(Tok::RParen, "`)`")?;
                if *self.peek() == Tok::LBrack {
                    self.bump();
                    let addr = self.expr()?;
                    self.expect(Tok::RBrack, "`]`")?;
                    return Ok(Lval::Store { width: w, addr });
                }
                let arr = self.name()?;
                let (scale, idx) = self.index()?;
                Ok(Lval::Set {
                    arr,
                    view: Some(w),
                    scale,
                    idx,
                })
            }
            _ => {
                let x = self.name()?;
                if matches!(self.peek(), Tok::LBrack | Tok::DotBrack) {
                    let (scale, idx) = self.index()?;
                    return Ok(Lval::Set {
                        arr: x,
                        view: None,
                        scale,
                        idx,
                    });
                }
                Ok(Lval::Var(x))
            }
        }
    }

    fn index(&mut self) -> PResult<(Scale, Expr)> {
        let scale = match self.bump() {
            Tok::LBrack => Scale::Elem,
            Tok::DotBrack => Scale::Byte,
            t => return self.err(format!("expected `[` or `.[`, found {}", describe(&t))),
        };
        let idx = self.expr()?;
        self.expect(Tok::RBrack, "`]`")?;
        Ok((scale, idx))
    }

    fn rhs(&mut self) -> PResult<Rhs> {
        if let Tok::Ident(s) = self.peek().clone() {
            if *self.peek_at(1) == Tok::LParen && !KEYWORDS.contains(&s.as_str()) {
                self.bump();
                let args = self.args()?;
                return Ok(Rhs::Call { name: s, args });
            }
        }
        Ok(match self.expr()? {
            Expr::Intrinsic { name, args } => Rhs::Intrinsic { name, args },
            e => Rhs::Expr(e),
        })
    }

    fn assign(&mut self) -> PResult<StmtKind> {
        let mut lhs = vec![self.lval()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            lhs.push(self.lval()?);
        }
        match self.bump() {
            Tok::Assign => {
                let rhs = self.rhs()?;
                self.expect(Tok::Semi, "`;`")?;
                Ok(StmtKind::Assign { lhs, rhs })
            }
            Tok::OpAssign { op, signed, ann } => {
                if lhs.len() != 1 {
                    return self.err("compound assignment has a single destination");
                }
                let cur = match lhs[0].as_expr() {
                    Some(e) => e,
                    None => return self.err("cannot update `_`"),
                };
                let ann = self.ann(ann)?;
                let r = self.expr()?;
                self.expect(Tok::Semi, "`;`")?;
                let e = Expr::Binary {
                    op,
                    signed,
                    ann,
                    l: Box::new(cur),
                    r: Box::new(r),
                };
                Ok(StmtKind::Assign {
                    lhs,
                    rhs: Rhs::Expr(e),
                })
            }
            t => self.err(format!("expected `=`, found {}", describe(&t))),
        }
    }

    /// `?{CF = cf, ...}, x = #op(...)`: flags are bound by name, the other
    /// destinations positionally.
    fn flag_assign(&mut self) -> PResult<StmtKind> {
        self.bump();
        let mut named: Vec<(Flag, Lval)> = Vec::new();
        while *self.peek() != Tok::RBrace {
            let f = match self.bump() {
                Tok::Ident(s) => match s.as_str() {
                    "OF" => Flag::OF,
                    "CF" => Flag::CF,
                    "SF" => Flag::SF,
                    "PF" => Flag::PF,
                    "ZF" => Flag::ZF,
                    _ => return self.err(format!("unknown flag `{s}`")),
                },
                t => return self.err(format!("expected a flag name, found {}", describe(&t))),
            };
            self.expect(Tok::Assign, "`=`")?;
            named.push((f, self.lval()?));
            if *self.peek() == Tok::Comma {
                self.bump();
            }
        }
        self.bump();
        let mut rest = Vec::new();
        while *self.peek() == Tok::Comma {
            self.bump();
            rest.push(self.lval()?);
        }
        self.expect(Tok::Assign, "`=`")?;
        let loc = self.loc();
        let rhs = self.rhs()?;
        self.expect(Tok::Semi, "`;`")?;
        let Rhs::Intrinsic { name, .. } = &rhs else {
            return Err(ParseError {
                loc,
                msg: "flag patterns need an intrinsic on the right".into(),
            });
        };
        let desc = isa::lookup(name).expect("intrinsic checked when parsed");
        let mut rest = rest.into_iter();
        let mut lhs = Vec::new();
        for d in &desc.dests {
            match d {
                ArgLoc::F(f) => {
                    let lv = named.iter().find(|(g, _)| g == f).map(|(_, l)| l.clone());
                    lhs.push(lv.unwrap_or(Lval::Ignore));
                }
                _ => match rest.next() {
                    Some(l) => lhs.push(l),
                    None => {
                        return Err(ParseError {
                            loc,
                            msg: format!("too few destinations for `{name}`"),
                        })
                    }
                },
            }
        }
        if rest.next().is_some() {
            return Err(ParseError {
                loc,
                msg: format!("too many destinations for `{name}`"),
            });
        }
        Ok(StmtKind::Assign { lhs, rhs })
    }

    fn ann(&self, raw: Option<RawAnn>) -> PResult<Option<OpAnn>> {
        let Some(a) = raw else { return Ok(None) };
        match a.m {
            None => match Width::from_bits(a.n) {
                Some(w) => Ok(Some(OpAnn::Scalar(w))),
                None => self.err(format!("invalid operator width {}", a.n)),
            },
            Some(m) => {
                let lane = Width::from_bits(m);
                match (lane, Width::from_bits(a.n * m)) {
                    (Some(lane), Some(_)) if !a.signed => {
                        Ok(Some(OpAnn::Vector { lanes: a.n, lane }))
                    }
                    _ => self.err(format!("invalid lane shape {}u{m}", a.n)),
                }
            }
        }
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        self.binary(0)
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Tok::Op { op, signed, ann } = self.peek() {
            let (op, signed, ann) = (*op, *signed, *ann);
            let prec = precedence(op);
            if prec < min_prec {
                break;
            }
            self.bump();
            let ann = self.ann(ann)?;
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary {
                op,
                signed,
                ann,
                l: Box::new(lhs),
                r: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                let e = self.unary()?;
                Ok(Expr::Unary {
                    op: UnOp::Not,
                    ann: None,
                    e: Box::new(e),
                })
            }
            Tok::Op {
                op: BinOp::Sub,
                ann,
                ..
            } => {
                self.bump();
                let ann = self.ann(ann)?;
                let e = self.unary()?;
                match (e, ann) {
                    (Expr::Int(n), None) => Ok(Expr::Int(-n)),
                    (e, ann) => Ok(Expr::Unary {
                        op: UnOp::Neg,
                        ann,
                        e: Box::new(e),
                    }),
                }
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        let loc = self.loc();
        match self.bump() {
            Tok::Int(n) => Ok(Expr::Int(n)),
            Tok::Ident(s) if s == "true" => Ok(Expr::Bool(true)),
            Tok::Ident(s) if s == "false" => Ok(Expr::Bool(false)),
            Tok::Hash => {
                let name = match self.bump() {
                    Tok::Ident(s) => s,
                    t => {
                        return self.err(format!(
                            "expected an intrinsic name, found {}",
                            describe(&t)
                        ))
                    }
                };
                if isa::lookup(&name).is_none() {
                    return Err(ParseError {
                        loc,
                        msg: format!("unknown intrinsic `#{name}`"),
                    });
                }
                let args = self.args()?;
                Ok(Expr::Intrinsic { name, args })
            }
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                if *self.peek() == Tok::LParen {
                    return Err(ParseError {
                        loc,
                        msg: format!("call to `{s}` must be a statement"),
                    });
                }
                if matches!(self.peek(), Tok::LBrack | Tok::DotBrack) {
                    let (scale, idx) = self.index()?;
                    return Ok(Expr::Get {
                        arr: s,
                        view: None,
                        scale,
                        idx: Box::new(idx),
                    });
                }
                Ok(Expr::Var(s))
            }
            Tok::LBrack => {
                let addr = self.expr()?;
                self.expect(Tok::RBrack, "`]`")?;
                Ok(Expr::Load {
                    width: Width::W64,
                    addr: Box::new(addr),
                })
            }
            Tok::LParen => self.paren(),
            t => Err(ParseError {
                loc,
                msg: format!("expected an expression, found {}", describe(&t)),
            }),
        }
    }

    /// After `(`: a view `(uW)`, a cast `(Wu)`, a vector literal `(NuM)[..]`
    /// or a parenthesized expression.
    fn paren(&mut self) -> PResult<Expr> {
        if let (Tok::Ident(s), Tok::RParen) = (self.peek().clone(), self.peek_at(1).clone()) {
            if let Some(w) = width_of_ident(&s) {
                self.bump();
                self.bump();
                if *self.peek() == Tok::LBrack {
                    self.bump();
                    let addr = self.expr()?;
                    self.expect(Tok::RBrack, "`]`")?;
                    return Ok(Expr::Load {
                        width: w,
                        addr: Box::new(addr),
                    });
                }
                let arr = self.name()?;
                let (scale, idx) = self.index()?;
                return Ok(Expr::Get {
                    arr,
                    view: Some(w),
                    scale,
                    idx: Box::new(idx),
                });
            }
        }
        if let (Tok::Suffix(a), Tok::RParen) = (self.peek().clone(), self.peek_at(1).clone()) {
            self.bump();
            self.bump();
            return match a.m {
                None => {
                    let Some(to) = Width::from_bits(a.n) else {
                        return self.err(format!("invalid cast width {}", a.n));
                    };
                    let e = self.unary()?;
                    Ok(Expr::Cast {
                        to,
                        signed: a.signed,
                        e: Box::new(e),
                    })
                }
                Some(m) => {
                    if a.signed || !(1..=64).contains(&m) || Width::from_bits(a.n * m).is_none() {
                        return self.err(format!("invalid vector literal shape {}u{m}", a.n));
                    }
                    self.expect(Tok::LBrack, "`[`")?;
                    let mut elems = vec![self.expr()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        elems.push(self.expr()?);
                    }
                    self.expect(Tok::RBrack, "`]`")?;
                    if elems.len() != a.n as usize {
                        return self.err(format!("expected {} lanes, found {}", a.n, elems.len()));
                    }
                    Ok(Expr::VecLit {
                        lanes: a.n,
                        bits: m,
                        elems,
                    })
                }
            };
        }
        let e = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(e)
    }
}

fn precedence(op: BinOp) -> u8 {
    match op {
        BinOp::LOr => 1,
        BinOp::LAnd => 2,
        BinOp::Or => 3,
        BinOp::Xor => 4,
        BinOp::And => 5,
        BinOp::Eq | BinOp::Ne => 6,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 7,
        BinOp::Shl | BinOp::Shr | BinOp::Rol | BinOp::Ror => 8,
        BinOp::Add | BinOp::Sub => 9,
        BinOp::Mul | BinOp::Div | BinOp::Rem => 10,
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    Parser {
        toks: tokenize(src)?,
        pos: 0,
    }
    .program()
}

/// Parses a sequence of statements, as found inside a function body.
pub fn parse_stmts(src: &str) -> Result<Vec<Stmt>, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    let mut out = Vec::new();
    while *p.peek() != Tok::Eof {
        out.push(p.stmt()?);
    }
    Ok(out)
}

pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: tokenize(src)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.err("trailing input after expression");
    }
    Ok(e)
}
