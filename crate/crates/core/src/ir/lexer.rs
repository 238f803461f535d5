//! Tokenizer.

use super::ast::{BinOp, Loc};
use super::ParseError;

/// Raw operator annotation: `64u`, `64s` or `4u64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawAnn {
    pub n: u32,
    pub signed: bool,
    pub m: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i128),
    /// A number immediately followed by `u`/`s`, e.g. `64u` or `4u2`.
    Suffix(RawAnn),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBrack,
    RBrack,
    /// `.[`
    DotBrack,
    Comma,
    Semi,
    Assign,
    Arrow,
    Hash,
    /// `?{`
    FlagsOpen,
    Bang,
    Op {
        op: BinOp,
        signed: bool,
        ann: Option<RawAnn>,
    },
    OpAssign {
        op: BinOp,
        signed: bool,
        ann: Option<RawAnn>,
    },
    Eof,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub loc: Loc,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

fn is_ident_char(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

impl Lexer<'_> {
    fn peek(&self, k: usize) -> u8 {
        *self.src.get(self.pos + k).unwrap_or(&0)
    }

    fn bump(&mut self) -> u8 {
        let c = self.peek(0);
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn loc(&self) -> Loc {
        Loc {
            line: self.line,
            col: self.col,
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            loc: self.loc(),
            msg: msg.into(),
        }
    }

    fn skip_trivia(&mut self) -> Result<(), ParseError> {
        loop {
            match (self.peek(0), self.peek(1)) {
                (c, _) if c.is_ascii_whitespace() => {
                    self.bump();
                }
                (b'/', b'/') => {
                    while self.peek(0) != b'\n' && self.peek(0) != 0 {
                        self.bump();
                    }
                }
                (b'/', b'*') => {
                    self.bump();
                    self.bump();
                    while !(self.peek(0) == b'*' && self.peek(1) == b'/') {
                        if self.peek(0) == 0 {
                            return Err(self.err("unterminated comment"));
                        }
                        self.bump();
                    }
                    self.bump();
                    self.bump();
                }
                _ => return Ok(()),
            }
        }
    }

    fn digits(&mut self) -> String {
        let mut s = String::new();
        while self.peek(0).is_ascii_digit() || self.peek(0) == b'_' {
            let c = self.bump();
            if c != b'_' {
                s.push(c as char);
            }
        }
        s
    }

    /// Tries to read an annotation suffix (`64u`, `4u64`, `64s`) at the
    /// current position without consuming anything on failure.
    fn try_suffix(&mut self) -> Option<RawAnn> {
        let mut k = 0;
        while self.peek(k).is_ascii_digit() {
            k += 1;
        }
        if k == 0 || !matches!(self.peek(k), b'u' | b's') {
            return None;
        }
        let mut j = k + 1;
        while self.peek(j).is_ascii_digit() {
            j += 1;
        }
        if is_ident_char(self.peek(j)) {
            return None;
        }
        let text = std::str::from_utf8(&self.src[self.pos..self.pos + j])
            .ok()?
            .to_string();
        for _ in 0..j {
            self.bump();
        }
        let n = text[..k].parse().ok()?;
        let signed = &text[k..k + 1] == "s";
        let m = if j > k + 1 {
            Some(text[k + 1..].parse().ok()?)
        } else {
            None
        };
        Some(RawAnn { n, signed, m })
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        if let Some(a) = self.try_suffix() {
            return Ok(Tok::Suffix(a));
        }
        if self.peek(0) == b'0' && matches!(self.peek(1), b'x' | b'X') {
            self.bump();
            self.bump();
            let mut s = String::new();
            while self.peek(0).is_ascii_hexdigit() || self.peek(0) == b'_' {
                let c = self.bump();
                if c != b'_' {
                    s.push(c as char);
                }
            }
            if s.is_empty() {
                return Err(self.err("empty hexadecimal literal"));
            }
            return i128::from_str_radix(&s, 16)
                .map(Tok::Int)
                .map_err(|_| self.err("integer literal too large; use a vector literal"));
        }
        let s = self.digits();
        s.parse()
            .map(Tok::Int)
            .map_err(|_| self.err("integer literal too large; use a vector literal"))
    }

    /// Operator suffix after the operator characters: `s`, an annotation,
    /// and an optional trailing `=` for compound assignment.
    fn op_tail(&mut self, op: BinOp, assignable: bool) -> Tok {
        let mut signed = false;
        let mut ann = None;
        if self.peek(0) == b's' && !is_ident_char(self.peek(1)) {
            self.bump();
            signed = true;
        } else if let Some(a) = self.try_suffix() {
            signed = a.signed;
            ann = Some(a);
        }
        if assignable && self.peek(0) == b'=' && self.peek(1) != b'=' {
            self.bump();
            return Tok::OpAssign { op, signed, ann };
        }
        Tok::Op { op, signed, ann }
    }

    fn next(&mut self) -> Result<Token, ParseError> {
        self.skip_trivia()?;
        let loc = self.loc();
        let c = self.peek(0);
        let c1 = self.peek(1);
        let tok = match c {
            0 => Tok::Eof,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut s = String::new();
                while is_ident_char(self.peek(0)) {
                    s.push(self.bump() as char);
                }
                Tok::Ident(s)
            }
            c if c.is_ascii_digit() => self.number()?,
            _ => {
                self.bump();
                match (c, c1) {
                    (b'(', _) => Tok::LParen,
                    (b')', _) => Tok::RParen,
                    (b'{', _) => Tok::LBrace,
                    (b'}', _) => Tok::RBrace,
                    (b'[', _) => Tok::LBrack,
                    (b']', _) => Tok::RBrack,
                    (b'.', b'[') => {
                        self.bump();
                        Tok::DotBrack
                    }
                    (b',', _) => Tok::Comma,
                    (b';', _) => Tok::Semi,
                    (b'#', _) => Tok::Hash,
                    (b'?', b'{') => {
                        self.bump();
                        Tok::FlagsOpen
                    }
                    (b'-', b'>') => {
                        self.bump();
                        Tok::Arrow
                    }
                    (b'=', b'=') => {
                        self.bump();
                        self.op_tail(BinOp::Eq, false)
                    }
                    (b'=', _) => Tok::Assign,
                    (b'!', b'=') => {
                        self.bump();
                        self.op_tail(BinOp::Ne, false)
                    }
                    (b'!', _) => Tok::Bang,
                    (b'&', b'&') => {
                        self.bump();
                        Tok::Op {
                            op: BinOp::LAnd,
                            signed: false,
                            ann: None,
                        }
                    }
                    (b'|', b'|') => {
                        self.bump();
                        Tok::Op {
                            op: BinOp::LOr,
                            signed: false,
                            ann: None,
                        }
                    }
                    (b'<', b'<') | (b'>', b'>') => {
                        self.bump();
                        let left = c == b'<';
                        if self.peek(0) == b'r' && !is_ident_char(self.peek(1))
                            || self.peek(0) == b'r' && self.peek(1).is_ascii_digit()
                        {
                            self.bump();
                            self.op_tail(if left { BinOp::Rol } else { BinOp::Ror }, true)
                        } else {
                            self.op_tail(if left { BinOp::Shl } else { BinOp::Shr }, true)
                        }
                    }
                    (b'<', b'=') | (b'>', b'=') => {
                        self.bump();
                        self.op_tail(if c == b'<' { BinOp::Le } else { BinOp::Ge }, false)
                    }
                    (b'<', _) => self.op_tail(BinOp::Lt, false),
                    (b'>', _) => self.op_tail(BinOp::Gt, false),
                    (b'+', _) => self.op_tail(BinOp::Add, true),
                    (b'-', _) => self.op_tail(BinOp::Sub, true),
                    (b'*', _) => self.op_tail(BinOp::Mul, true),
                    (b'/', _) => self.op_tail(BinOp::Div, true),
                    (b'%', _) => self.op_tail(BinOp::Rem, true),
                    (b'&', _) => self.op_tail(BinOp::And, true),
                    (b'|', _) => self.op_tail(BinOp::Or, true),
                    (b'^', _) => self.op_tail(BinOp::Xor, true),
                    _ => {
                        return Err(ParseError {
                            loc,
                            msg: format!("unexpected character `{}`", c as char),
                        })
                    }
                }
            }
        };
        Ok(Token { tok, loc })
    }
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        src: src.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        let t = lx.next()?;
        let end = t.tok == Tok::Eof;
        out.push(t);
        if end {
            return Ok(out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn annotated_operators() {
        let t = toks("x +4u64= z; a <<r 16; b >>s 3; i+16<=n");
        assert!(t.contains(&Tok::OpAssign {
            op: BinOp::Add,
            signed: false,
            ann: Some(RawAnn {
                n: 4,
                signed: false,
                m: Some(64)
            })
        }));
        assert!(t.contains(&Tok::Op {
            op: BinOp::Rol,
            signed: false,
            ann: None
        }));
        assert!(t.contains(&Tok::Op {
            op: BinOp::Shr,
            signed: true,
            ann: None
        }));
        assert!(t.contains(&Tok::Int(16)));
        assert!(t.contains(&Tok::Op {
            op: BinOp::Le,
            signed: false,
            ann: None
        }));
    }

    #[test]
    fn suffix_literals() {
        assert_eq!(
            toks("(4u2)")[1],
            Tok::Suffix(RawAnn {
                n: 4,
                signed: false,
                m: Some(2)
            })
        );
        assert_eq!(toks("0x0FFF_FFFF")[0], Tok::Int(0x0fff_ffff));
        assert!(tokenize("0xffffffffffffffffffffffffffffffffff").is_err());
    }

    #[test]
    fn less_than_identifier_is_not_signed() {
        let t = toks("i<start");
        assert_eq!(
            t[1],
            Tok::Op {
                op: BinOp::Lt,
                signed: false,
                ann: None
            }
        );
        assert_eq!(t[2], Tok::Ident("start".into()));
    }
}
