use std::fmt;

use thiserror::Error;

use super::{BinOp, Func, Node, Var};

/// Parse failure at a 0-based character offset.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} at offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    Unexpected { found: String, expected: &'static str },
    UnknownFunction(String),
    UnknownVariable(String),
    BadArity { func: &'static str, got: usize },
    BadNumber(String),
    Empty,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::Unexpected { found, expected } => write!(f, "expected {expected}, found {found}"),
            ParseErrorKind::UnknownFunction(name) => write!(f, "unknown function `{name}`"),
            ParseErrorKind::UnknownVariable(name) => {
                write!(f, "unknown variable `{name}` (use x1.., y1.., u1.., w1..)")
            }
            ParseErrorKind::BadArity { func, got } => {
                let want = if Func::from_name(func).is_some_and(Func::is_unary) { "1" } else { ">= 1" };
                write!(f, "`{func}` takes {want} argument(s), got {got}")
            }
            ParseErrorKind::BadNumber(s) => write!(f, "malformed number `{s}`"),
            ParseErrorKind::Empty => f.write_str("empty expression"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Sym(c) => format!("`{c}`"),
            Tok::End => "end of input".to_string(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s.parse().map_err(|_| ParseError { offset: start, kind: ParseErrorKind::BadNumber(s.clone()) })?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
        } else if "+-*/^(),".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(ParseError {
                offset: i,
                kind: ParseErrorKind::Unexpected { found: format!("`{c}`"), expected: "an expression" },
            });
        }
    }
    out.push((chars.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, c: char) -> bool {
        if *self.peek() == Tok::Sym(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        ParseError { offset: self.offset(), kind: ParseErrorKind::Unexpected { found: self.peek().describe(), expected } }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('+') => BinOp::Add,
                Tok::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Node::binary(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Sym('*') => BinOp::Mul,
                Tok::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Node::binary(op, lhs, self.factor()?);
        }
    }

    fn factor(&mut self) -> Result<Node, ParseError> {
        if self.eat('-') {
            return Ok(Node::neg(self.factor()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::binary(BinOp::Pow, base, self.factor()?));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let start = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Node::Const(v))
            }
            Tok::Sym('(') => {
                self.bump();
                let inner = self.expr()?;
                if !self.eat(')') {
                    return Err(self.unexpected("`)`"));
                }
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat('(') {
                    let func = Func::from_name(&name)
                        .ok_or_else(|| ParseError { offset: start, kind: ParseErrorKind::UnknownFunction(name.clone()) })?;
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    if !self.eat(')') {
                        return Err(self.unexpected("`,` or `)`"));
                    }
                    if !func.accepts(args.len()) {
                        return Err(ParseError {
                            offset: start,
                            kind: ParseErrorKind::BadArity { func: func.name(), got: args.len() },
                        });
                    }
                    Ok(Node::Call(func, args))
                } else {
                    Var::parse(&name)
                        .map(Node::Var)
                        .ok_or(ParseError { offset: start, kind: ParseErrorKind::UnknownVariable(name) })
                }
            }
            _ => Err(self.unexpected("a number, variable, call or `(`")),
        }
    }
}

pub(super) fn parse(text: &str) -> Result<Node, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError { offset: 0, kind: ParseErrorKind::Empty });
    }
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let node = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(node)
}
