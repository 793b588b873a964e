//! A small arithmetic expression language for metric and complex-structure
//! entries.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;            (* exponent: integer constant *)
//! primary = number | variable | func "(" expr ")" | "(" expr ")" ;
//! variable = "x" digit { digit } ;            (* x1 .. x{dim} *)
//! func    = "sin" | "cos" | "exp" | "log" | "sqrt" | "atan" ;
//! ```
//!
//! Expressions are evaluated with [`Jet`] arithmetic, so partial derivatives
//! up to third order come out exact.

use std::fmt;

use thiserror::Error;

use crate::jet::{Jet, MAX_ORDER};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Atan,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "atan" => Func::Atan,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Atan => "atan",
        }
    }
}

/// Expression tree. Variables are stored zero-based (`x1` is `Var(0)`).
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("empty expression")]
    Empty,
    #[error("expression dimension must be even and at least 4, got {0}")]
    InvalidDimension(usize),
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("malformed number {0:?}")]
    BadNumber(String),
    #[error("expected {expected}, found {found}")]
    Unexpected { expected: &'static str, found: String },
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("variable index {index} out of range 1..={dim}")]
    VariableOutOfRange { index: usize, dim: usize },
    #[error("exponent must be an integer constant")]
    NonIntegerExponent,
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("{kind} at line {line}, column {column} (byte {offset})")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EvalError {
    #[error("{reason} in `{subexpr}`")]
    Domain { subexpr: String, reason: &'static str },
    #[error("jet order {0} exceeds the supported maximum of 3")]
    OrderTooHigh(u8),
    #[error("variable x{index} is not defined for a point of dimension {dim}")]
    PointDimension { index: usize, dim: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier {s:?}"),
            Tok::Op(c) => format!("{c:?}"),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, kind: ParseErrorKind, offset: usize) -> ParseError {
        let (line, column) = line_col(self.text, offset);
        ParseError {
            kind,
            offset,
            line,
            column,
        }
    }

    fn tokenize(&mut self) -> Result<(), ParseError> {
        let bytes = self.text.as_bytes();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c.is_ascii_whitespace() {
                i += 1;
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let lit = &self.text[start..i];
                let v: f64 = lit
                    .parse()
                    .map_err(|_| self.error(ParseErrorKind::BadNumber(lit.into()), start))?;
                self.toks.push((Tok::Num(v), start));
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                self.toks.push((Tok::Ident(self.text[start..i].to_string()), start));
            } else {
                let tok = match c {
                    '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    _ => {
                        let ch = self.text[i..].chars().next().unwrap_or(c);
                        return Err(self.error(ParseErrorKind::UnexpectedChar(ch), i));
                    }
                };
                self.toks.push((tok, i));
                i += 1;
            }
        }
        self.toks.push((Tok::End, self.text.len()));
        Ok(())
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        self.error(
            ParseErrorKind::Unexpected {
                expected,
                found: self.peek().describe(),
            },
            self.offset(),
        )
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if let Tok::Op('-') = self.peek() {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if let Tok::Op('^') = self.peek() {
            self.bump();
            let at = self.offset();
            let exponent = self.unary()?;
            let k = exponent
                .constant_value()
                .filter(|v| v.fract() == 0.0 && v.abs() <= i32::MAX as f64)
                .ok_or_else(|| self.error(ParseErrorKind::NonIntegerExponent, at))?;
            return Ok(Expr::Pow(Box::new(base), k as i32));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let (tok, at) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let inner = self.expr()?;
                match self.peek() {
                    Tok::RParen => {
                        self.bump();
                        Ok(inner)
                    }
                    _ => Err(self.unexpected("')'")),
                }
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    if *self.peek() != Tok::LParen {
                        return Err(self.unexpected("'(' after function name"));
                    }
                    self.bump();
                    let arg = self.expr()?;
                    if *self.peek() != Tok::RParen {
                        return Err(self.unexpected("')'"));
                    }
                    self.bump();
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                let index = name
                    .strip_prefix('x')
                    .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|d| d.parse::<usize>().ok())
                    .ok_or_else(|| self.error(ParseErrorKind::UnknownIdentifier(name.clone()), at))?;
                if index == 0 || index > self.dim {
                    return Err(self.error(ParseErrorKind::VariableOutOfRange { index, dim: self.dim }, at));
                }
                Ok(Expr::Var(index - 1))
            }
            other => {
                self.pos -= usize::from(other != Tok::End);
                Err(self.unexpected("a number, variable, function or '('"))
            }
        }
    }
}

/// Parses `text` as an expression over the coordinates `x1..x{dim}`.
pub fn parse_expr(text: &str, dim: usize) -> Result<Expr, ParseError> {
    let mut parser = Parser {
        text,
        toks: Vec::new(),
        pos: 0,
        dim,
    };
    if dim < 4 || !dim.is_multiple_of(2) {
        return Err(parser.error(ParseErrorKind::InvalidDimension(dim), 0));
    }
    if text.trim().is_empty() {
        return Err(parser.error(ParseErrorKind::Empty, 0));
    }
    parser.tokenize()?;
    let e = parser.expr()?;
    if *parser.peek() != Tok::End {
        return Err(parser.unexpected("an operator or end of input"));
    }
    Ok(e)
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    /// Value of a variable-free subtree.
    pub fn constant_value(&self) -> Option<f64> {
        Some(match self {
            Expr::Num(v) => *v,
            Expr::Var(_) => return None,
            Expr::Neg(e) => -e.constant_value()?,
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.constant_value()?, b.constant_value()?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                }
            }
            Expr::Pow(e, k) => e.constant_value()?.powi(*k),
            Expr::Call(f, e) => {
                let x = e.constant_value()?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Log => x.ln(),
                    Func::Sqrt => x.sqrt(),
                    Func::Atan => x.atan(),
                }
            }
        })
    }

    /// Largest zero-based variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Call(_, e) => e.max_var(),
            Expr::Binary(_, a, b) => a.max_var().max(b.max_var()),
        }
    }

    /// Renames variables; used to relabel chart coordinates.
    pub fn map_vars(&self, f: &impl Fn(usize) -> usize) -> Expr {
        match self {
            Expr::Num(v) => Expr::Num(*v),
            Expr::Var(i) => Expr::Var(f(*i)),
            Expr::Neg(e) => Expr::Neg(Box::new(e.map_vars(f))),
            Expr::Binary(op, a, b) => Expr::Binary(*op, Box::new(a.map_vars(f)), Box::new(b.map_vars(f))),
            Expr::Pow(e, k) => Expr::Pow(Box::new(e.map_vars(f)), *k),
            Expr::Call(func, e) => Expr::Call(*func, Box::new(e.map_vars(f))),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Pow(_, _) => 4,
            Expr::Num(v) if *v < 0.0 => 3,
            _ => 5,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn wrap(f: &mut fmt::Formatter<'_>, e: &Expr, paren: bool) -> fmt::Result {
            if paren {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => {
                write!(f, "-")?;
                wrap(f, e, e.precedence() < 3)
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                wrap(f, a, a.precedence() < p)?;
                write!(f, " {} ", op.symbol())?;
                // left-associative parsing: equal precedence on the right needs parens
                let right_paren = b.precedence() <= p;
                wrap(f, b, right_paren)
            }
            Expr::Pow(e, k) => {
                wrap(f, e, e.precedence() <= 4)?;
                write!(f, "^{k}")
            }
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

/// Evaluates `e` at `point` as a jet of the given order.
pub fn eval_jet(e: &Expr, point: &[f64], order: u8) -> Result<Jet, EvalError> {
    if order > MAX_ORDER {
        return Err(EvalError::OrderTooHigh(order));
    }
    let dim = point.len();
    let domain = |e: &Expr, reason| EvalError::Domain {
        subexpr: e.to_string(),
        reason,
    };
    Ok(match e {
        Expr::Num(v) => Jet::constant(dim, order, *v),
        Expr::Var(i) => {
            if *i >= dim {
                return Err(EvalError::PointDimension { index: i + 1, dim });
            }
            Jet::variable(dim, order, *i, point[*i])
        }
        Expr::Neg(a) => -eval_jet(a, point, order)?,
        Expr::Binary(op, a, b) => {
            let x = eval_jet(a, point, order)?;
            let y = eval_jet(b, point, order)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y.value() == 0.0 {
                        return Err(domain(e, "division by zero"));
                    }
                    x / y
                }
            }
        }
        Expr::Pow(a, k) => {
            let x = eval_jet(a, point, order)?;
            if *k < 0 && x.value() == 0.0 {
                return Err(domain(e, "zero raised to a negative power"));
            }
            x.powi(*k)
        }
        Expr::Call(func, a) => {
            let x = eval_jet(a, point, order)?;
            match func {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Atan => x.atan(),
                Func::Log => {
                    if x.value() <= 0.0 {
                        return Err(domain(e, "logarithm of a non-positive value"));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if x.value() <= 0.0 {
                        return Err(domain(e, "square root of a non-positive value"));
                    }
                    x.sqrt()
                }
            }
        }
    })
}

/// Plain value of `e` at `point`.
pub fn eval(e: &Expr, point: &[f64]) -> Result<f64, EvalError> {
    eval_jet(e, point, 0).map(|j| j.value())
}
