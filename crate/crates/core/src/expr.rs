//! Scalar arithmetic expressions for problem data.
//!
//! Problem files describe the nonlinearity, the weight, impulse maps and
//! measure densities as text such as `"u^2"` or `"t*(1-t)/2"`. This module
//! parses that text into an [`Expr`] and evaluates it in double precision.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?            right-associative
//! primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! So `-x^2` is `-(x^2)`, `2^-1` is `2^(-1)` and `a^b^c` is `a^(b^c)`.
//! Built-in functions are `sin cos exp log sqrt abs` (one argument) and
//! `min max pow` (two arguments). The names `pi` and `e` are constants; every
//! other identifier is a variable. Names are case-sensitive.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error in {op}: argument(s) {args:?}")]
    Domain { op: &'static str, args: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
    Pow,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Min,
        Func::Max,
        Func::Pow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Pow => 2,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

/// Parsed expression tree. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Const(Constant),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Name lookup used by [`Expr::eval`].
pub trait Bindings {
    fn lookup(&self, name: &str) -> Option<f64>;
}

impl Bindings for HashMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for BTreeMap<String, f64> {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.get(name).copied()
    }
}

impl Bindings for [(&str, f64)] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|&(_, v)| v)
    }
}

impl<const N: usize> Bindings for [(&str, f64); N] {
    fn lookup(&self, name: &str) -> Option<f64> {
        self.as_slice().lookup(name)
    }
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ParseError> {
        Parser::new(source)?.parse_all()
    }

    pub fn eval<B: Bindings + ?Sized>(&self, bindings: &B) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Const(c) => Ok(c.value()),
            Expr::Var(name) => bindings.lookup(name).ok_or_else(|| EvalError::Unbound(name.clone())),
            Expr::Neg(inner) => Ok(-inner.eval(bindings)?),
            Expr::Binary(op, lhs, rhs) => {
                let a = lhs.eval(bindings)?;
                let b = rhs.eval(bindings)?;
                binary(*op, a, b)
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(bindings)?;
                let b = match args.get(1) {
                    Some(arg) => arg.eval(bindings)?,
                    None => 0.0,
                };
                call(*func, a, b)
            }
        }
    }

    /// Identifiers occurring in the tree, excluding `pi` and `e`.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(name) => {
                out.insert(name.clone());
            }
            Expr::Num(_) | Expr::Const(_) => {}
            Expr::Neg(inner) => inner.collect_vars(out),
            Expr::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    /// Value of an expression without variables.
    pub fn constant_value(&self) -> Option<f64> {
        if self.free_vars().is_empty() {
            self.eval(&[] as &[(&str, f64)]).ok()
        } else {
            None
        }
    }
}

fn domain(op: &'static str, args: &[f64]) -> EvalError {
    EvalError::Domain { op, args: args.to_vec() }
}

fn finite(op: &'static str, args: &[f64], value: f64) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(domain(op, args))
    }
}

fn power(a: f64, b: f64) -> Result<f64, EvalError> {
    if a < 0.0 && b.fract() != 0.0 {
        return Err(domain("^", &[a, b]));
    }
    if a == 0.0 && b < 0.0 {
        return Err(domain("^", &[a, b]));
    }
    finite("^", &[a, b], a.powf(b))
}

fn binary(op: BinOp, a: f64, b: f64) -> Result<f64, EvalError> {
    match op {
        BinOp::Add => finite("+", &[a, b], a + b),
        BinOp::Sub => finite("-", &[a, b], a - b),
        BinOp::Mul => finite("*", &[a, b], a * b),
        BinOp::Div => {
            if b == 0.0 {
                Err(domain("/", &[a, b]))
            } else {
                finite("/", &[a, b], a / b)
            }
        }
        BinOp::Pow => power(a, b),
    }
}

fn call(func: Func, a: f64, b: f64) -> Result<f64, EvalError> {
    match func {
        Func::Sin => finite("sin", &[a], a.sin()),
        Func::Cos => finite("cos", &[a], a.cos()),
        Func::Exp => finite("exp", &[a], a.exp()),
        Func::Log => {
            if a <= 0.0 {
                Err(domain("log", &[a]))
            } else {
                Ok(a.ln())
            }
        }
        Func::Sqrt => {
            if a < 0.0 {
                Err(domain("sqrt", &[a]))
            } else {
                Ok(a.sqrt())
            }
        }
        Func::Abs => Ok(a.abs()),
        Func::Min => Ok(a.min(b)),
        Func::Max => Ok(a.max(b)),
        Func::Pow => power(a, b),
    }
}

/// Fully parenthesised; reparses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(name) => f.write_str(name),
            Expr::Const(Constant::Pi) => f.write_str("pi"),
            Expr::Const(Constant::E) => f.write_str("e"),
            Expr::Neg(inner) => write!(f, "(-{inner})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{arg}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(name) => format!("identifier `{name}`"),
            Tok::Op(c) => format!("`{c}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            // exponent only when digits actually follow; otherwise `e` is left for the next token
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
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            out.push((start, Tok::Num(value)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
            continue;
        }
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => Tok::Op(c as char),
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        out.push((start, tok));
        i += 1;
    }
    out.push((src.len(), Tok::End));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        if src.trim().is_empty() {
            return Err(ParseError {
                offset: 0,
                message: "empty expression".into(),
            });
        }
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let tok = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        tok
    }

    fn fail<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.offset(),
            message: format!("expected {expected}, found {}", self.peek().describe()),
        })
    }

    fn parse_all(mut self) -> Result<Expr, ParseError> {
        let expr = self.parse_sum()?;
        if *self.peek() != Tok::End {
            return self.fail("operator or end of input");
        }
        Ok(expr)
    }

    fn parse_sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_product()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.parse_product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn parse_product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.parse_unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn parse_unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            let inner = self.parse_unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Expr, ParseError> {
        let base = self.parse_primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.parse_unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn parse_primary(&mut self) -> Result<Expr, ParseError> {
        let start = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.parse_sum()?;
                if *self.peek() != Tok::RParen {
                    return self.fail("`)`");
                }
                self.bump();
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    let func = Func::from_name(&name).ok_or_else(|| ParseError {
                        offset: start,
                        message: format!("unknown function `{name}`"),
                    })?;
                    self.bump();
                    let mut args = vec![self.parse_sum()?];
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.parse_sum()?);
                    }
                    if *self.peek() != Tok::RParen {
                        return self.fail("`,` or `)`");
                    }
                    self.bump();
                    if args.len() != func.arity() {
                        return Err(ParseError {
                            offset: start,
                            message: format!("`{}` takes {} argument(s), got {}", func.name(), func.arity(), args.len()),
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                Ok(match name.as_str() {
                    "pi" => Expr::Const(Constant::Pi),
                    "e" => Expr::Const(Constant::E),
                    _ => Expr::Var(name),
                })
            }
            _ => self.fail("number, identifier, `(` or `-`"),
        }
    }
}

/// One-variable expression together with its declared breakpoints.
///
/// Used for the weight `g`, impulse maps and measure densities. The variable
/// name is whatever the expression uses (if any); breakpoints mark where the
/// function may be discontinuous or non-smooth so that quadrature panels
/// never straddle them.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    expr: Expr,
    var: Option<String>,
    breakpoints: Vec<f64>,
}

impl Profile {
    /// `allowed` lists acceptable variable names; at most one may occur.
    pub fn new(expr: Expr, allowed: &[&str], mut breakpoints: Vec<f64>) -> Result<Self, ParseError> {
        let vars = expr.free_vars();
        if vars.len() > 1 {
            return Err(ParseError {
                offset: 0,
                message: format!("expected a function of one variable, found {vars:?}"),
            });
        }
        let var = vars.into_iter().next();
        if let Some(name) = &var {
            if !allowed.contains(&name.as_str()) {
                return Err(ParseError {
                    offset: 0,
                    message: format!("variable `{name}` not allowed here (expected one of {allowed:?})"),
                });
            }
        }
        breakpoints.sort_by(f64::total_cmp);
        breakpoints.dedup();
        Ok(Profile { expr, var, breakpoints })
    }

    pub fn parse(source: &str, allowed: &[&str], breakpoints: Vec<f64>) -> Result<Self, ParseError> {
        Profile::new(Expr::parse(source)?, allowed, breakpoints)
    }

    pub fn constant(value: f64) -> Self {
        Profile {
            expr: Expr::Num(value),
            var: None,
            breakpoints: Vec::new(),
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn constant_value(&self) -> Option<f64> {
        match (&self.var, &self.expr) {
            (None, Expr::Num(v)) => Some(*v),
            (None, e) => e.constant_value(),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        match &self.var {
            Some(name) => self.expr.eval(&[(name.as_str(), x)]),
            None => self.expr.eval(&[] as &[(&str, f64)]),
        }
    }
}
