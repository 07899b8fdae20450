//! A small, total expression language for `F(t, z, r)`, `g(z)` and `h(t, z)`.
//!
//! Variables: `t`, `r`, `x1`, `y1`, `x2`, `y2`, `absz2` (`|z|^2`), `absz1sq` (`|z1|^2`),
//! `absz2sq` (`|z2|^2`). Functions: `exp`, `log`, `abs`, `min`, `max`.
//! Operators by decreasing precedence: `^` (right associative), unary `-`, `* /`, `+ -`.

use std::fmt;

use crate::error::{Error, Result};
use crate::field::{CheckReport, NodeMargin};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    R,
    X1,
    Y1,
    X2,
    Y2,
    AbsZ2,
    AbsZ1Sq,
    AbsZ2Sq,
}

impl Var {
    const ALL: [Var; 9] = [
        Var::T,
        Var::R,
        Var::X1,
        Var::Y1,
        Var::X2,
        Var::Y2,
        Var::AbsZ2,
        Var::AbsZ1Sq,
        Var::AbsZ2Sq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::R => "r",
            Var::X1 => "x1",
            Var::Y1 => "y1",
            Var::X2 => "x2",
            Var::Y2 => "y2",
            Var::AbsZ2 => "absz2",
            Var::AbsZ1Sq => "absz1sq",
            Var::AbsZ2Sq => "absz2sq",
        }
    }

    fn from_name(s: &str) -> Option<Var> {
        Var::ALL.into_iter().find(|v| v.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Abs,
    Min,
    Max,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        [Func::Exp, Func::Log, Func::Abs, Func::Min, Func::Max]
            .into_iter()
            .find(|f| f.name() == s)
    }
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

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Which data slot an expression fills; restricts its free variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// `F(t, z, r)`
    Source,
    /// `g(z)`
    Density,
    /// `h(t, z)` and exact solutions
    Boundary,
}

impl Slot {
    fn name(self) -> &'static str {
        match self {
            Slot::Source => "F",
            Slot::Density => "g",
            Slot::Boundary => "h",
        }
    }

    fn allows(self, v: Var) -> bool {
        match self {
            Slot::Source => true,
            Slot::Density => !matches!(v, Var::T | Var::R),
            Slot::Boundary => v != Var::R,
        }
    }
}

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env<'a> {
    pub t: Option<f64>,
    pub r: Option<f64>,
    pub x: Option<&'a [f64]>,
}

impl<'a> Env<'a> {
    pub fn new(t: f64, x: &'a [f64], r: f64) -> Self {
        Env {
            t: Some(t),
            r: Some(r),
            x: Some(x),
        }
    }
    pub fn space(x: &'a [f64]) -> Self {
        Env {
            x: Some(x),
            ..Env::default()
        }
    }
    pub fn space_time(t: f64, x: &'a [f64]) -> Self {
        Env {
            t: Some(t),
            x: Some(x),
            ..Env::default()
        }
    }

    fn get(&self, v: Var) -> Result<f64> {
        let unbound = || Error::UnboundVariable(v.name().to_string());
        let coord = |a: usize| self.x.and_then(|x| x.get(a).copied()).ok_or_else(unbound);
        match v {
            Var::T => self.t.ok_or_else(unbound),
            Var::R => self.r.ok_or_else(unbound),
            Var::X1 => coord(0),
            Var::Y1 => coord(1),
            Var::X2 => coord(2),
            Var::Y2 => coord(3),
            Var::AbsZ2 => self
                .x
                .map(|x| x.iter().map(|c| c * c).sum())
                .ok_or_else(unbound),
            Var::AbsZ1Sq => Ok(coord(0)?.powi(2) + coord(1)?.powi(2)),
            Var::AbsZ2Sq => Ok(coord(2)?.powi(2) + coord(3)?.powi(2)),
        }
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn add(self, other: Expr) -> Expr {
        Expr::Bin(BinOp::Add, Box::new(self), Box::new(other))
    }

    pub fn sub(self, other: Expr) -> Expr {
        Expr::Bin(BinOp::Sub, Box::new(self), Box::new(other))
    }

    pub fn eval(&self, env: &Env) -> Result<f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var(v) => env.get(*v)?,
            Expr::Neg(e) => -e.eval(env)?,
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(env)?, b.eval(env)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => {
                        let p = a.powf(b);
                        if p.is_nan() {
                            return Err(Error::DomainError(format!("{a}^{b}")));
                        }
                        p
                    }
                }
            }
            Expr::Call(f, args) => {
                let vals = args
                    .iter()
                    .map(|a| a.eval(env))
                    .collect::<Result<Vec<_>>>()?;
                match f {
                    Func::Exp => vals[0].exp(),
                    Func::Log => {
                        if !(vals[0] > 0.0) {
                            return Err(Error::DomainError(format!("log({})", vals[0])));
                        }
                        vals[0].ln()
                    }
                    Func::Abs => vals[0].abs(),
                    Func::Min => vals.iter().copied().fold(f64::INFINITY, f64::min),
                    Func::Max => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            }
        };
        Ok(v)
    }

    pub fn free_vars(&self) -> Vec<Var> {
        fn walk(e: &Expr, out: &mut Vec<Var>) {
            match e {
                Expr::Num(_) => {}
                Expr::Var(v) => {
                    if !out.contains(v) {
                        out.push(*v)
                    }
                }
                Expr::Neg(a) => walk(a, out),
                Expr::Bin(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Expr::Call(_, args) => args.iter().for_each(|a| walk(a, out)),
            }
        }
        let mut out = vec![];
        walk(self, &mut out);
        out
    }

    pub fn uses(&self, v: Var) -> bool {
        self.free_vars().contains(&v)
    }

    pub fn check_slot(&self, slot: Slot) -> Result<()> {
        match self.free_vars().into_iter().find(|v| !slot.allows(*v)) {
            Some(v) => Err(Error::ForbiddenVariable {
                name: v.name().to_string(),
                slot: slot.name(),
            }),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Bin(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
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

fn lex(src: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = src.as_bytes();
    let mut out = vec![];
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'0'..=b'9' | b'.' => {
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
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| Error::SyntaxError {
                    offset: start,
                    message: format!("bad number `{text}`"),
                })?;
                out.push((Tok::Num(v), start));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((Tok::Op(c as char), i));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, i));
                i += 1;
            }
            _ => {
                return Err(Error::SyntaxError {
                    offset: i,
                    message: format!(
                        "unexpected character `{}`",
                        src[i..].chars().next().unwrap()
                    ),
                })
            }
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }
    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }
    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }
    fn fail<T>(&self, message: &str) -> Result<T> {
        Err(Error::SyntaxError {
            offset: self.offset(),
            message: message.to_string(),
        })
    }
    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(&format!("expected {what}"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Tok::Op(c @ ('+' | '-')) = *self.peek() {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Tok::Op(c @ ('*' | '/')) = *self.peek() {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let offset = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if let Some(v) = Var::from_name(&name) {
                    return Ok(Expr::Var(v));
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(Error::UnknownIdentifier { name, offset });
                };
                self.expect(Tok::LParen, "`(` after function name")?;
                let mut args = vec![self.expr()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    args.push(self.expr()?);
                }
                self.expect(Tok::RParen, "`)`")?;
                let ok = match func {
                    Func::Min | Func::Max => args.len() >= 2,
                    _ => args.len() == 1,
                };
                if !ok {
                    return Err(Error::SyntaxError {
                        offset,
                        message: format!("wrong number of arguments to {}", func.name()),
                    });
                }
                Ok(Expr::Call(func, args))
            }
            Tok::End => Err(Error::SyntaxError {
                offset,
                message: "unexpected end of input".into(),
            }),
            _ => Err(Error::SyntaxError {
                offset,
                message: "expected a number, variable, function or `(`".into(),
            }),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.fail("trailing input");
    }
    Ok(e)
}

/// Parses and checks the free variables against `slot`.
pub fn parse_slot(src: &str, slot: Slot) -> Result<Expr> {
    let e = parse(src)?;
    e.check_slot(slot)?;
    Ok(e)
}

/// Points at which `r`-monotonicity is sampled.
#[derive(Debug, Clone)]
pub struct SampleBox {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub r_min: f64,
    pub r_max: f64,
}

pub const MONOTONE_LADDER: usize = 17;
const MONOTONE_SLACK: f64 = 1e-12;

/// Samples `r`-pairs on a 17-point ladder at every `(t, z)` of the box.
///
/// The report's margin is the smallest increment `e(r_{k+1}) - e(r_k)`.
pub fn validate_monotone_r(e: &Expr, samples: &SampleBox) -> Result<CheckReport> {
    let mut margins = vec![];
    let mut node = 0;
    let ladder: Vec<f64> = (0..MONOTONE_LADDER)
        .map(|k| {
            samples.r_min
                + (samples.r_max - samples.r_min) * k as f64 / (MONOTONE_LADDER - 1) as f64
        })
        .collect();
    for &t in &samples.times {
        for x in &samples.points {
            let vals = ladder
                .iter()
                .map(|&r| e.eval(&Env::new(t, x, r)))
                .collect::<Result<Vec<_>>>()?;
            let worst = vals
                .windows(2)
                .map(|w| w[1] - w[0])
                .fold(f64::INFINITY, f64::min);
            margins.push(NodeMargin {
                node,
                margin: worst,
            });
            node += 1;
        }
    }
    Ok(CheckReport::from_margins(margins, MONOTONE_SLACK, false))
}
