//! Closed-form expressions over time `t` and boundary coordinate `s`.
//!
//! Grammar: numeric literals, `pi`, `t`, `s`, binary `+ - * / ^`, unary
//! minus, parentheses and the functions `exp`, `sin`, `cos`, `ln`. Time
//! derivatives are formed symbolically.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("parse error at position {pos}: {message}")]
    Parse { pos: usize, message: String },
    #[error("evaluation error: {0}")]
    Eval(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Ln,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Ln => "ln",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    T,
    S,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

use Expr::*;

fn num(v: f64) -> Expr {
    Num(v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x + y),
        (Num(z), e) | (e, Num(z)) if z == 0.0 => e,
        (a, b) => Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x - y),
        (e, Num(0.0)) => e,
        (Num(0.0), e) => neg(e),
        (a, b) => Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(x), Num(y)) => Num(x * y),
        (Num(0.0), _) | (_, Num(0.0)) => Num(0.0),
        (Num(1.0), e) | (e, Num(1.0)) => e,
        (a, b) => Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Num(0.0), _) => Num(0.0),
        (e, Num(1.0)) => e,
        (a, b) => Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Num(x) => Num(-x),
        Neg(e) => *e,
        e => Neg(Box::new(e)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (_, Num(0.0)) => Num(1.0),
        (e, Num(1.0)) => e,
        (a, b) => Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Call(f, Box::new(a))
}

fn finite(v: f64, what: &str) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ExprError::Eval(format!("{what} produced a non-finite value")))
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, t: f64, s: f64) -> Result<f64, ExprError> {
        let v = match self {
            Num(v) => *v,
            T => t,
            S => s,
            Neg(a) => -a.eval(t, s)?,
            Add(a, b) => a.eval(t, s)? + b.eval(t, s)?,
            Sub(a, b) => a.eval(t, s)? - b.eval(t, s)?,
            Mul(a, b) => a.eval(t, s)? * b.eval(t, s)?,
            Div(a, b) => {
                let d = b.eval(t, s)?;
                if d == 0.0 {
                    return Err(ExprError::Eval("division by zero".into()));
                }
                a.eval(t, s)? / d
            }
            Pow(a, b) => {
                let (x, y) = (a.eval(t, s)?, b.eval(t, s)?);
                if x < 0.0 && y.fract() != 0.0 {
                    return Err(ExprError::Eval(format!(
                        "negative base {x} with non-integer exponent {y}"
                    )));
                }
                if x == 0.0 && y < 0.0 {
                    return Err(ExprError::Eval("zero raised to a negative power".into()));
                }
                x.powf(y)
            }
            Call(f, a) => {
                let x = a.eval(t, s)?;
                match f {
                    Func::Exp => x.exp(),
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Ln => {
                        if x <= 0.0 {
                            return Err(ExprError::Eval(format!(
                                "logarithm of non-positive value {x}"
                            )));
                        }
                        x.ln()
                    }
                }
            }
        };
        finite(v, "expression")
    }

    pub fn depends_on_t(&self) -> bool {
        self.any(&|e| matches!(e, T))
    }

    pub fn depends_on_s(&self) -> bool {
        self.any(&|e| matches!(e, S))
    }

    fn any(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Num(_) | T | S => false,
            Neg(a) | Call(_, a) => a.any(pred),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) | Pow(a, b) => {
                a.any(pred) || b.any(pred)
            }
        }
    }

    /// Symbolic derivative with respect to `t`.
    pub fn dt(&self) -> Expr {
        match self {
            Num(_) | S => num(0.0),
            T => num(1.0),
            Neg(a) => neg(a.dt()),
            Add(a, b) => add(a.dt(), b.dt()),
            Sub(a, b) => sub(a.dt(), b.dt()),
            Mul(a, b) => add(
                mul(a.dt(), (**b).clone()),
                mul((**a).clone(), b.dt()),
            ),
            Div(a, b) => div(
                sub(
                    mul(a.dt(), (**b).clone()),
                    mul((**a).clone(), b.dt()),
                ),
                pow((**b).clone(), num(2.0)),
            ),
            Pow(a, b) => {
                if !b.depends_on_t() {
                    // d(u^c) = c u^(c-1) u'
                    let c = (**b).clone();
                    mul(
                        mul(c.clone(), pow((**a).clone(), sub(c, num(1.0)))),
                        a.dt(),
                    )
                } else {
                    // d(u^v) = u^v (v' ln u + v u' / u)
                    mul(
                        self.clone(),
                        add(
                            mul(b.dt(), call(Func::Ln, (**a).clone())),
                            div(mul((**b).clone(), a.dt()), (**a).clone()),
                        ),
                    )
                }
            }
            Call(f, a) => {
                let inner = a.dt();
                let outer = match f {
                    Func::Exp => self.clone(),
                    Func::Sin => call(Func::Cos, (**a).clone()),
                    Func::Cos => neg(call(Func::Sin, (**a).clone())),
                    Func::Ln => div(num(1.0), (**a).clone()),
                };
                mul(outer, inner)
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Add(..) | Sub(..) => 1,
            Mul(..) | Div(..) => 2,
            Neg(_) => 3,
            Pow(..) => 4,
            Num(v) if *v < 0.0 => 3,
            _ => 5,
        }
    }
}

impl FromStr for Expr {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expr::parse(s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self {
            Num(v) => {
                if *v < 0.0 {
                    write!(f, "-{:?}", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            T => write!(f, "t"),
            S => write!(f, "s"),
            Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 4)
            }
            Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, b, 2)
            }
            Mul(a, b) => {
                wrap(f, a, 2)?;
                write!(f, " * ")?;
                wrap(f, b, 3)
            }
            Div(a, b) => {
                wrap(f, a, 2)?;
                write!(f, " / ")?;
                wrap(f, b, 4)
            }
            Pow(a, b) => {
                wrap(f, a, 5)?;
                write!(f, "^")?;
                wrap(f, b, 4)
            }
            Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> ExprError {
        ExprError::Parse {
            pos: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Neg(Box::new(self.unary()?)))
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Pow(Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                let func = match name {
                    "t" => return Ok(T),
                    "s" => return Ok(S),
                    "pi" => return Ok(Num(std::f64::consts::PI)),
                    "exp" => Func::Exp,
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "ln" => Func::Ln,
                    _ => {
                        return Err(ExprError::Parse {
                            pos: start,
                            message: format!("unknown identifier '{name}'"),
                        })
                    }
                };
                if self.peek() != Some(b'(') {
                    return Err(self.error("expected '(' after function name"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(Call(func, Box::new(arg)))
            }
            Some(c) => Err(self.error(&format!("unexpected character '{}'", c as char))),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<f64>().map(Num).map_err(|_| ExprError::Parse {
            pos: start,
            message: format!("invalid number '{text}'"),
        })
    }
}
