//! Scalar expressions in the time variable `s`.
//!
//! Coefficient entries in problem configs are written as small arithmetic
//! expressions such as `2*(s+1)^2` or `1-(s+1)^3`. The grammar is
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | 's' | 'exp' '(' expr ')' | '(' expr ')'
//! ```
//!
//! so `^` binds tighter than unary minus (`-s^2` is `-(s^2)`), unary minus
//! binds tighter than `*` and `/`, and `^` is right-associative.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("division by zero at s = {s}")]
    DivisionByZero { s: f64 },
    #[error("negative base {base} raised to non-integer power {exponent} at s = {s}")]
    NegativePower { base: f64, exponent: f64, s: f64 },
    #[error("non-finite value at s = {s}")]
    NonFinite { s: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Literal(value)
    }

    pub fn parse(text: &str) -> Result<Self, ExprError> {
        parse_expression(text)
    }

    /// Evaluates the expression at time `s`.
    pub fn eval(&self, s: f64) -> Result<f64, ExprError> {
        let v = match self {
            Expr::Literal(v) => *v,
            Expr::Var => s,
            Expr::Neg(e) => -e.eval(s)?,
            Expr::Add(a, b) => a.eval(s)? + b.eval(s)?,
            Expr::Sub(a, b) => a.eval(s)? - b.eval(s)?,
            Expr::Mul(a, b) => a.eval(s)? * b.eval(s)?,
            Expr::Div(a, b) => {
                let den = b.eval(s)?;
                if den == 0.0 {
                    return Err(ExprError::DivisionByZero { s });
                }
                a.eval(s)? / den
            }
            Expr::Pow(a, b) => {
                let base = a.eval(s)?;
                let exponent = b.eval(s)?;
                if exponent.fract() == 0.0 && exponent.abs() < i32::MAX as f64 {
                    base.powi(exponent as i32)
                } else if base < 0.0 {
                    return Err(ExprError::NegativePower { base, exponent, s });
                } else {
                    base.powf(exponent)
                }
            }
            Expr::Exp(e) => e.eval(s)?.exp(),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(ExprError::NonFinite { s })
        }
    }

    /// True when the expression does not reference `s`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Literal(_) => true,
            Expr::Var => false,
            Expr::Neg(e) | Expr::Exp(e) => e.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    /// Parse-time warnings: literal division by zero and literal negative
    /// bases under non-integer literal exponents.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_warnings(&mut out);
        out
    }

    fn collect_warnings(&self, out: &mut Vec<String>) {
        match self {
            Expr::Literal(_) | Expr::Var => {}
            Expr::Neg(e) | Expr::Exp(e) => e.collect_warnings(out),
            Expr::Div(a, b) => {
                if b.is_constant() && b.eval(0.0).map(|v| v == 0.0).unwrap_or(false) {
                    out.push(format!("division by constant zero in `{self}`"));
                }
                a.collect_warnings(out);
                b.collect_warnings(out);
            }
            Expr::Pow(a, b) => {
                if a.is_constant() && b.is_constant() {
                    if let (Ok(base), Ok(exp)) = (a.eval(0.0), b.eval(0.0)) {
                        if base < 0.0 && exp.fract() != 0.0 {
                            out.push(format!("negative base to non-integer power in `{self}`"));
                        }
                    }
                }
                a.collect_warnings(out);
                b.collect_warnings(out);
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_warnings(out);
                b.collect_warnings(out);
            }
        }
    }
}

// Fully parenthesised so that printing and re-parsing is evaluation-identical.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Literal(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => {
                write!(f, "(-{})", -v)
            }
            Expr::Literal(v) => write!(f, "{v:?}"),
            Expr::Var => write!(f, "s"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Add(a, b) => write!(f, "({a}+{b})"),
            Expr::Sub(a, b) => write!(f, "({a}-{b})"),
            Expr::Mul(a, b) => write!(f, "({a}*{b})"),
            Expr::Div(a, b) => write!(f, "({a}/{b})"),
            Expr::Pow(a, b) => write!(f, "({a}^{b})"),
            Expr::Exp(e) => write!(f, "exp({e})"),
        }
    }
}

pub fn parse_expression(text: &str) -> Result<Expr, ExprError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error(format!("unexpected `{}`", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> ExprError {
        ExprError::Syntax { offset: self.pos, message: message.into() }
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

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            // right operand through `unary` gives right associativity and allows `2^-1`
            let exponent = self.unary()?;
            Ok(Expr::Pow(Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected `)`"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                match name {
                    "s" => Ok(Expr::Var),
                    "exp" => {
                        if !self.eat(b'(') {
                            return Err(self.error("expected `(` after `exp`"));
                        }
                        let e = self.expr()?;
                        if !self.eat(b')') {
                            return Err(self.error("expected `)`"));
                        }
                        Ok(Expr::Exp(Box::new(e)))
                    }
                    _ => Err(ExprError::UnknownIdentifier { offset: start, name: name.to_string() }),
                }
            }
            Some(c) => Err(self.error(format!("unexpected `{}`", c as char))),
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
        if self.pos < self.src.len() && self.src[self.pos] == b'.' {
            self.pos += 1;
            digits(self);
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                self.pos += 1;
            }
            if self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                digits(self);
            } else {
                // `2exp(s)` style input: back off and let the caller complain
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>()
            .map(Expr::Literal)
            .map_err(|_| ExprError::Syntax { offset: start, message: format!("bad number `{text}`") })
    }
}
