//! Mini-language for scalar fields over the two coordinates `x1`, `x2`.
//!
//! Binding from loosest to tightest: `+ -`, `* /`, unary `-`, `^`
//! (right-associative). Atoms are decimal literals, the constants `pi` and
//! `e`, the coordinates `x1`/`x2`, parenthesized expressions, and calls of
//! `sin cos tan exp log sqrt sinh cosh abs`. `log` is the natural logarithm.
//! There is no implicit multiplication.
//!
//! Evaluation is total in the sense that every fault is reported as an
//! [`EvalError`] naming the offending subexpression; no NaN or infinity ever
//! escapes silently.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;

use num_traits::Float;

/// Built-in unary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    E,
    X1,
    X2,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Syntax error with the byte offset it was detected at.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub offset: usize,
    pub expected: &'static str,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at byte {}: expected {}, found {}",
            self.offset, self.expected, self.found
        )
    }
}

impl core::error::Error for ParseError {}

/// What went wrong while evaluating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalFault {
    DivisionByZero,
    LogDomain,
    SqrtDomain,
    PowDomain,
    NonFinite,
}

/// Evaluation fault together with the offending subexpression.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalError {
    pub fault: EvalFault,
    pub subexpr: String,
}

impl EvalError {
    pub fn non_finite(what: &str) -> EvalError {
        EvalError {
            fault: EvalFault::NonFinite,
            subexpr: what.to_string(),
        }
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.fault {
            EvalFault::DivisionByZero => "division by zero",
            EvalFault::LogDomain => "log of a nonpositive value",
            EvalFault::SqrtDomain => "sqrt of a negative value",
            EvalFault::PowDomain => "power with no real value",
            EvalFault::NonFinite => "non-finite result",
        };
        write!(f, "{} in `{}`", what, self.subexpr)
    }
}

impl core::error::Error for EvalError {}

// Parenthesis nesting deeper than this is rejected rather than risking the
// stack; no handwritten field comes anywhere near it.
const MAX_DEPTH: usize = 256;

impl Expr {
    /// Parses `src`; errors carry the byte offset and the expected token set.
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        let mut p = Parser {
            src: src.as_bytes(),
            text: src,
            pos: 0,
            depth: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err_here("end of input or an operator"));
        }
        Ok(e)
    }

    /// Evaluates at the point `(x1, x2)`.
    pub fn eval(&self, x1: f64, x2: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(c) => *c,
            Expr::Pi => core::f64::consts::PI,
            Expr::E => core::f64::consts::E,
            Expr::X1 => x1,
            Expr::X2 => x2,
            Expr::Neg(a) => -a.eval(x1, x2)?,
            Expr::Add(a, b) => a.eval(x1, x2)? + b.eval(x1, x2)?,
            Expr::Sub(a, b) => a.eval(x1, x2)? - b.eval(x1, x2)?,
            Expr::Mul(a, b) => a.eval(x1, x2)? * b.eval(x1, x2)?,
            Expr::Div(a, b) => {
                let d = b.eval(x1, x2)?;
                if d == 0.0 {
                    return Err(self.fault(EvalFault::DivisionByZero));
                }
                a.eval(x1, x2)? / d
            }
            Expr::Pow(a, b) => {
                let base = a.eval(x1, x2)?;
                let ex = b.eval(x1, x2)?;
                self.pow(base, ex)?
            }
            Expr::Call(func, a) => {
                let v = a.eval(x1, x2)?;
                match func {
                    Func::Sin => Float::sin(v),
                    Func::Cos => Float::cos(v),
                    Func::Tan => Float::tan(v),
                    Func::Exp => Float::exp(v),
                    Func::Log => {
                        if v <= 0.0 {
                            return Err(self.fault(EvalFault::LogDomain));
                        }
                        Float::ln(v)
                    }
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(self.fault(EvalFault::SqrtDomain));
                        }
                        Float::sqrt(v)
                    }
                    Func::Sinh => Float::sinh(v),
                    Func::Cosh => Float::cosh(v),
                    Func::Abs => Float::abs(v),
                }
            }
        };
        if !v.is_finite() {
            return Err(self.fault(EvalFault::NonFinite));
        }
        Ok(v)
    }

    // Integer exponents up to |n| = 8 go through repeated multiplication so
    // that negative bases stay exact; everything else uses powf.
    fn pow(&self, base: f64, ex: f64) -> Result<f64, EvalError> {
        if Float::fract(ex) == 0.0 && Float::abs(ex) <= 8.0 {
            let n = ex as i32;
            let mut r = 1.0f64;
            for _ in 0..n.unsigned_abs() {
                r *= base;
            }
            if n < 0 {
                if r == 0.0 {
                    return Err(self.fault(EvalFault::DivisionByZero));
                }
                r = 1.0 / r;
            }
            Ok(r)
        } else {
            let v = Float::powf(base, ex);
            if v.is_nan() {
                return Err(self.fault(EvalFault::PowDomain));
            }
            Ok(v)
        }
    }

    fn fault(&self, fault: EvalFault) -> EvalError {
        EvalError {
            fault,
            subexpr: format!("{}", self),
        }
    }
}

// Printing is fully parenthesized, so parsing the output reproduces the tree
// exactly (literals round-trip through the shortest-digits formatting).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) => write!(f, "{:?}", c),
            Expr::Pi => write!(f, "pi"),
            Expr::E => write!(f, "e"),
            Expr::X1 => write!(f, "x1"),
            Expr::X2 => write!(f, "x2"),
            Expr::Neg(a) => write!(f, "(-{})", a),
            Expr::Add(a, b) => write!(f, "({}+{})", a, b),
            Expr::Sub(a, b) => write!(f, "({}-{})", a, b),
            Expr::Mul(a, b) => write!(f, "({}*{})", a, b),
            Expr::Div(a, b) => write!(f, "({}/{})", a, b),
            Expr::Pow(a, b) => write!(f, "({}^{})", a, b),
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), a),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn err_here(&self, expected: &'static str) -> ParseError {
        let found = match self.text[self.pos.min(self.text.len())..].chars().next() {
            Some(c) => format!("`{}`", c),
            None => "end of input".to_string(),
        };
        ParseError {
            offset: self.pos,
            expected,
            found,
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(ParseError {
                offset: self.pos,
                expected: "a shallower expression (nesting limit exceeded)",
                found: "deeply nested input".to_string(),
            });
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => break,
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let e = if self.peek() == Some(b'-') {
            self.pos += 1;
            Expr::Neg(Box::new(self.unary()?))
        } else {
            self.power()?
        };
        self.depth -= 1;
        Ok(e)
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let ex = self.unary()?;
            Ok(Expr::Pow(Box::new(base), Box::new(ex)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err_here("`)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err_here("a number, `pi`, `e`, `x1`, `x2`, a function call, `-`, or `(`")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            if !self
                .src
                .get(self.pos)
                .is_some_and(|c| c.is_ascii_digit())
            {
                return Err(self.err_here("a digit after the decimal point"));
            }
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
        }
        // `e`/`E` starts an exponent only when digits follow; otherwise it is
        // left alone (it may be Euler's constant after an operator).
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let mut probe = self.pos + 1;
            if matches!(self.src.get(probe), Some(b'+') | Some(b'-')) {
                probe += 1;
            }
            if self.src.get(probe).is_some_and(|c| c.is_ascii_digit()) {
                self.pos = probe;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let lit = &self.text[start..self.pos];
        match lit.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Expr::Num(v)),
            _ => Err(ParseError {
                offset: start,
                expected: "a representable number",
                found: format!("`{}`", lit),
            }),
        }
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric())
        {
            self.pos += 1;
        }
        let name = &self.text[start..self.pos];
        match name {
            "pi" => return Ok(Expr::Pi),
            "e" => return Ok(Expr::E),
            "x1" => return Ok(Expr::X1),
            "x2" => return Ok(Expr::X2),
            _ => {}
        }
        if let Some(func) = Func::from_name(name) {
            if self.peek() != Some(b'(') {
                return Err(self.err_here("`(` after a function name"));
            }
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.err_here("`)`"));
            }
            self.pos += 1;
            return Ok(Expr::Call(func, Box::new(arg)));
        }
        Err(ParseError {
            offset: start,
            expected: "one of pi, e, x1, x2, sin, cos, tan, exp, log, sqrt, sinh, cosh, abs",
            found: format!("`{}`", name),
        })
    }
}
