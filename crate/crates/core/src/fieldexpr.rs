//! Arithmetic expression trees for scalar fields.
//!
//! Exponents, weights, and radial profiles are specified in configuration
//! files as plain formulas such as `2 + 1/(1 - x1)` or `exp(-r^2)`, so the
//! rest of the crate never needs recompilation to change a scenario. This
//! module provides the expression type, a recursive-descent parser with byte
//! offsets in its errors, evaluation with checked singularities (no silent
//! `inf`/`NaN`), central-difference gradients, and the [`ScalarField`]
//! wrapper shared by every other module.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Relative step used by central differences when no step is given.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Abs,
    Sqrt,
    Min,
    Max,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "abs" => Some(Func::Abs),
            "sqrt" => Some(Func::Sqrt),
            "min" => Some(Func::Min),
            "max" => Some(Func::Max),
            _ => None,
        }
    }
}

/// Expression tree. Immutable after parsing; evaluation is pure.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Zero-based coordinate index; `x1` parses to `Coord(0)`.
    Coord(usize),
    /// Euclidean norm of the evaluation point (the variable `r`).
    Radius,
    Pi,
    Euler,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: expected {expected}, found {found}")]
    Syntax {
        offset: usize,
        expected: String,
        found: String,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdent { offset: usize, name: String },
    #[error("`{name}` takes {expected} argument(s), got {got} (at byte {offset})")]
    Arity {
        offset: usize,
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("malformed number at byte {offset}")]
    BadNumber { offset: usize },
}

/// Checked-evaluation failure. Shared by every numeric closure in the crate,
/// not just parsed expressions.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("singular evaluation: {0}")]
    Singular(String),
    #[error("point has dimension {got}, expression needs at least {needed}")]
    Dimension { needed: usize, got: usize },
    #[error("non-finite result in `{0}`")]
    NonFinite(String),
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number `{v}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '+' => {
                toks.push((i, Tok::Plus));
                i += 1;
            }
            '-' => {
                toks.push((i, Tok::Minus));
                i += 1;
            }
            '*' => {
                toks.push((i, Tok::Star));
                i += 1;
            }
            '/' => {
                toks.push((i, Tok::Slash));
                i += 1;
            }
            '^' => {
                toks.push((i, Tok::Caret));
                i += 1;
            }
            '(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            ')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            ',' => {
                toks.push((i, Tok::Comma));
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // Exponent suffix only when digits follow; a bare trailing
                // `e` stays an identifier token (Euler's constant).
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit
                    .parse()
                    .map_err(|_| ParseError::BadNumber { offset: start })?;
                toks.push((start, Tok::Num(v)));
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((start, Tok::Ident(text[start..i].to_string())));
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: i,
                    expected: "a token".into(),
                    found: format!("`{c}`"),
                })
            }
        }
    }
    toks.push((text.len(), Tok::End));
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &(usize, Tok) {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> (usize, Tok) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, expected: &str) -> Result<(), ParseError> {
        let (off, tok) = self.peek().clone();
        if &tok == want {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::Syntax {
                offset: off,
                expected: expected.into(),
                found: tok.describe(),
            })
        }
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.mul_expr()?;
        loop {
            match self.peek().1 {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.mul_expr()?;
                    lhs = Expr::Bin(BinOp::Add, Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.mul_expr()?;
                    lhs = Expr::Bin(BinOp::Sub, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek().1 {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expr::Bin(BinOp::Mul, Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expr::Bin(BinOp::Div, Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if matches!(self.peek().1, Tok::Minus) {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.pow_expr()
    }

    fn pow_expr(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek().1, Tok::Caret) {
            self.bump();
            // Right-associative; exponent may carry a unary sign: `2^-3`.
            let exponent = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let (off, tok) = self.bump();
        match tok {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let inner = self.add_expr()?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => self.ident(off, name),
            other => Err(ParseError::Syntax {
                offset: off,
                expected: "a number, `(`, an identifier, or unary `-`".into(),
                found: other.describe(),
            }),
        }
    }

    fn ident(&mut self, off: usize, name: String) -> Result<Expr, ParseError> {
        if let Some(f) = Func::from_name(&name) {
            self.expect(&Tok::LParen, "`(` after function name")?;
            let mut args = vec![self.add_expr()?];
            while matches!(self.peek().1, Tok::Comma) {
                self.bump();
                args.push(self.add_expr()?);
            }
            self.expect(&Tok::RParen, "`)` or `,`")?;
            if args.len() != f.arity() {
                return Err(ParseError::Arity {
                    offset: off,
                    name: name.clone(),
                    expected: f.arity(),
                    got: args.len(),
                });
            }
            return Ok(Expr::Call(f, args));
        }
        match name.as_str() {
            "r" => Ok(Expr::Radius),
            "pi" => Ok(Expr::Pi),
            "e" => Ok(Expr::Euler),
            _ => {
                if let Some(rest) = name.strip_prefix('x') {
                    if let Ok(idx) = rest.parse::<usize>() {
                        if idx >= 1 {
                            return Ok(Expr::Coord(idx - 1));
                        }
                    }
                }
                Err(ParseError::UnknownIdent { offset: off, name })
            }
        }
    }
}

/// Parse an expression from text.
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let toks = lex(text)?;
    let mut p = Parser { toks: &toks, pos: 0 };
    let e = p.add_expr()?;
    let (off, tok) = p.peek().clone();
    if tok != Tok::End {
        return Err(ParseError::Syntax {
            offset: off,
            expected: "end of input or an operator".into(),
            found: tok.describe(),
        });
    }
    Ok(e)
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

// Precedence levels used by the printer so that parse(print(e)) == e:
// additive 1, multiplicative 2, unary minus 3, power 4, atoms 5.
fn level(e: &Expr) -> u8 {
    match e {
        Expr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Expr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
        Expr::Neg(..) => 3,
        Expr::Bin(BinOp::Pow, ..) => 4,
        _ => 5,
    }
}

fn write_prec(e: &Expr, min: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let lv = level(e);
    let paren = lv < min;
    if paren {
        write!(f, "(")?;
    }
    match e {
        Expr::Num(v) => write!(f, "{v}")?,
        Expr::Coord(i) => write!(f, "x{}", i + 1)?,
        Expr::Radius => write!(f, "r")?,
        Expr::Pi => write!(f, "pi")?,
        Expr::Euler => write!(f, "e")?,
        Expr::Neg(inner) => {
            write!(f, "-")?;
            write_prec(inner, 3, f)?;
        }
        Expr::Bin(op, l, r) => {
            let (sym, ll, rl) = match op {
                BinOp::Add => ("+", 1, 2),
                BinOp::Sub => ("-", 1, 2),
                BinOp::Mul => ("*", 2, 3),
                BinOp::Div => ("/", 2, 3),
                BinOp::Pow => ("^", 5, 3),
            };
            write_prec(l, ll, f)?;
            write!(f, " {sym} ")?;
            write_prec(r, rl, f)?;
        }
        Expr::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write_prec(a, 1, f)?;
            }
            write!(f, ")")?;
        }
    }
    if paren {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_prec(self, 1, f)
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn checked_pow(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base > 0.0 {
        return finite(base.powf(exponent), "power");
    }
    if base == 0.0 {
        if exponent > 0.0 {
            return Ok(0.0);
        }
        if exponent == 0.0 {
            return Ok(1.0);
        }
        return Err(EvalError::Singular("0 raised to a negative power".into()));
    }
    // Negative base: only integer exponents, with repeated-multiplication
    // semantics (sign from parity).
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        return finite(base.powi(exponent as i32), "power");
    }
    Err(EvalError::Singular(format!(
        "negative base {base} with non-integer exponent {exponent}"
    )))
}

fn finite(v: f64, what: &str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::NonFinite(what.into()))
    }
}

impl Expr {
    /// Evaluate at `point`. Total except at mathematical singularities, which
    /// surface as `Err` rather than as `inf`/`NaN`.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        match self {
            Expr::Num(v) => Ok(*v),
            Expr::Coord(i) => point.get(*i).copied().ok_or(EvalError::Dimension {
                needed: *i + 1,
                got: point.len(),
            }),
            Expr::Radius => {
                let s: f64 = point.iter().map(|x| x * x).sum();
                Ok(s.sqrt())
            }
            Expr::Pi => Ok(std::f64::consts::PI),
            Expr::Euler => Ok(std::f64::consts::E),
            Expr::Neg(inner) => Ok(-inner.eval(point)?),
            Expr::Bin(op, l, r) => {
                let a = l.eval(point)?;
                let b = r.eval(point)?;
                match op {
                    BinOp::Add => finite(a + b, "sum"),
                    BinOp::Sub => finite(a - b, "difference"),
                    BinOp::Mul => finite(a * b, "product"),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(EvalError::Singular("division by zero".into()))
                        } else {
                            finite(a / b, "quotient")
                        }
                    }
                    BinOp::Pow => checked_pow(a, b),
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval(point)?;
                match func {
                    Func::Exp => finite(a.exp(), "exp"),
                    Func::Log => {
                        if a <= 0.0 {
                            Err(EvalError::Singular(format!("log of non-positive {a}")))
                        } else {
                            Ok(a.ln())
                        }
                    }
                    Func::Abs => Ok(a.abs()),
                    Func::Sqrt => {
                        if a < 0.0 {
                            Err(EvalError::Singular(format!("sqrt of negative {a}")))
                        } else {
                            Ok(a.sqrt())
                        }
                    }
                    Func::Min => Ok(a.min(args[1].eval(point)?)),
                    Func::Max => Ok(a.max(args[1].eval(point)?)),
                }
            }
        }
    }

    /// Central-difference gradient with per-coordinate step
    /// `step * max(1, |x_i|)`; `step` defaults to [`DEFAULT_FD_STEP`].
    pub fn grad_numeric(&self, point: &[f64], step: Option<f64>) -> Result<Vec<f64>, EvalError> {
        central_gradient(|x| self.eval(x), point, step)
    }

    /// Highest coordinate index + 1 referenced by the expression.
    pub fn min_dimension(&self) -> usize {
        match self {
            Expr::Coord(i) => i + 1,
            Expr::Neg(inner) => inner.min_dimension(),
            Expr::Bin(_, l, r) => l.min_dimension().max(r.min_dimension()),
            Expr::Call(_, args) => args.iter().map(|a| a.min_dimension()).max().unwrap_or(0),
            _ => 0,
        }
    }
}

/// Componentwise central differences of an arbitrary evaluator.
pub fn central_gradient<F>(f: F, point: &[f64], step: Option<f64>) -> Result<Vec<f64>, EvalError>
where
    F: Fn(&[f64]) -> Result<f64, EvalError>,
{
    let scale = step.unwrap_or(DEFAULT_FD_STEP);
    let mut grad = Vec::with_capacity(point.len());
    let mut work = point.to_vec();
    for i in 0..point.len() {
        let h = scale * point[i].abs().max(1.0);
        let xp = point[i] + h;
        let xm = point[i] - h;
        work[i] = xp;
        let fp = f(&work)?;
        work[i] = xm;
        let fm = f(&work)?;
        work[i] = point[i];
        // xp - xm is the exactly-realized step, absorbing rounding in x ± h.
        grad.push((fp - fm) / (xp - xm));
    }
    Ok(grad)
}

// ---------------------------------------------------------------------------
// ScalarField
// ---------------------------------------------------------------------------

type EvalFn = dyn Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Result<Vec<f64>, EvalError> + Send + Sync;

/// An evaluable map from points to reals with an optional analytic gradient.
/// Cloning is cheap; evaluation is pure and safe to call concurrently.
#[derive(Clone)]
pub struct ScalarField {
    eval: Arc<EvalFn>,
    grad: Option<Arc<GradFn>>,
    label: Arc<str>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.label)
    }
}

impl ScalarField {
    pub fn from_expr(expr: Expr) -> Self {
        let label: Arc<str> = expr.to_string().into();
        ScalarField {
            eval: Arc::new(move |x| expr.eval(x)),
            grad: None,
            label,
        }
    }

    /// Parse `text` and wrap the result.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        Ok(Self::from_expr(parse(text)?))
    }

    pub fn from_fn<F>(label: &str, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync + 'static,
    {
        ScalarField {
            eval: Arc::new(f),
            grad: None,
            label: label.into(),
        }
    }

    pub fn constant(c: f64) -> Self {
        ScalarField {
            eval: Arc::new(move |_| Ok(c)),
            grad: Some(Arc::new(move |x: &[f64]| Ok(vec![0.0; x.len()]))),
            label: format!("{c}").into(),
        }
    }

    /// Attach an analytic gradient.
    pub fn with_gradient<G>(mut self, g: G) -> Self
    where
        G: Fn(&[f64]) -> Result<Vec<f64>, EvalError> + Send + Sync + 'static,
    {
        self.grad = Some(Arc::new(g));
        self
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, EvalError> {
        (self.eval)(x)
    }

    /// Analytic gradient when present, central differences otherwise.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        match &self.grad {
            Some(g) => g(x),
            None => {
                let eval = &self.eval;
                central_gradient(|y| eval(y), x, None)
            }
        }
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}
