//! Arithmetic expression trees for ODE right-hand sides and control laws.
//!
//! Supported grammar: decimal numbers, declared identifiers, `+ - * / ^`
//! and parentheses. Multiplication is explicit, `^` takes a nonnegative
//! integer literal exponent, and unary minus binds tighter than `^`.
//! Evaluation comes in two flavours: plain IEEE evaluation at a point and
//! inclusion-isotone interval evaluation over a box.

use thiserror::Error;

use crate::interval::{Interval, NumericError};
use crate::scalar::{scalar, Scalar};

/// Expression AST. Variables are indices into the declared name list of the
/// owning model.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr<S> {
    Const(S),
    Var(usize),
    Neg(Box<Expr<S>>),
    Add(Box<Expr<S>>, Box<Expr<S>>),
    Sub(Box<Expr<S>>, Box<Expr<S>>),
    Mul(Box<Expr<S>>, Box<Expr<S>>),
    Div(Box<Expr<S>>, Box<Expr<S>>),
    Pow(Box<Expr<S>>, u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at column {col}: {msg}")]
    Syntax { col: usize, msg: String },
    #[error("unknown identifier `{name}` at column {col}")]
    UnknownIdent { col: usize, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("evaluation produced a non-finite value")]
    NonFinite,
}

impl From<NumericError> for EvalError {
    fn from(e: NumericError) -> Self {
        match e {
            NumericError::DivisionByZero => EvalError::DivisionByZero,
            NumericError::NonFinite => EvalError::NonFinite,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num { value: f64, is_int: bool },
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

/// Tokens tagged with the 1-based column they start at.
fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let col = i + 1;
        let c = chars[i];
        match c {
            ' ' | '\t' | '\r' | '\n' => i += 1,
            '+' => {
                toks.push((Tok::Plus, col));
                i += 1;
            }
            '-' => {
                toks.push((Tok::Minus, col));
                i += 1;
            }
            '*' => {
                toks.push((Tok::Star, col));
                i += 1;
            }
            '/' => {
                toks.push((Tok::Slash, col));
                i += 1;
            }
            '^' => {
                toks.push((Tok::Caret, col));
                i += 1;
            }
            '(' => {
                toks.push((Tok::LParen, col));
                i += 1;
            }
            ')' => {
                toks.push((Tok::RParen, col));
                i += 1;
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                let mut is_int = true;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    is_int = false;
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    is_int = false;
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    let exp_start = i;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                    if i == exp_start {
                        return Err(ParseError::Syntax {
                            col: i + 1,
                            msg: "missing exponent digits".into(),
                        });
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                    col,
                    msg: format!("invalid number `{text}`"),
                })?;
                toks.push((Tok::Num { value, is_int }, col));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_alphanumeric() || chars[i] == '_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), col));
            }
            _ => {
                return Err(ParseError::Syntax {
                    col,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a, S> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    names: &'a [String],
    end_col: usize,
    _marker: std::marker::PhantomData<S>,
}

impl<'a, S: Scalar> Parser<'a, S> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|&(_, c)| c)
            .unwrap_or(self.end_col)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr<S>, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr<S>, ParseError> {
        let mut lhs = self.pow()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.pow()?));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.pow()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn pow(&mut self) -> Result<Expr<S>, ParseError> {
        let mut base = self.unary()?;
        while matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            let col = self.col();
            match self.bump() {
                Some(Tok::Num { value, is_int })
                    if is_int && value >= 0.0 && value <= u32::MAX as f64 =>
                {
                    base = Expr::Pow(Box::new(base), value as u32);
                }
                _ => {
                    return Err(ParseError::Syntax {
                        col,
                        msg: "exponent must be a nonnegative integer literal".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr<S>, ParseError> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr<S>, ParseError> {
        let col = self.col();
        match self.bump() {
            Some(Tok::Num { value, .. }) => Ok(Expr::Const(scalar(value))),
            Some(Tok::Ident(name)) => {
                match self.names.iter().position(|n| *n == name) {
                    Some(idx) => Ok(Expr::Var(idx)),
                    None => Err(ParseError::UnknownIdent { col, name }),
                }
            }
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(Tok::RParen) => Ok(inner),
                    _ => Err(ParseError::Syntax {
                        col: self.col(),
                        msg: "expected `)`".into(),
                    }),
                }
            }
            Some(tok) => Err(ParseError::Syntax {
                col,
                msg: format!("unexpected token {tok:?}"),
            }),
            None => Err(ParseError::Syntax {
                col,
                msg: "unexpected end of expression".into(),
            }),
        }
    }
}

/// Parses an expression over the given ordered variable names.
pub fn parse_expr<S: Scalar>(text: &str, names: &[String]) -> Result<Expr<S>, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::Syntax {
            col: 1,
            msg: "empty expression".into(),
        });
    }
    let toks = tokenize(text)?;
    let end_col = text.chars().count() + 1;
    let mut parser = Parser {
        toks,
        pos: 0,
        names,
        end_col,
        _marker: std::marker::PhantomData::<S>,
    };
    let e = parser.expr()?;
    if parser.pos != parser.toks.len() {
        return Err(ParseError::Syntax {
            col: parser.col(),
            msg: "trailing input after expression".into(),
        });
    }
    Ok(e)
}

impl<S: Scalar> Expr<S> {
    /// Constant that keeps the stored value nonnegative by wrapping negative
    /// folds in `Neg`, so printed trees re-parse to the same structure.
    fn const_expr(v: S) -> Expr<S> {
        if v < S::zero() {
            Expr::Neg(Box::new(Expr::Const(-v)))
        } else {
            Expr::Const(v)
        }
    }

    fn const_value(&self) -> Option<S> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::Neg(e) => e.const_value().map(|c| -c),
            _ => None,
        }
    }

    fn is_zero(&self) -> bool {
        self.const_value() == Some(S::zero())
    }

    fn is_one(&self) -> bool {
        self.const_value() == Some(S::one())
    }

    /// Smart constructors used by differentiation; they fold the obvious
    /// identities so Lie derivatives stay compact. These are associated
    /// constructors, not operator impls.
    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr<S>, b: Expr<S>) -> Expr<S> {
        if a.is_zero() {
            return b;
        }
        if b.is_zero() {
            return a;
        }
        match (a.const_value(), b.const_value()) {
            (Some(x), Some(y)) => Expr::const_expr(x + y),
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr<S>, b: Expr<S>) -> Expr<S> {
        if b.is_zero() {
            return a;
        }
        if a.is_zero() {
            return Expr::neg(b);
        }
        match (a.const_value(), b.const_value()) {
            (Some(x), Some(y)) => Expr::const_expr(x - y),
            _ => Expr::Sub(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr<S>, b: Expr<S>) -> Expr<S> {
        if a.is_zero() || b.is_zero() {
            return Expr::Const(S::zero());
        }
        if a.is_one() {
            return b;
        }
        if b.is_one() {
            return a;
        }
        match (a.const_value(), b.const_value()) {
            (Some(x), Some(y)) => Expr::const_expr(x * y),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(a: Expr<S>, b: Expr<S>) -> Expr<S> {
        if a.is_zero() {
            return Expr::Const(S::zero());
        }
        if b.is_one() {
            return a;
        }
        Expr::Div(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr<S>) -> Expr<S> {
        if a.is_zero() {
            return Expr::Const(S::zero());
        }
        match a {
            Expr::Neg(inner) => *inner,
            other => Expr::Neg(Box::new(other)),
        }
    }

    pub fn pow(a: Expr<S>, n: u32) -> Expr<S> {
        match n {
            0 => Expr::Const(S::one()),
            1 => a,
            _ => match a.const_value() {
                Some(c) => Expr::const_expr(c.powi(n as i32)),
                None => Expr::Pow(Box::new(a), n),
            },
        }
    }

    /// Replaces every variable by the expression `subst` maps it to.
    pub fn substitute(&self, subst: &impl Fn(usize) -> Expr<S>) -> Expr<S> {
        match self {
            Expr::Const(c) => Expr::Const(*c),
            Expr::Var(i) => subst(*i),
            Expr::Neg(e) => Expr::neg(e.substitute(subst)),
            Expr::Add(a, b) => Expr::add(a.substitute(subst), b.substitute(subst)),
            Expr::Sub(a, b) => Expr::sub(a.substitute(subst), b.substitute(subst)),
            Expr::Mul(a, b) => Expr::mul(a.substitute(subst), b.substitute(subst)),
            Expr::Div(a, b) => Expr::div(a.substitute(subst), b.substitute(subst)),
            Expr::Pow(e, n) => Expr::pow(e.substitute(subst), *n),
        }
    }

    /// Shifts every variable index up by `offset`.
    pub fn shift_vars(&self, offset: usize) -> Expr<S> {
        self.substitute(&|i| Expr::Var(i + offset))
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) => e.max_var(),
            Expr::Pow(e, _) => e.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    /// IEEE evaluation at a point.
    pub fn eval_real(&self, point: &[S]) -> Result<S, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => point[*i],
            Expr::Neg(e) => -e.eval_real(point)?,
            Expr::Add(a, b) => a.eval_real(point)? + b.eval_real(point)?,
            Expr::Sub(a, b) => a.eval_real(point)? - b.eval_real(point)?,
            Expr::Mul(a, b) => a.eval_real(point)? * b.eval_real(point)?,
            Expr::Div(a, b) => {
                let d = b.eval_real(point)?;
                if d == S::zero() {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval_real(point)? / d
            }
            Expr::Pow(e, n) => e.eval_real(point)?.powi(*n as i32),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    /// Outward-rounded interval evaluation over a box; the result contains
    /// `{eval_real(x) : x in box}`.
    pub fn eval_interval(&self, box_: &[Interval<S>]) -> Result<Interval<S>, EvalError> {
        Ok(match self {
            Expr::Const(c) => Interval::point(*c),
            Expr::Var(i) => box_[*i],
            Expr::Neg(e) => e.eval_interval(box_)?.neg(),
            Expr::Add(a, b) => a.eval_interval(box_)?.checked_add(&b.eval_interval(box_)?)?,
            Expr::Sub(a, b) => a.eval_interval(box_)?.checked_sub(&b.eval_interval(box_)?)?,
            Expr::Mul(a, b) => a.eval_interval(box_)?.checked_mul(&b.eval_interval(box_)?)?,
            Expr::Div(a, b) => a.eval_interval(box_)?.checked_div(&b.eval_interval(box_)?)?,
            Expr::Pow(e, n) => e.eval_interval(box_)?.checked_powi(*n)?,
        })
    }

    /// Symbolic partial derivative with respect to variable `var`.
    pub fn differentiate(&self, var: usize) -> Expr<S> {
        match self {
            Expr::Const(_) => Expr::Const(S::zero()),
            Expr::Var(i) => {
                if *i == var {
                    Expr::Const(S::one())
                } else {
                    Expr::Const(S::zero())
                }
            }
            Expr::Neg(e) => Expr::neg(e.differentiate(var)),
            Expr::Add(a, b) => Expr::add(a.differentiate(var), b.differentiate(var)),
            Expr::Sub(a, b) => Expr::sub(a.differentiate(var), b.differentiate(var)),
            Expr::Mul(a, b) => Expr::add(
                Expr::mul(a.differentiate(var), (**b).clone()),
                Expr::mul((**a).clone(), b.differentiate(var)),
            ),
            Expr::Div(a, b) => {
                // (a/b)' = (a'b - ab') / b^2
                let num = Expr::sub(
                    Expr::mul(a.differentiate(var), (**b).clone()),
                    Expr::mul((**a).clone(), b.differentiate(var)),
                );
                Expr::div(num, Expr::pow((**b).clone(), 2))
            }
            Expr::Pow(e, n) => {
                let n = *n;
                if n == 0 {
                    return Expr::Const(S::zero());
                }
                Expr::mul(
                    Expr::mul(
                        Expr::Const(scalar(n as f64)),
                        Expr::pow((**e).clone(), n - 1),
                    ),
                    e.differentiate(var),
                )
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(_) | Expr::Var(_) => 5,
            Expr::Neg(_) => 4,
            Expr::Pow(..) => 3,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Add(..) | Expr::Sub(..) => 1,
        }
    }

    fn write(&self, out: &mut String, names: &[String], min_prec: u8) {
        let prec = self.precedence();
        let parens = prec < min_prec;
        if parens {
            out.push('(');
        }
        match self {
            Expr::Const(c) => out.push_str(&format!("{c}")),
            Expr::Var(i) => out.push_str(&names[*i]),
            Expr::Neg(e) => {
                out.push('-');
                e.write(out, names, 4);
            }
            Expr::Pow(e, n) => {
                e.write(out, names, 4);
                out.push_str(&format!("^{n}"));
            }
            Expr::Mul(a, b) => {
                a.write(out, names, 2);
                out.push_str(" * ");
                b.write(out, names, 3);
            }
            Expr::Div(a, b) => {
                a.write(out, names, 2);
                out.push_str(" / ");
                b.write(out, names, 3);
            }
            Expr::Add(a, b) => {
                a.write(out, names, 1);
                out.push_str(" + ");
                b.write(out, names, 2);
            }
            Expr::Sub(a, b) => {
                a.write(out, names, 1);
                out.push_str(" - ");
                b.write(out, names, 2);
            }
        }
        if parens {
            out.push(')');
        }
    }

    /// Renders the expression so that `parse_expr(text, names)` reproduces
    /// the same tree (for parser-producible trees, whose constants are
    /// nonnegative).
    pub fn to_text(&self, names: &[String]) -> String {
        let mut out = String::new();
        self.write(&mut out, names, 0);
        out
    }
}
