//! Scalar expressions over `t`, `lambda` and the state components `x1..xn`.
//!
//! Expressions are parsed from text, evaluated in an [`EvalContext`] and
//! differentiated symbolically. Trees are immutable once built.

mod diff;
mod display;
mod parse;

use std::collections::BTreeMap;
use std::fmt;

pub use diff::DiffError;
pub use parse::{ParseError, ParseErrorKind};

/// A variable that may appear in an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    T,
    Lambda,
    /// Zero-based state index; `x1` is `X(0)`.
    X(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::T => f.write_str("t"),
            Var::Lambda => f.write_str("lambda"),
            Var::X(i) => write!(f, "x{}", i + 1),
        }
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

/// The closed set of callable functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Pow,
    Max,
    Min,
    Heaviside,
}

impl Func {
    pub const ALL: [Func; 11] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Ln,
        Func::Sqrt,
        Func::Abs,
        Func::Pow,
        Func::Max,
        Func::Min,
        Func::Heaviside,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Pow => "pow",
            Func::Max => "max",
            Func::Min => "min",
            Func::Heaviside => "heaviside",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow | Func::Max | Func::Min => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Bindings for evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub t: f64,
    pub lambda: f64,
    pub x: &'a [f64],
}

impl<'a> EvalContext<'a> {
    pub fn new(t: f64, lambda: f64, x: &'a [f64]) -> Self {
        Self { t, lambda, x }
    }

    /// Context for expressions that depend on time only.
    pub fn time(t: f64) -> EvalContext<'static> {
        EvalContext { t, lambda: 0.0, x: &[] }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("ln of non-positive value {value} in `{node}`")]
    LogDomain { value: f64, node: String },
    #[error("sqrt of negative value {value} in `{node}`")]
    SqrtDomain { value: f64, node: String },
    #[error("division by zero in `{node}`")]
    DivisionByZero { node: String },
    #[error("non-real power {base}^{exponent} in `{node}`")]
    PowDomain { base: f64, exponent: f64, node: String },
    #[error("variable {var} is not bound (state has {len} components)")]
    Unbound { var: Var, len: usize },
}

/// Which identifiers a parse accepts.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    /// Number of state components (`x1..xn`).
    pub dim: usize,
    pub allow_t: bool,
    pub allow_lambda: bool,
    /// Named sub-expressions substituted at parse time.
    pub params: BTreeMap<String, Expr>,
}

impl Scope {
    /// `t`, `lambda` and `x1..x{dim}`.
    pub fn full(dim: usize) -> Self {
        Self { dim, allow_t: true, allow_lambda: true, params: BTreeMap::new() }
    }

    /// `t` and `x1..x{dim}`; no parameter dependence.
    pub fn state(dim: usize) -> Self {
        Self { dim, allow_t: true, allow_lambda: false, params: BTreeMap::new() }
    }

    /// `t` only.
    pub fn time() -> Self {
        Self { dim: 0, allow_t: true, allow_lambda: false, params: BTreeMap::new() }
    }

    pub fn with_params(mut self, params: BTreeMap<String, Expr>) -> Self {
        self.params = params;
        self
    }
}

impl Expr {
    /// Parses with the full variable set for dimension `dim`.
    pub fn parse(source: &str, dim: usize) -> Result<Expr, ParseError> {
        parse::parse(source, &Scope::full(dim))
    }

    pub fn parse_scoped(source: &str, scope: &Scope) -> Result<Expr, ParseError> {
        parse::parse(source, scope)
    }

    pub fn constant(value: f64) -> Expr {
        Expr::Const(value)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    /// True when `v` occurs anywhere in the tree.
    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) => a.depends_on(v),
            Expr::Binary(_, a, b) => a.depends_on(v) || b.depends_on(v),
            Expr::Call(_, args) => args.iter().any(|a| a.depends_on(v)),
        }
    }

    /// Visits every variable in the tree.
    pub fn for_each_var(&self, f: &mut impl FnMut(Var)) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => f(*v),
            Expr::Neg(a) => a.for_each_var(f),
            Expr::Binary(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
            Expr::Call(_, args) => args.iter().for_each(|a| a.for_each_var(f)),
        }
    }

    pub fn evaluate(&self, ctx: &EvalContext<'_>) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(Var::T) => Ok(ctx.t),
            Expr::Var(Var::Lambda) => Ok(ctx.lambda),
            Expr::Var(Var::X(i)) => ctx
                .x
                .get(*i)
                .copied()
                .ok_or(EvalError::Unbound { var: Var::X(*i), len: ctx.x.len() }),
            Expr::Neg(a) => Ok(-a.evaluate(ctx)?),
            Expr::Binary(op, a, b) => {
                let u = a.evaluate(ctx)?;
                let w = b.evaluate(ctx)?;
                match op {
                    BinOp::Add => Ok(u + w),
                    BinOp::Sub => Ok(u - w),
                    BinOp::Mul => Ok(u * w),
                    BinOp::Div => {
                        if w == 0.0 {
                            Err(EvalError::DivisionByZero { node: self.to_string() })
                        } else {
                            Ok(u / w)
                        }
                    }
                    BinOp::Pow => self.power(u, w),
                }
            }
            Expr::Call(func, args) => {
                let u = args[0].evaluate(ctx)?;
                match func {
                    Func::Sin => Ok(u.sin()),
                    Func::Cos => Ok(u.cos()),
                    Func::Tan => Ok(u.tan()),
                    Func::Exp => Ok(u.exp()),
                    Func::Ln => {
                        if u > 0.0 {
                            Ok(u.ln())
                        } else {
                            Err(EvalError::LogDomain { value: u, node: self.to_string() })
                        }
                    }
                    Func::Sqrt => {
                        if u >= 0.0 {
                            Ok(u.sqrt())
                        } else {
                            Err(EvalError::SqrtDomain { value: u, node: self.to_string() })
                        }
                    }
                    Func::Abs => Ok(u.abs()),
                    Func::Heaviside => Ok(if u > 0.0 { 1.0 } else { 0.0 }),
                    Func::Pow => {
                        let w = args[1].evaluate(ctx)?;
                        self.power(u, w)
                    }
                    Func::Max => Ok(u.max(args[1].evaluate(ctx)?)),
                    Func::Min => Ok(u.min(args[1].evaluate(ctx)?)),
                }
            }
        }
    }

    fn power(&self, base: f64, exponent: f64) -> Result<f64, EvalError> {
        if base == 0.0 && exponent < 0.0 {
            return Err(EvalError::DivisionByZero { node: self.to_string() });
        }
        if base < 0.0 && exponent.fract() != 0.0 {
            return Err(EvalError::PowDomain { base, exponent, node: self.to_string() });
        }
        Ok(base.powf(exponent))
    }

    /// Partial derivative with respect to `var`, lightly simplified.
    pub fn differentiate(&self, var: Var) -> Result<Expr, DiffError> {
        diff::differentiate(self, var)
    }
}

// Constructors with constant folding and 0/1 elimination.

fn fold(value: f64, otherwise: impl FnOnce() -> Expr) -> Expr {
    if value.is_finite() {
        Expr::Const(value)
    } else {
        otherwise()
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => fold(x + y, || Expr::Binary(BinOp::Add, a.into(), b.into())),
        (Some(0.0), _) => b,
        (_, Some(0.0)) => a,
        _ => Expr::Binary(BinOp::Add, a.into(), b.into()),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => fold(x - y, || Expr::Binary(BinOp::Sub, a.into(), b.into())),
        (Some(0.0), _) => neg(b),
        (_, Some(0.0)) => a,
        _ => Expr::Binary(BinOp::Sub, a.into(), b.into()),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => fold(x * y, || Expr::Binary(BinOp::Mul, a.into(), b.into())),
        (Some(0.0), _) | (_, Some(0.0)) => Expr::Const(0.0),
        (Some(1.0), _) => b,
        (_, Some(1.0)) => a,
        (Some(-1.0), _) => neg(b),
        (_, Some(-1.0)) => neg(a),
        _ => Expr::Binary(BinOp::Mul, a.into(), b.into()),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if y != 0.0 => {
            fold(x / y, || Expr::Binary(BinOp::Div, a.into(), b.into()))
        }
        (Some(0.0), _) => Expr::Const(0.0),
        (_, Some(1.0)) => a,
        _ => Expr::Binary(BinOp::Div, a.into(), b.into()),
    }
}

pub(crate) fn pow(a: Expr, b: Expr) -> Expr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) if x > 0.0 || y.fract() == 0.0 && !(x == 0.0 && y < 0.0) => {
            fold(x.powf(y), || Expr::Binary(BinOp::Pow, a.into(), b.into()))
        }
        (_, Some(0.0)) => Expr::Const(1.0),
        (_, Some(1.0)) => a,
        _ => Expr::Binary(BinOp::Pow, a.into(), b.into()),
    }
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(other.into()),
    }
}

pub(crate) fn call(func: Func, args: Vec<Expr>) -> Expr {
    Expr::Call(func, args)
}
