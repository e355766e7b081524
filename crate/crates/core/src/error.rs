use crate::expr::{DiffError, EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error in {context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: ParseError,
    },
    #[error("evaluation failed at t = {t}: {source}")]
    Eval {
        t: f64,
        #[source]
        source: EvalError,
    },
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("quadrature did not converge on [{a}, {b}]")]
    Quadrature { a: f64, b: f64 },
    #[error("integrand is not a number at t = {t}")]
    NotANumber { t: f64 },
    #[error("state left the domain at t = {t}: {state:?}")]
    DomainExit { t: f64, state: Vec<f64> },
    #[error("state after the jump at t = {t} is outside the domain: {state:?}")]
    JumpExit { t: f64, state: Vec<f64> },
    #[error("step size collapsed to {h:e} at t = {t}")]
    StepCollapse { t: f64, h: f64 },
    #[error("too many steps ({steps}) before t = {t}")]
    TooManySteps { t: f64, steps: usize },
    #[error("jump factor at t = {t} is singular (det = {det:e})")]
    SingularJumpFactor { t: f64, det: f64 },
    #[error("Newton matrix M - I is singular (det = {det:e}); periodic problem is degenerate")]
    SingularNewton { det: f64 },
    #[error("shooting did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("t = {t} is outside [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn eval(t: f64, source: EvalError) -> Self {
        Error::Eval { t, source }
    }

    pub(crate) fn parse(context: impl Into<String>, source: ParseError) -> Self {
        Error::Parse { context: context.into(), source }
    }

    /// Bad input as opposed to a numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Validation(_) | Error::Json(_))
    }
}
