//! Measure differential equations `Dx = f(λ, x, t) + g(x, t)·Dh` with a
//! left-continuous integrator `h` made of a smooth part and finitely many
//! jumps.
//!
//! The crate solves such equations through their Kurzweil–Stieltjes
//! integral form, finds `T`-periodic solutions by shooting, computes the
//! monodromy matrix of the linearisation (jump factors included) and screens
//! the periodic problem for bifurcation points via `det(I - M(λ))`.
//!
//! Module map:
//! - [`expr`]: parser, evaluator and symbolic differentiator for the
//!   right-hand sides;
//! - [`regulated`], [`kstieltjes`]: integrators, regulated paths and the
//!   integral engine;
//! - [`mde`]: problem definition and the initial value solver;
//! - [`variational`], [`periodic`], [`bifurcation`], [`criteria`]: the
//!   periodic problem and its linear analysis;
//! - [`problem`], [`registry`], [`cli`]: problem files, built-in problems
//!   and the command-line front end.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod cli;
pub mod criteria;
pub mod error;
pub mod expr;
pub mod kstieltjes;
pub mod mde;
pub(crate) mod ode;
pub mod periodic;
pub mod problem;
pub mod quad;
pub mod registry;
pub mod regulated;
pub mod report;
pub mod variational;

pub use error::{Error, Result};
pub use expr::{EvalContext, Expr, Var};
pub use mde::{ProblemDef, SolveSettings};
pub use regulated::{Integrator, Jump, RegulatedPath};
