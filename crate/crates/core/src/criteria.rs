//! Lomtatidze's test for `y'' + q(t) y = 0` having only the trivial
//! `T`-periodic solution, and the planar system used to cross-check it.

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{self, EvalContext, Expr, Var};
use crate::mde::ProblemDef;
use crate::quad;
use crate::regulated::Integrator;

/// Default guard band on the strict inequalities.
pub const DEFAULT_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    UniqueTrivial,
    Inconclusive,
}

/// The integrals of `q₋` and `q₊` and the three conditions of the test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionVerdict {
    #[serde(rename = "Qminus")]
    pub q_minus: f64,
    #[serde(rename = "Qplus")]
    pub q_plus: f64,
    /// `1 - (π/2)·Q₋`.
    pub factor: f64,
    /// `(1 - (π/2)·Q₋)·Q₊`.
    pub product: f64,
    pub two_over_pi: f64,
    /// `Q₋ < (1 - (π/2)·Q₋)·Q₊`.
    pub lhs_ok: bool,
    /// `Q₋ > 0` and `Q₊ > 0`.
    pub positivity_ok: bool,
    /// `Q₋ < 2/π`.
    pub bound_ok: bool,
    pub verdict: Verdict,
}

/// Evaluates the test for `q` on `[0, T]`. Each strict inequality must hold
/// with margin `tol`; the integrals themselves are computed to `tol / 10`.
pub fn lomtatidze_check(q: &Expr, period: f64, tol: f64) -> Result<CriterionVerdict> {
    check_time_only(q)?;
    if !(period > 0.0) || !(tol > 0.0) {
        return Err(Error::Validation("period and tolerance must be positive".into()));
    }
    let eval = |t: f64| q.evaluate(&EvalContext::time(t)).map_err(|e| Error::eval(t, e));
    let (q_plus, q_minus) = quad::positive_negative_parts(eval, 0.0, period, tol / 10.0)?;
    let factor = 1.0 - FRAC_PI_2 * q_minus;
    let product = factor * q_plus;
    let positivity_ok = q_minus > tol && q_plus > tol;
    let lhs_ok = q_minus < product - tol;
    let bound_ok = q_minus < FRAC_2_PI - tol;
    let verdict = if positivity_ok && lhs_ok && bound_ok { Verdict::UniqueTrivial } else { Verdict::Inconclusive };
    Ok(CriterionVerdict {
        q_minus,
        q_plus,
        factor,
        product,
        two_over_pi: FRAC_2_PI,
        lhs_ok,
        positivity_ok,
        bound_ok,
        verdict,
    })
}

fn check_time_only(q: &Expr) -> Result<()> {
    let mut bad = false;
    q.for_each_var(&mut |v| bad |= v != Var::T);
    if bad {
        return Err(Error::Validation("q may depend on t only".into()));
    }
    Ok(())
}

/// The planar system `z₁' = z₂`, `z₂' = q(t)·z₁` on `[0, T]` with no
/// integrator jumps and an unbounded domain.
pub fn second_order_to_system(q: &Expr, period: f64) -> Result<ProblemDef> {
    check_time_only(q)?;
    let f = vec![Expr::var(Var::X(1)), expr::mul(q.clone(), Expr::var(Var::X(0)))];
    let g = vec![Expr::constant(0.0), Expr::constant(0.0)];
    let h = Integrator::jumps_only(Vec::new(), period)?;
    let omega = vec![(f64::NEG_INFINITY, f64::INFINITY); 2];
    Ok(ProblemDef::new(f, g, h, (0.0, 0.0), omega)?.with_description("z1' = z2, z2' = q(t) z1"))
}
