//! Kurzweil–Stieltjes integrals `∫ φ dh` against integrators made of an
//! absolutely continuous part and finitely many jumps.
//!
//! For left-continuous `h` a jump at `τ` contributes `φ(τ)·Δ⁺h(τ)`, the
//! integrand's value *at* the point. Over `[a, b]` the jump at `a` is counted
//! and the jump at `b` is not, which keeps the integral additive and makes
//! indefinite integrals left-continuous.

use crate::error::{Error, Result};
use crate::ode::{self, StepControl};
use crate::quad::{self, Side};
use crate::regulated::{Integrator, JumpRecord, RegulatedPath, Segment};

/// A regulated integrand on `[0, T]`, scalar or vector valued.
pub trait Integrand {
    /// Number of components in the output.
    fn dim(&self) -> usize;

    /// Times where the integrand may be discontinuous. Quadrature never
    /// straddles these.
    fn discontinuities(&self) -> Vec<f64> {
        Vec::new()
    }

    /// Value (`Side::At`) or one-sided limit at `t`.
    fn eval(&self, t: f64, side: Side, out: &mut [f64]) -> Result<()>;
}

/// Integrand backed by a closure.
pub struct FnIntegrand<F> {
    dim: usize,
    breaks: Vec<f64>,
    f: F,
}

impl<F> FnIntegrand<F>
where
    F: Fn(f64, Side, &mut [f64]) -> Result<()>,
{
    pub fn new(dim: usize, breaks: Vec<f64>, f: F) -> Self {
        Self { dim, breaks, f }
    }
}

/// Continuous scalar integrand.
pub fn scalar<G>(g: G) -> FnIntegrand<impl Fn(f64, Side, &mut [f64]) -> Result<()>>
where
    G: Fn(f64) -> f64,
{
    FnIntegrand::new(1, Vec::new(), move |t, _, out: &mut [f64]| {
        out[0] = g(t);
        Ok(())
    })
}

/// Scalar integrand with discontinuities at `breaks`; `g` supplies values
/// and one-sided limits.
pub fn sided<G>(breaks: Vec<f64>, g: G) -> FnIntegrand<impl Fn(f64, Side, &mut [f64]) -> Result<()>>
where
    G: Fn(f64, Side) -> f64,
{
    FnIntegrand::new(1, breaks, move |t, side, out: &mut [f64]| {
        out[0] = g(t, side);
        Ok(())
    })
}

impl<F> Integrand for FnIntegrand<F>
where
    F: Fn(f64, Side, &mut [f64]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn discontinuities(&self) -> Vec<f64> {
        self.breaks.clone()
    }

    fn eval(&self, t: f64, side: Side, out: &mut [f64]) -> Result<()> {
        (self.f)(t, side, out)
    }
}

fn breakpoints<I: Integrand + ?Sized>(phi: &I, h: &Integrator, a: f64, b: f64) -> Vec<f64> {
    let mut cuts = vec![a, b];
    cuts.extend(phi.discontinuities().into_iter().filter(|&t| t > a && t < b));
    cuts.extend(h.jump_times().into_iter().filter(|&t| t > a && t < b));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

/// `∫ₐᵇ φ dh`, componentwise. `tol` is an absolute tolerance on the
/// continuous part; the jump part is exact up to rounding.
pub fn ks_integral<I: Integrand + ?Sized>(
    phi: &I,
    h: &Integrator,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<Vec<f64>> {
    if a > b {
        let mut v = ks_integral(phi, h, b, a, tol)?;
        v.iter_mut().for_each(|x| *x = -*x);
        return Ok(v);
    }
    let dim = phi.dim();
    let mut total = vec![0.0; dim];
    if a == b {
        return Ok(total);
    }
    if !h.has_zero_density() {
        let cuts = breakpoints(phi, h, a, b);
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let piece_tol = tol * (hi - lo) / (b - a);
            let part = quad::simpson(
                |t, side, out| {
                    phi.eval(t, side, out)?;
                    let d = h.density_at(t)?;
                    out.iter_mut().for_each(|v| *v *= d);
                    Ok(())
                },
                dim,
                lo,
                hi,
                piece_tol,
            )?;
            total.iter_mut().zip(&part).for_each(|(x, p)| *x += p);
        }
    }
    let mut buf = vec![0.0; dim];
    for j in h.jumps().iter().filter(|j| j.tau >= a && j.tau < b) {
        phi.eval(j.tau, Side::At, &mut buf)?;
        if buf.iter().any(|v| v.is_nan()) {
            return Err(Error::NotANumber { t: j.tau });
        }
        total.iter_mut().zip(&buf).for_each(|(x, v)| *x += v * j.size);
    }
    Ok(total)
}

/// Scalar form of [`ks_integral`].
pub fn ks_integral_scalar<I: Integrand + ?Sized>(
    phi: &I,
    h: &Integrator,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<f64> {
    Ok(ks_integral(phi, h, a, b, tol)?[0])
}

/// The indefinite integral `H(t) = ∫₀ᵗ φ dh` on `[0, T]` as a path.
///
/// `H` is left-continuous with `Δ⁺H(τ) = φ(τ)·Δ⁺h(τ)` at each jump of `h`.
pub fn indefinite<I: Integrand + ?Sized>(phi: &I, h: &Integrator, tol: f64) -> Result<RegulatedPath> {
    let dim = phi.dim();
    let period = h.period();
    let ctl = StepControl { rtol: tol, atol: tol, max_step: f64::INFINITY, max_steps: 1_000_000 };
    let jump_times = h.jump_times();
    let mut breaks: Vec<f64> =
        phi.discontinuities().into_iter().filter(|&t| t > 0.0 && t < period).collect();
    breaks.sort_by(f64::total_cmp);

    let mut state = vec![0.0; dim];
    let mut segments = Vec::new();
    let mut records = Vec::new();
    let mut seg_start = 0.0;
    let ends: Vec<f64> = jump_times.iter().copied().chain(std::iter::once(period)).collect();
    for (k, &seg_end) in ends.iter().enumerate() {
        let mut cuts = vec![seg_start];
        cuts.extend(breaks.iter().copied().filter(|&t| t > seg_start && t < seg_end));
        cuts.push(seg_end);
        let mut steps = Vec::new();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let traj = ode::integrate(
                |t, _y, dy| {
                    let side = if t <= lo {
                        Side::Right
                    } else if t >= hi {
                        Side::Left
                    } else {
                        Side::At
                    };
                    phi.eval(t, side, dy)?;
                    let d = h.density_at(t.clamp(lo, hi))?;
                    dy.iter_mut().for_each(|v| *v *= d);
                    Ok(())
                },
                lo,
                hi,
                &state,
                &ctl,
                |_, _| Ok(()),
            )?;
            steps.extend(traj.steps);
            state = traj.end_state;
        }
        if steps.is_empty() {
            steps.push(crate::ode::DenseStep::constant(seg_start, seg_end - seg_start, &state));
        }
        segments.push(Segment::from_steps(seg_start, seg_end, steps, state.clone()));
        if k < h.jumps().len() {
            let jump = h.jumps()[k];
            let mut v = vec![0.0; dim];
            phi.eval(jump.tau, Side::At, &mut v)?;
            let right: Vec<f64> = state.iter().zip(&v).map(|(s, p)| s + p * jump.size).collect();
            records.push(JumpRecord { tau: jump.tau, left: state.clone(), right: right.clone() });
            state = right;
            seg_start = jump.tau;
        }
    }
    RegulatedPath::new(dim, segments, records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regulated::Jump;

    fn unit_jump() -> Integrator {
        Integrator::jumps_only(vec![Jump { tau: 0.5, size: 1.0 }], 1.0).unwrap()
    }

    #[test]
    fn square_against_indicator() {
        let v = ks_integral_scalar(&scalar(|s| s * s), &unit_jump(), 0.0, 1.0, 1e-12).unwrap();
        assert_eq!(v, 0.25);
    }

    #[test]
    fn endpoint_conventions() {
        let h = unit_jump();
        let one = scalar(|_| 1.0);
        assert_eq!(ks_integral_scalar(&one, &h, 0.0, 1.0, 1e-12).unwrap(), 1.0);
        assert_eq!(ks_integral_scalar(&one, &h, 0.5, 1.0, 1e-12).unwrap(), 1.0);
        assert_eq!(ks_integral_scalar(&one, &h, 0.0, 0.5, 1e-12).unwrap(), 0.0);
        assert_eq!(ks_integral_scalar(&one, &h, 1.0, 0.0, 1e-12).unwrap(), -1.0);
    }

    #[test]
    fn riemann_case() {
        let h = Integrator::identity(2.0);
        let v = ks_integral_scalar(&scalar(|s| s.exp()), &h, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - (2f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn one_sided_integrand_on_jump_grid() {
        // φ jumps at 0.5 too; the jump of h picks φ(0.5) itself
        let phi = sided(vec![0.5], |t, side| match side {
            Side::Right if t == 0.5 => 10.0,
            _ if t > 0.5 => 10.0,
            _ => 2.0,
        });
        let h = Integrator::parse("1", vec![Jump { tau: 0.5, size: 3.0 }], 1.0).unwrap();
        let v = ks_integral_scalar(&phi, &h, 0.0, 1.0, 1e-12).unwrap();
        assert!((v - (2.0 * 0.5 + 10.0 * 0.5 + 2.0 * 3.0)).abs() < 1e-12, "{v}");
    }

    #[test]
    fn indefinite_reproduces_indicator() {
        let p = indefinite(&scalar(|_| 1.0), &unit_jump(), 1e-10).unwrap();
        assert_eq!(p.eval_scalar(0.5).unwrap(), 0.0);
        assert_eq!(p.right_limit(0.5).unwrap()[0], 1.0);
        assert_eq!(p.eval_scalar(0.75).unwrap(), 1.0);
    }

    #[test]
    fn indefinite_riemann_quadratic() {
        let p = indefinite(&scalar(|s| s), &Integrator::identity(1.0), 1e-11).unwrap();
        for t in [0.0, 0.1, 0.33, 0.8, 1.0] {
            assert!((p.eval_scalar(t).unwrap() - t * t / 2.0).abs() < 1e-10);
        }
    }
}
