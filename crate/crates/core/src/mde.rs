//! Measure differential equations in integral form,
//! `x(t) = x(0) + ∫₀ᵗ f(λ, x, s) ds + ∫₀ᵗ g(x, s) dh(s)`.

use crate::error::{Error, Result};
use crate::expr::{EvalContext, Expr, Var};
use crate::kstieltjes::{ks_integral, FnIntegrand};
use crate::ode::{self, StepControl};
use crate::quad::Side;
use crate::regulated::{Integrator, JumpRecord, RegulatedPath, Segment};

/// A complete problem: dynamics, integrator, parameter range and domain box.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemDef {
    dim: usize,
    period: f64,
    f: Vec<Expr>,
    g: Vec<Expr>,
    h: Integrator,
    lambda_range: (f64, f64),
    omega: Vec<(f64, f64)>,
    description: String,
}

impl ProblemDef {
    pub fn new(
        f: Vec<Expr>,
        g: Vec<Expr>,
        h: Integrator,
        lambda_range: (f64, f64),
        omega: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let dim = f.len();
        if dim == 0 {
            return Err(Error::Validation("problem dimension must be at least 1".into()));
        }
        if g.len() != dim || omega.len() != dim {
            return Err(Error::Validation(format!(
                "f has {dim} components but g has {} and omega {}",
                g.len(),
                omega.len()
            )));
        }
        for (i, e) in f.iter().chain(&g).enumerate() {
            let mut bad = None;
            e.for_each_var(&mut |v| match v {
                Var::X(k) if k >= dim => bad = Some(format!("x{}", k + 1)),
                Var::Lambda if i >= dim => bad = Some("lambda".to_string()),
                _ => {}
            });
            if let Some(name) = bad {
                let which = if i < dim { "f" } else { "g" };
                return Err(Error::Validation(format!("{which} may not reference {name}")));
            }
        }
        let (lo, hi) = lambda_range;
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Validation(format!("empty parameter interval [{lo}, {hi}]")));
        }
        if omega.iter().any(|&(a, b)| !(a < b)) {
            return Err(Error::Validation("omega box has an empty side".into()));
        }
        Ok(Self {
            dim,
            period: h.period(),
            f,
            g,
            h,
            lambda_range,
            omega,
            description: String::new(),
        })
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn f(&self) -> &[Expr] {
        &self.f
    }

    pub fn g(&self) -> &[Expr] {
        &self.g
    }

    pub fn integrator(&self) -> &Integrator {
        &self.h
    }

    pub fn lambda_range(&self) -> (f64, f64) {
        self.lambda_range
    }

    pub fn omega(&self) -> &[(f64, f64)] {
        &self.omega
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// True when every component of `g` is the constant 0.
    pub fn g_is_zero(&self) -> bool {
        self.g.iter().all(Expr::is_zero)
    }

    /// Membership in the open box Ω.
    pub fn in_omega(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().zip(&self.omega).all(|(&v, &(a, b))| v > a && v < b)
    }

    pub fn lambda_in_range(&self, lambda: f64) -> bool {
        lambda >= self.lambda_range.0 && lambda <= self.lambda_range.1
    }

    pub fn eval_f(&self, lambda: f64, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let ctx = EvalContext::new(t, lambda, x);
        for (o, e) in out.iter_mut().zip(&self.f) {
            *o = e.evaluate(&ctx).map_err(|err| Error::eval(t, err))?;
        }
        Ok(())
    }

    pub fn eval_g(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        let ctx = EvalContext::new(t, 0.0, x);
        for (o, e) in out.iter_mut().zip(&self.g) {
            *o = e.evaluate(&ctx).map_err(|err| Error::eval(t, err))?;
        }
        Ok(())
    }

    /// `f(λ, x, t) + g(x, t)·density(t)`, the vector field between jumps.
    pub(crate) fn smooth_rhs(&self, lambda: f64, t: f64, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.eval_f(lambda, t, x, out)?;
        if !self.h.has_zero_density() && !self.g_is_zero() {
            let d = self.h.density_at(t)?;
            let mut gv = vec![0.0; self.dim];
            self.eval_g(t, x, &mut gv)?;
            out.iter_mut().zip(&gv).for_each(|(o, g)| *o += g * d);
        }
        Ok(())
    }

    pub(crate) fn check_start(&self, lambda: f64, x0: &[f64], s: &SolveSettings) -> Result<()> {
        if x0.len() != self.dim {
            return Err(Error::Validation(format!(
                "initial state has {} components, problem has {}",
                x0.len(),
                self.dim
            )));
        }
        if !self.lambda_in_range(lambda) {
            return Err(Error::Validation(format!(
                "lambda = {lambda} outside [{}, {}]",
                self.lambda_range.0, self.lambda_range.1
            )));
        }
        if s.domain_check && !self.in_omega(x0) {
            return Err(Error::Validation(format!("initial state {x0:?} is outside omega")));
        }
        if !(s.rk_tol > 0.0) {
            return Err(Error::Validation("rk_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Integrator settings for [`solve_ivp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    /// Local error tolerance, used as both relative and absolute tolerance.
    pub rk_tol: f64,
    pub max_step: f64,
    /// Fail as soon as the state leaves Ω.
    pub domain_check: bool,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self { rk_tol: 1e-9, max_step: f64::INFINITY, domain_check: true }
    }
}

impl SolveSettings {
    pub(crate) fn step_control(&self) -> StepControl {
        StepControl {
            rtol: self.rk_tol,
            atol: self.rk_tol,
            max_step: self.max_step,
            max_steps: 1_000_000,
        }
    }
}

/// Solves the initial value problem on `[0, T]`.
///
/// Between jumps of `h` the state follows `x' = f + g·density` with an
/// embedded 5(4) Runge–Kutta pair. At a jump `τ` the state moves to
/// `x(τ) + g(x(τ), τ)·Δ⁺h(τ)`, using the left value.
pub fn solve_ivp(p: &ProblemDef, lambda: f64, x0: &[f64], s: &SolveSettings) -> Result<RegulatedPath> {
    p.check_start(lambda, x0, s)?;
    let n = p.dim;
    let ctl = s.step_control();
    let jumps = p.h.jumps();
    let mut state = x0.to_vec();
    let mut segments = Vec::with_capacity(jumps.len() + 1);
    let mut records = Vec::with_capacity(jumps.len());
    let mut start = 0.0;
    for k in 0..=jumps.len() {
        let end = jumps.get(k).map_or(p.period, |j| j.tau);
        let traj = ode::integrate(
            |t, x, dx| p.smooth_rhs(lambda, t, x, dx),
            start,
            end,
            &state,
            &ctl,
            |t, x| {
                if s.domain_check && !p.in_omega(x) {
                    Err(Error::DomainExit { t, state: x.to_vec() })
                } else {
                    Ok(())
                }
            },
        )?;
        state = traj.end_state;
        let steps = if traj.steps.is_empty() {
            vec![ode::DenseStep::constant(start, end - start, &state)]
        } else {
            traj.steps
        };
        segments.push(Segment::from_steps(start, end, steps, state.clone()));
        if let Some(j) = jumps.get(k) {
            let mut gv = vec![0.0; n];
            p.eval_g(j.tau, &state, &mut gv)?;
            let right: Vec<f64> = state.iter().zip(&gv).map(|(x, g)| x + g * j.size).collect();
            if s.domain_check && !p.in_omega(&right) {
                return Err(Error::JumpExit { t: j.tau, state: right });
            }
            records.push(JumpRecord { tau: j.tau, left: state.clone(), right: right.clone() });
            state = right;
            start = j.tau;
        }
    }
    RegulatedPath::new(n, segments, records)
}

/// Quadrature tolerance of the defect oracle, per grid interval.
const RESIDUAL_TOL: f64 = 1e-11;

/// Largest defect of `path` in the integral equation over `t_grid`,
/// measured in the max norm. The integrals are evaluated independently of
/// the solver with the Kurzweil–Stieltjes engine.
pub fn residual_sie(p: &ProblemDef, lambda: f64, path: &RegulatedPath, t_grid: &[f64]) -> Result<f64> {
    let n = p.dim;
    if path.dim() != n {
        return Err(Error::Validation("path dimension does not match the problem".into()));
    }
    let breaks = path.jump_times();
    let f_part = FnIntegrand::new(n, breaks.clone(), |s, side: Side, out: &mut [f64]| {
        let mut x = vec![0.0; n];
        path.eval_into(s, side, &mut x)?;
        p.eval_f(lambda, s, &x, out)
    });
    let g_part = FnIntegrand::new(n, breaks, |s, side: Side, out: &mut [f64]| {
        let mut x = vec![0.0; n];
        path.eval_into(s, side, &mut x)?;
        p.eval_g(s, &x, out)
    });
    let lebesgue = Integrator::identity(p.period);

    let mut grid: Vec<f64> = t_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let x_start = path.eval(0.0)?;
    let mut acc = vec![0.0; n];
    let mut prev = 0.0;
    let mut worst = 0.0f64;
    for &t in &grid {
        if t < 0.0 || t > p.period {
            return Err(Error::OutOfRange { t, start: 0.0, end: p.period });
        }
        let df = ks_integral(&f_part, &lebesgue, prev, t, RESIDUAL_TOL)?;
        let dg = ks_integral(&g_part, &p.h, prev, t, RESIDUAL_TOL)?;
        for i in 0..n {
            acc[i] += df[i] + dg[i];
        }
        prev = t;
        let x = path.eval(t)?;
        for i in 0..n {
            worst = worst.max((x[i] - x_start[i] - acc[i]).abs());
        }
    }
    Ok(worst)
}

/// `count` equally spaced times covering `[0, T]`.
pub fn uniform_grid(period: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![0.0];
    }
    let m = (count - 1) as f64;
    (0..count).map(|i| period * i as f64 / m).collect()
}
