//! Linearisation along a reference path and the monodromy matrix.
//!
//! The variational equation `z = z(0) + ∫ f′ₓ z ds + ∫ g′ₓ z dh` is
//! propagated by a fundamental matrix `Z`: smooth stretches follow
//! `Z′ = (f′ₓ + g′ₓ·density) Z`, and each jump of `h` multiplies by the jump
//! factor `I + g′ₓ(x(τ), τ)·Δ⁺h(τ)`. The periodic linear problem has a
//! nontrivial solution exactly when `I - Z(T)` is singular.

use nalgebra::{Complex, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{EvalContext, Expr, Var};
use crate::mde::{solve_ivp, ProblemDef, SolveSettings};
use crate::ode::{self, DenseStep};
use crate::quad::Side;
use crate::regulated::{JumpRecord, RegulatedPath, Segment};

/// Jump factors with `|det|` at or below this are rejected.
pub const JUMP_FACTOR_MIN_DET: f64 = 1e-12;

/// Symbolic Jacobians `∂f/∂x` and `∂g/∂x`; entry `[i][j]` is `∂fᵢ/∂xⱼ`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianPair {
    pub fprime: Vec<Vec<Expr>>,
    pub gprime: Vec<Vec<Expr>>,
}

impl JacobianPair {
    pub fn dim(&self) -> usize {
        self.fprime.len()
    }

    pub fn fprime_at(&self, lambda: f64, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        eval_matrix(&self.fprime, &EvalContext::new(t, lambda, x), t)
    }

    pub fn gprime_at(&self, t: f64, x: &[f64]) -> Result<DMatrix<f64>> {
        eval_matrix(&self.gprime, &EvalContext::new(t, 0.0, x), t)
    }
}

fn eval_matrix(entries: &[Vec<Expr>], ctx: &EvalContext<'_>, t: f64) -> Result<DMatrix<f64>> {
    let n = entries.len();
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in entries.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            m[(i, j)] = e.evaluate(ctx).map_err(|err| Error::eval(t, err))?;
        }
    }
    Ok(m)
}

/// Differentiates every component of `f` and `g` with respect to `x1..xn`.
pub fn jacobians(p: &ProblemDef) -> Result<JacobianPair> {
    let n = p.dim();
    let grad = |exprs: &[Expr]| -> Result<Vec<Vec<Expr>>> {
        exprs
            .iter()
            .map(|e| (0..n).map(|j| Ok(e.differentiate(Var::X(j))?)).collect())
            .collect()
    };
    Ok(JacobianPair { fprime: grad(p.f())?, gprime: grad(p.g())? })
}

/// Monodromy matrix and its factorisation for one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct MonodromyReport {
    pub lambda: f64,
    /// `Z(T)` with `Z(0) = I`.
    pub m: DMatrix<f64>,
    pub det_i_minus_m: f64,
    pub eigenvalues: Vec<Complex<f64>>,
    /// `(τ, I + g′ₓ·Δ⁺h(τ))` for each jump of `h`.
    pub jump_factors: Vec<(f64, DMatrix<f64>)>,
    /// Propagators of the smooth stretches, in time order.
    pub smooth_factors: Vec<DMatrix<f64>>,
}

/// Scale-aware cutoff below which `|det(I - M)|` counts as zero:
/// `1e-8·(1 + ‖M‖ⁿ)` with the Frobenius norm.
pub fn degeneracy_threshold(m: &DMatrix<f64>) -> f64 {
    1e-8 * (1.0 + m.norm().powi(m.nrows() as i32))
}

impl MonodromyReport {
    fn from_factors(lambda: f64, jump_factors: Vec<(f64, DMatrix<f64>)>, smooth: Vec<DMatrix<f64>>) -> Self {
        let n = smooth[0].nrows();
        let mut m = smooth[0].clone();
        for (k, (_, j)) in jump_factors.iter().enumerate() {
            m = &smooth[k + 1] * (j * m);
        }
        let det_i_minus_m = (DMatrix::identity(n, n) - &m).determinant();
        let eigenvalues = m.clone().complex_eigenvalues().iter().copied().collect();
        Self { lambda, m, det_i_minus_m, eigenvalues, jump_factors, smooth_factors: smooth }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn threshold(&self) -> f64 {
        degeneracy_threshold(&self.m)
    }

    /// `det(I - M)` is zero within the degeneracy threshold.
    pub fn is_degenerate(&self) -> bool {
        self.det_i_minus_m.abs() < self.threshold()
    }

    /// Serialisable view: `M` row-major, eigenvalues as `{re, im}`.
    pub fn to_json(&self) -> MonodromyJson {
        MonodromyJson {
            lambda: self.lambda,
            m: crate::report::matrix_rows(&self.m),
            det_i_minus_m: self.det_i_minus_m,
            eigenvalues: self.eigenvalues.iter().map(|c| ComplexJson { re: c.re, im: c.im }).collect(),
            jump_factors: self
                .jump_factors
                .iter()
                .map(|(tau, f)| JumpFactorJson { tau: *tau, factor: crate::report::matrix_rows(f) })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct JumpFactorJson {
    pub tau: f64,
    pub factor: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonodromyJson {
    pub lambda: f64,
    #[serde(rename = "M")]
    pub m: Vec<Vec<f64>>,
    #[serde(rename = "det_I_minus_M")]
    pub det_i_minus_m: f64,
    pub eigenvalues: Vec<ComplexJson>,
    pub jump_factors: Vec<JumpFactorJson>,
}

fn check_alignment(p: &ProblemDef, path: &RegulatedPath) -> Result<()> {
    if path.dim() != p.dim() {
        return Err(Error::Validation("reference path has the wrong dimension".into()));
    }
    if path.jump_times() != p.integrator().jump_times() {
        return Err(Error::Validation("reference path jumps do not match the integrator".into()));
    }
    if path.start() != 0.0 || path.end() != p.period() {
        return Err(Error::Validation("reference path does not cover [0, T]".into()));
    }
    Ok(())
}

/// Propagates an `n × k` block `Z` (column-major) across the smooth stretch
/// `[a, b]` of the reference path.
#[allow(clippy::too_many_arguments)]
fn propagate(
    p: &ProblemDef,
    jac: &JacobianPair,
    lambda: f64,
    reference: &RegulatedPath,
    a: f64,
    b: f64,
    z: &[f64],
    s: &SolveSettings,
) -> Result<ode::Trajectory> {
    let n = p.dim();
    let cols = z.len() / n;
    let h = p.integrator();
    let couple = !h.has_zero_density() && !p.g_is_zero();
    let mut x = vec![0.0; n];
    ode::integrate(
        |t, y, dy| {
            let side = if t <= a {
                Side::Right
            } else if t >= b {
                Side::Left
            } else {
                Side::At
            };
            let tc = t.clamp(a, b);
            reference.eval_into(tc, side, &mut x)?;
            let mut a_mat = jac.fprime_at(lambda, tc, &x)?;
            if couple {
                a_mat += jac.gprime_at(tc, &x)? * h.density_at(tc)?;
            }
            for c in 0..cols {
                for i in 0..n {
                    dy[i + n * c] = (0..n).map(|l| a_mat[(i, l)] * y[l + n * c]).sum();
                }
            }
            Ok(())
        },
        a,
        b,
        z,
        &s.step_control(),
        |_, _| Ok(()),
    )
}

fn jump_factor(p: &ProblemDef, jac: &JacobianPair, record: &JumpRecord, size: f64) -> Result<DMatrix<f64>> {
    let n = p.dim();
    let factor = DMatrix::identity(n, n) + jac.gprime_at(record.tau, &record.left)? * size;
    let det = factor.determinant();
    if !(det.abs() > JUMP_FACTOR_MIN_DET) {
        return Err(Error::SingularJumpFactor { t: record.tau, det });
    }
    Ok(factor)
}

/// Monodromy of the linearisation along `reference` at parameter `lambda`.
///
/// `reference` should solve the problem at `lambda` on `[0, T]`, with its
/// jumps at the jump times of `h`.
pub fn monodromy(
    p: &ProblemDef,
    lambda: f64,
    reference: &RegulatedPath,
    s: &SolveSettings,
) -> Result<MonodromyReport> {
    monodromy_with(p, &jacobians(p)?, lambda, reference, s)
}

/// [`monodromy`] with precomputed Jacobians.
pub fn monodromy_with(
    p: &ProblemDef,
    jac: &JacobianPair,
    lambda: f64,
    reference: &RegulatedPath,
    s: &SolveSettings,
) -> Result<MonodromyReport> {
    check_alignment(p, reference)?;
    let n = p.dim();
    let identity: Vec<f64> = DMatrix::<f64>::identity(n, n).as_slice().to_vec();
    let mut smooth = Vec::new();
    for seg in reference.segments() {
        let traj = propagate(p, jac, lambda, reference, seg.start(), seg.end(), &identity, s)?;
        smooth.push(DMatrix::from_column_slice(n, n, &traj.end_state));
    }
    let mut factors = Vec::new();
    for (record, jump) in reference.jumps().iter().zip(p.integrator().jumps()) {
        factors.push((record.tau, jump_factor(p, jac, record, jump.size)?));
    }
    Ok(MonodromyReport::from_factors(lambda, factors, smooth))
}

/// Solution `z(s) = Z(s) z₀` of the variational equation along `reference`.
pub fn linearized_path(
    p: &ProblemDef,
    lambda: f64,
    reference: &RegulatedPath,
    z0: &[f64],
    s: &SolveSettings,
) -> Result<RegulatedPath> {
    check_alignment(p, reference)?;
    let jac = jacobians(p)?;
    let n = p.dim();
    if z0.len() != n {
        return Err(Error::Validation("z0 has the wrong dimension".into()));
    }
    let mut z = z0.to_vec();
    let mut segments = Vec::new();
    let mut records = Vec::new();
    let jumps = p.integrator().jumps();
    for (k, seg) in reference.segments().iter().enumerate() {
        let traj = propagate(p, &jac, lambda, reference, seg.start(), seg.end(), &z, s)?;
        z = traj.end_state;
        let steps = if traj.steps.is_empty() {
            vec![DenseStep::constant(seg.start(), seg.end() - seg.start(), &z)]
        } else {
            traj.steps
        };
        segments.push(Segment::from_steps(seg.start(), seg.end(), steps, z.clone()));
        if let Some(record) = reference.jumps().get(k) {
            let factor = jump_factor(p, &jac, record, jumps[k].size)?;
            let right = (&factor * DVector::from_column_slice(&z)).as_slice().to_vec();
            records.push(JumpRecord { tau: record.tau, left: z.clone(), right: right.clone() });
            z = right;
        }
    }
    RegulatedPath::new(n, segments, records)
}

/// Central finite-difference Jacobian of the period map `x₀ ↦ x(T; x₀)`.
pub fn monodromy_fd_check(
    p: &ProblemDef,
    lambda: f64,
    x0: &[f64],
    eps: f64,
    s: &SolveSettings,
) -> Result<DMatrix<f64>> {
    let n = p.dim();
    let mut jac = DMatrix::zeros(n, n);
    let end = |x: &[f64]| -> Result<Vec<f64>> { solve_ivp(p, lambda, x, s)?.eval(p.period()) };
    for j in 0..n {
        let mut plus = x0.to_vec();
        let mut minus = x0.to_vec();
        plus[j] += eps;
        minus[j] -= eps;
        let (xp, xm) = (end(&plus)?, end(&minus)?);
        for i in 0..n {
            jac[(i, j)] = (xp[i] - xm[i]) / (2.0 * eps);
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Scope;
    use crate::regulated::{Integrator, Jump};

    fn scalar(f: &str, g: &str, jumps: Vec<Jump>) -> ProblemDef {
        let f = Expr::parse(f, 1).unwrap();
        let g = Expr::parse_scoped(g, &Scope::state(1)).unwrap();
        let h = Integrator::jumps_only(jumps, 1.0).unwrap();
        ProblemDef::new(vec![f], vec![g], h, (-1.0, 1.0), vec![(-5.0, 5.0)]).unwrap()
    }

    #[test]
    fn linear_part_of_quadratic_example() {
        let p = scalar("lambda*x1 + x1^2", "x1^2", vec![Jump { tau: 0.5, size: 1.0 }]);
        let jac = jacobians(&p).unwrap();
        let v = jac.fprime_at(0.4, 0.0, &[0.25]).unwrap()[(0, 0)];
        assert!((v - (0.4 + 0.5)).abs() < 1e-15);
        assert_eq!(jac.gprime_at(0.0, &[0.25]).unwrap()[(0, 0)], 0.5);
    }

    #[test]
    fn trivial_branch_monodromy_is_exponential() {
        let p = scalar("lambda*x1 + x1^2", "x1^2", vec![Jump { tau: 0.5, size: 1.0 }]);
        let s = SolveSettings::default();
        for lambda in [-0.5, 0.0, 0.3] {
            let r = solve_ivp(&p, lambda, &[0.0], &s).unwrap();
            let rep = monodromy(&p, lambda, &r, &s).unwrap();
            let m: f64 = lambda;
            assert!((rep.m[(0, 0)] - m.exp()).abs() < 1e-9);
            assert!((rep.det_i_minus_m - (1.0 - m.exp())).abs() < 1e-9);
            assert_eq!(rep.jump_factors[0].1[(0, 0)], 1.0);
        }
        let r = solve_ivp(&p, 0.0, &[0.0], &s).unwrap();
        assert!(monodromy(&p, 0.0, &r, &s).unwrap().is_degenerate());
    }

    #[test]
    fn pure_jump_factor() {
        let p = scalar("0", "0.7*x1", vec![Jump { tau: 0.5, size: 1.0 }]);
        let s = SolveSettings::default();
        let r = solve_ivp(&p, 0.0, &[1.0], &s).unwrap();
        let rep = monodromy(&p, 0.0, &r, &s).unwrap();
        assert!((rep.m[(0, 0)] - 1.7).abs() < 1e-14);
    }

    #[test]
    fn singular_jump_factor_is_an_error() {
        let p = scalar("0", "-x1", vec![Jump { tau: 0.5, size: 1.0 }]);
        let s = SolveSettings::default();
        let r = solve_ivp(&p, 0.0, &[1.0], &s).unwrap();
        assert!(matches!(monodromy(&p, 0.0, &r, &s), Err(Error::SingularJumpFactor { .. })));
    }

    #[test]
    fn identity_for_zero_dynamics() {
        let p = scalar("0", "0", vec![Jump { tau: 0.5, size: 1.0 }]);
        let s = SolveSettings::default();
        let r = solve_ivp(&p, 0.0, &[1.0], &s).unwrap();
        let rep = monodromy(&p, 0.0, &r, &s).unwrap();
        assert_eq!(rep.m, DMatrix::identity(1, 1));
        assert_eq!(rep.det_i_minus_m, 0.0);
        let fd = monodromy_fd_check(&p, 0.0, &[1.0], 1e-3, &s).unwrap();
        assert!((fd[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn misaligned_reference_is_rejected() {
        let p = scalar("x1", "0", vec![Jump { tau: 0.5, size: 1.0 }]);
        let r = RegulatedPath::constant(vec![0.0], 0.0, 1.0);
        assert!(monodromy(&p, 0.0, &r, &SolveSettings::default()).unwrap_err().is_validation());
    }
}
