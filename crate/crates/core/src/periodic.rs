//! `T`-periodic solutions by shooting on the period map `x₀ ↦ x(T; x₀)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mde::{solve_ivp, ProblemDef, SolveSettings};
use crate::regulated::RegulatedPath;
use crate::variational::{degeneracy_threshold, jacobians, monodromy_with};

/// Step halvings tried before a Newton step is given up.
pub const MAX_HALVINGS: usize = 20;

/// A converged periodic solution.
#[derive(Debug, Clone)]
pub struct ShootResult {
    pub lambda: f64,
    pub x0_star: Vec<f64>,
    pub path: RegulatedPath,
    /// `‖x(T) - x(0)‖₂`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShootSummary {
    pub lambda: f64,
    pub x0_star: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ShootResult {
    pub fn summary(&self) -> ShootSummary {
        ShootSummary {
            lambda: self.lambda,
            x0_star: self.x0_star.clone(),
            residual: self.residual,
            iterations: self.iterations,
            converged: self.converged,
        }
    }
}

fn period_residual(p: &ProblemDef, lambda: f64, x0: &[f64], s: &SolveSettings) -> Result<(RegulatedPath, Vec<f64>)> {
    let path = solve_ivp(p, lambda, x0, s)?;
    let end = path.eval(p.period())?;
    let r = end.iter().zip(x0).map(|(a, b)| a - b).collect();
    Ok((path, r))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton iteration on `r(x₀) = x(T; x₀) - x₀`.
///
/// The Jacobian `M - I` comes from the monodromy along the current
/// trajectory. A step is halved up to [`MAX_HALVINGS`] times until `‖r‖`
/// decreases; trial states that leave Ω count as no decrease.
pub fn shoot(
    p: &ProblemDef,
    lambda: f64,
    x0_guess: &[f64],
    tol: f64,
    max_iter: usize,
    s: &SolveSettings,
) -> Result<ShootResult> {
    if !(tol > 0.0) {
        return Err(Error::Validation("shooting tolerance must be positive".into()));
    }
    p.check_start(lambda, x0_guess, s)?;
    let s_orig = s;
    let jac = jacobians(p)?;
    let n = p.dim();
    let free = SolveSettings { domain_check: false, ..*s };
    let s = &free;
    let mut x = x0_guess.to_vec();
    let (mut path, mut r) = period_residual(p, lambda, &x, s)?;
    let mut res = norm(&r);
    let mut iterations = 0;
    while res > tol {
        if iterations == max_iter {
            return Err(Error::NoConvergence { iterations, residual: res });
        }
        let m = monodromy_with(p, &jac, lambda, &path, s)?.m;
        let a = &m - DMatrix::identity(n, n);
        let det = a.determinant();
        if !(det.abs() > degeneracy_threshold(&m)) {
            return Err(Error::SingularNewton { det });
        }
        let delta = a
            .lu()
            .solve(&(-DVector::from_column_slice(&r)))
            .ok_or(Error::SingularNewton { det })?;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(xi, d)| xi + step * d).collect();
            match period_residual(p, lambda, &trial, s) {
                Ok((tp, tr)) if norm(&tr) < res => {
                    accepted = Some((trial, tp, tr));
                    break;
                }
                Ok(_) => {}
                Err(e) if e.is_validation() || matches!(e, Error::DomainExit { .. } | Error::JumpExit { .. }) => {}
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }
        let Some((nx, np, nr)) = accepted else {
            return Err(Error::NoConvergence { iterations: iterations + 1, residual: res });
        };
        x = nx;
        path = np;
        r = nr;
        res = norm(&r);
        iterations += 1;
    }
    if s_orig.domain_check {
        path = solve_ivp(p, lambda, &x, s_orig)?;
    }
    Ok(ShootResult { lambda, x0_star: x, path, residual: res, iterations, converged: true })
}

/// Interior grid of starting guesses: `per_axis` points along each side of
/// Ω, away from the boundary.
pub fn grid_guesses(p: &ProblemDef, per_axis: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = p
        .omega()
        .iter()
        .map(|&(lo, hi)| {
            let (lo, hi) = (lo.max(-1e6), hi.min(1e6));
            (1..=per_axis).map(|i| lo + (hi - lo) * i as f64 / (per_axis + 1) as f64).collect()
        })
        .collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    out
}

/// Shoots from every guess in parallel. Results keep the order of `guesses`.
pub fn multi_start(
    p: &ProblemDef,
    lambda: f64,
    guesses: &[Vec<f64>],
    tol: f64,
    max_iter: usize,
    s: &SolveSettings,
) -> Vec<Result<ShootResult>> {
    guesses.par_iter().map(|g| shoot(p, lambda, g, tol, max_iter, s)).collect()
}

/// Distinct periodic initial states among converged results, `sep` apart
/// in the max norm, in order of first appearance.
pub fn distinct_orbits(results: &[Result<ShootResult>], sep: f64) -> Vec<&ShootResult> {
    let mut out: Vec<&ShootResult> = Vec::new();
    for r in results.iter().flatten() {
        let new = out.iter().all(|o| {
            o.x0_star.iter().zip(&r.x0_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) > sep
        });
        if new {
            out.push(r);
        }
    }
    out
}
