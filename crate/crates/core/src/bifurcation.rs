//! Screening a solution branch `(x₀(λ), λ)` for bifurcation points.
//!
//! The local index of the branch is read off as `sign det(I - M(λ))`. A
//! change of sign between two parameter values brackets a bifurcation
//! point; a nonzero determinant at a value rules one out there; a zero
//! determinant is the necessary condition a bifurcation point must meet.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mde::{solve_ivp, ProblemDef, SolveSettings};
use crate::periodic::shoot;
use crate::regulated::RegulatedPath;
use crate::variational::{jacobians, linearized_path, monodromy_with, JacobianPair, MonodromyReport};

/// Hypotheses of the existence and exclusion results that are analytic
/// conditions and are not checked numerically.
pub const UNVERIFIED_HYPOTHESES: [&str; 3] = [
    "equicontinuity of f in lambda, uniformly on the neighbourhood of the branch",
    "equicontinuity of the derivatives f'_x and g'_x in (lambda, x)",
    "isolation of the branch solution beyond the determinant margin",
];

/// Supplies the reference solution of the branch at each parameter value.
pub trait BranchProvider: Sync {
    fn path(&self, p: &ProblemDef, lambda: f64, s: &SolveSettings) -> Result<RegulatedPath>;
}

/// A branch whose initial state is the same for every λ, as for a known
/// solution family. The state is checked to be periodic to `tol`.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnedBranch {
    pub x0: Vec<f64>,
    pub tol: f64,
}

impl PinnedBranch {
    pub fn new(x0: Vec<f64>) -> Self {
        Self { x0, tol: 1e-6 }
    }
}

impl BranchProvider for PinnedBranch {
    fn path(&self, p: &ProblemDef, lambda: f64, s: &SolveSettings) -> Result<RegulatedPath> {
        let path = solve_ivp(p, lambda, &self.x0, s)?;
        let end = path.eval(p.period())?;
        let scale = 1.0 + self.x0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let drift = end.iter().zip(&self.x0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if drift > self.tol * scale {
            return Err(Error::Validation(format!(
                "pinned branch state {:?} is not periodic at lambda = {lambda} (drift {drift:e})",
                self.x0
            )));
        }
        Ok(path)
    }
}

/// A branch found by shooting from a fixed guess at every λ.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingBranch {
    pub guess: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
}

impl BranchProvider for ShootingBranch {
    fn path(&self, p: &ProblemDef, lambda: f64, s: &SolveSettings) -> Result<RegulatedPath> {
        Ok(shoot(p, lambda, &self.guess, self.tol, self.max_iter, s)?.path)
    }
}

/// `sign det(I - M)`, with 0 inside the degeneracy threshold.
pub fn sign_of(rep: &MonodromyReport) -> i8 {
    if rep.is_degenerate() {
        0
    } else if rep.det_i_minus_m > 0.0 {
        1
    } else {
        -1
    }
}

fn monodromy_on_branch(
    p: &ProblemDef,
    jac: &JacobianPair,
    lambda: f64,
    branch: &dyn BranchProvider,
    s: &SolveSettings,
) -> Result<MonodromyReport> {
    let path = branch.path(p, lambda, s)?;
    monodromy_with(p, jac, lambda, &path, s)
}

/// Index surrogate of the branch at `lambda` together with the determinant.
pub fn index_sign(
    p: &ProblemDef,
    lambda: f64,
    branch: &dyn BranchProvider,
    s: &SolveSettings,
) -> Result<(i8, MonodromyReport)> {
    let rep = monodromy_on_branch(p, &jacobians(p)?, lambda, branch, s)?;
    Ok((sign_of(&rep), rep))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPoint {
    pub lambda: f64,
    /// `NaN` when the point failed.
    #[serde(rename = "det_I_minus_M")]
    pub det_i_minus_m: f64,
    pub threshold: f64,
    pub index_sign: i8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub lambda0: f64,
    /// `|det(I - M(λ₀))|`.
    pub abs_det: f64,
    pub threshold: f64,
    pub iterations: usize,
    pub interval: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    NonBifurcation,
    CandidateNecessaryConditionMet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifiedRegion {
    pub kind: CertificateKind,
    pub lambda0: f64,
    /// `|det(I - M)|` at `lambda0`.
    pub margin: f64,
    pub threshold: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub grid: Vec<GridPoint>,
    pub sign_change_intervals: Vec<[f64; 2]>,
    pub candidates: Vec<Candidate>,
    pub certificates: Vec<CertifiedRegion>,
    /// Every grid point that succeeded has index 0.
    pub all_degenerate: bool,
    /// Sign changes whose bisection failed, with the reason.
    pub bisection_failures: Vec<String>,
    pub unverified_hypotheses: Vec<String>,
}

impl ScanReport {
    /// Columns `lambda,det_I_minus_M,index_sign`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lambda,det_I_minus_M,index_sign")?;
        for g in &self.grid {
            writeln!(
                w,
                "{},{},{}",
                crate::report::fmt_f64(g.lambda),
                crate::report::fmt_f64(g.det_i_minus_m),
                g.index_sign
            )?;
        }
        Ok(())
    }
}

/// `count` equally spaced values from `min` to `max`, hitting both ends and,
/// for symmetric ranges with an odd count, zero exactly.
pub fn lambda_grid(min: f64, max: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let m = (count - 1) as f64;
            (0..count).map(|i| (min * (m - i as f64) + max * i as f64) / m).collect()
        }
    }
}

/// Evaluates the index on `lambda_grid`, bisects every sign change of
/// `det(I - M)` to width `bisect_tol` and issues certificates.
///
/// Failed grid points are recorded and never bridged: a sign change only
/// counts between successive successful points with nonzero index, where
/// points of index 0 in between are skipped.
pub fn scan(
    p: &ProblemDef,
    branch: &dyn BranchProvider,
    lambda_grid: &[f64],
    bisect_tol: f64,
    s: &SolveSettings,
) -> Result<ScanReport> {
    if !(bisect_tol > 0.0) {
        return Err(Error::Validation("bisect_tol must be positive".into()));
    }
    let jac = jacobians(p)?;
    let mut lambdas = lambda_grid.to_vec();
    if lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Error::Validation("lambda grid contains a non-finite value".into()));
    }
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();

    let grid: Vec<GridPoint> = lambdas
        .par_iter()
        .map(|&lambda| match monodromy_on_branch(p, &jac, lambda, branch, s) {
            Ok(rep) => GridPoint {
                lambda,
                det_i_minus_m: rep.det_i_minus_m,
                threshold: rep.threshold(),
                index_sign: sign_of(&rep),
                error: None,
            },
            Err(e) => GridPoint {
                lambda,
                det_i_minus_m: f64::NAN,
                threshold: f64::NAN,
                index_sign: 0,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut intervals = Vec::new();
    let mut last: Option<&GridPoint> = None;
    for g in &grid {
        if g.error.is_some() {
            last = None;
            continue;
        }
        if g.index_sign == 0 {
            continue;
        }
        if let Some(prev) = last {
            if prev.index_sign != g.index_sign {
                intervals.push((prev, g));
            }
        }
        last = Some(g);
    }

    let bisected: Vec<Result<Candidate>> = intervals
        .par_iter()
        .map(|(a, b)| bisect(p, &jac, branch, s, a, b, bisect_tol))
        .collect();

    let mut candidates = Vec::new();
    let mut failures = Vec::new();
    let mut certificates = Vec::new();
    for (r, (a, b)) in bisected.into_iter().zip(&intervals) {
        match r {
            Ok(c) => {
                if c.abs_det <= c.threshold {
                    certificates.push(CertifiedRegion {
                        kind: CertificateKind::CandidateNecessaryConditionMet,
                        lambda0: c.lambda0,
                        margin: c.abs_det,
                        threshold: c.threshold,
                        note: "det(I - M) vanishes within the threshold and changes sign across the \
                               interval: the linearised periodic problem has a nontrivial solution"
                            .into(),
                    });
                }
                candidates.push(c);
            }
            Err(e) => failures.push(format!("[{}, {}]: {e}", a.lambda, b.lambda)),
        }
    }
    for g in grid.iter().filter(|g| g.error.is_none() && g.det_i_minus_m.abs() > g.threshold) {
        certificates.push(CertifiedRegion {
            kind: CertificateKind::NonBifurcation,
            lambda0: g.lambda,
            margin: g.det_i_minus_m.abs(),
            threshold: g.threshold,
            note: "I - M is invertible: no bifurcation point on the branch near this parameter; \
                   the size of the excluded neighbourhood is not quantified"
                .into(),
        });
    }
    let ok: Vec<&GridPoint> = grid.iter().filter(|g| g.error.is_none()).collect();
    let all_degenerate = !ok.is_empty() && ok.iter().all(|g| g.index_sign == 0);
    Ok(ScanReport {
        sign_change_intervals: intervals.iter().map(|(a, b)| [a.lambda, b.lambda]).collect(),
        grid,
        candidates,
        certificates,
        all_degenerate,
        bisection_failures: failures,
        unverified_hypotheses: UNVERIFIED_HYPOTHESES.iter().map(|s| s.to_string()).collect(),
    })
}

fn bisect(
    p: &ProblemDef,
    jac: &JacobianPair,
    branch: &dyn BranchProvider,
    s: &SolveSettings,
    a: &GridPoint,
    b: &GridPoint,
    tol: f64,
) -> Result<Candidate> {
    let (mut lo, mut hi) = (a.lambda, b.lambda);
    let lo_positive = a.det_i_minus_m > 0.0;
    let mut iterations = 0;
    let mut exact = None;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let rep = monodromy_on_branch(p, jac, mid, branch, s)?;
        if rep.det_i_minus_m == 0.0 {
            exact = Some(rep);
            lo = mid;
            hi = mid;
            break;
        }
        if (rep.det_i_minus_m > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda0 = 0.5 * (lo + hi);
    let rep = match exact {
        Some(rep) => rep,
        None => monodromy_on_branch(p, jac, lambda0, branch, s)?,
    };
    Ok(Candidate {
        lambda0,
        abs_det: rep.det_i_minus_m.abs(),
        threshold: rep.threshold(),
        iterations,
        interval: [a.lambda, b.lambda],
    })
}

/// Which side of the Fredholm alternative the linearised periodic problem
/// falls on.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fredholm {
    /// Uniquely solvable for every forcing.
    Invertible {
        lambda: f64,
        #[serde(rename = "det_I_minus_M")]
        det_i_minus_m: f64,
        threshold: f64,
    },
    /// The homogeneous problem has nontrivial periodic solutions with the
    /// listed initial states.
    Degenerate {
        lambda: f64,
        #[serde(rename = "det_I_minus_M")]
        det_i_minus_m: f64,
        threshold: f64,
        kernel_dim: usize,
        kernel_basis: Vec<Vec<f64>>,
        singular_values: Vec<f64>,
    },
}

/// Full classification with the reference path, so kernel vectors can be
/// expanded with [`Classification::kernel_path`].
#[derive(Debug, Clone)]
pub struct Classification {
    pub result: Fredholm,
    pub reference: RegulatedPath,
}

impl Classification {
    /// `z(s) = Z(s) z₀` for kernel vector `k`.
    pub fn kernel_path(&self, p: &ProblemDef, k: usize, s: &SolveSettings) -> Result<RegulatedPath> {
        match &self.result {
            Fredholm::Degenerate { lambda, kernel_basis, .. } => {
                let z0 = kernel_basis
                    .get(k)
                    .ok_or_else(|| Error::Validation(format!("kernel has no vector {k}")))?;
                linearized_path(p, *lambda, &self.reference, z0, s)
            }
            Fredholm::Invertible { .. } => Err(Error::Validation("the linearised problem has a trivial kernel".into())),
        }
    }
}

/// Singular values of `I - M` at or below this fraction of the largest one
/// (floored at 1) span the kernel.
pub const KERNEL_RTOL: f64 = 1e-8;

/// Classifies the linearisation at `lambda0`: invertible when
/// `|det(I - M)|` exceeds the degeneracy threshold, otherwise the kernel
/// of `I - M` is extracted by SVD.
pub fn fredholm_classify(
    p: &ProblemDef,
    lambda0: f64,
    branch: &dyn BranchProvider,
    s: &SolveSettings,
) -> Result<Classification> {
    let reference = branch.path(p, lambda0, s)?;
    let rep = monodromy_with(p, &jacobians(p)?, lambda0, &reference, s)?;
    let (det, threshold) = (rep.det_i_minus_m, rep.threshold());
    if !rep.is_degenerate() {
        return Ok(Classification {
            result: Fredholm::Invertible { lambda: lambda0, det_i_minus_m: det, threshold },
            reference,
        });
    }
    let n = rep.dim();
    let a = DMatrix::identity(n, n) - &rep.m;
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let largest = svd.singular_values.max().max(1.0);
    let mut kernel_dim = order.iter().filter(|&&i| svd.singular_values[i] <= KERNEL_RTOL * largest).count();
    kernel_dim = kernel_dim.max(1);
    let kernel_basis = order[..kernel_dim]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = v_t.row(i).iter().copied().collect();
            let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let singular_values = order.iter().map(|&i| svd.singular_values[i]).collect();
    Ok(Classification {
        result: Fredholm::Degenerate {
            lambda: lambda0,
            det_i_minus_m: det,
            threshold,
            kernel_dim,
            kernel_basis,
            singular_values,
        },
        reference,
    })
}
