//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use mdebif::expr::{BinOp, EvalContext, Expr, Func, Var};
use nalgebra::DMatrix;
use rand::Rng;

/// `exp(A)` by scaling and squaring with a Taylor core.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.abs().row_sum().max();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let b = a * scale;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * &b / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss–Legendre quadrature with `panels` panels of `order` nodes.
pub fn gl_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let rule = gauss_legendre(order);
    let w = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + w * p as f64;
        let mid = lo + 0.5 * w;
        total += rule.iter().map(|&(x, wt)| wt * f(mid + 0.5 * w * x)).sum::<f64>() * 0.5 * w;
    }
    total
}

/// Random smooth integrand in `t`: polynomial plus trigonometric terms.
pub fn random_smooth<R: Rng>(rng: &mut R) -> String {
    let mut terms = Vec::new();
    let degree = rng.gen_range(0..=4);
    for k in 0..=degree {
        terms.push(format!("({:.6})*t^{k}", rng.gen_range(-2.0..2.0)));
    }
    for _ in 0..rng.gen_range(0..=3) {
        let f = ["sin", "cos"][rng.gen_range(0..2)];
        terms.push(format!("({:.6})*{f}(({:.6})*t + ({:.6}))", rng.gen_range(-2.0..2.0), rng.gen_range(-6.0..6.0), rng.gen_range(-3.0..3.0)));
    }
    if rng.gen_bool(0.3) {
        terms.push(format!("exp(({:.6})*t)", rng.gen_range(-1.5..1.5)));
    }
    terms.join(" + ")
}

const VARS: [Var; 4] = [Var::T, Var::Lambda, Var::X(0), Var::X(1)];
const FUNCS: [Func; 10] =
    [Func::Sin, Func::Cos, Func::Tan, Func::Exp, Func::Ln, Func::Sqrt, Func::Abs, Func::Pow, Func::Max, Func::Min];

/// Random expression over `t, lambda, x1, x2` without `heaviside`, at most
/// `depth` levels deep.
pub fn random_expr<R: Rng>(rng: &mut R, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.25) {
        return if rng.gen_bool(0.4) {
            Expr::Const((rng.gen_range(-3.0f64..3.0) * 100.0).round() / 100.0)
        } else {
            Expr::Var(VARS[rng.gen_range(0..VARS.len())])
        };
    }
    let sub = |rng: &mut R| Box::new(random_expr(rng, depth - 1));
    match rng.gen_range(0..10) {
        0..=1 => Expr::Binary(BinOp::Add, sub(rng), sub(rng)),
        2 => Expr::Binary(BinOp::Sub, sub(rng), sub(rng)),
        3..=4 => Expr::Binary(BinOp::Mul, sub(rng), sub(rng)),
        5 => Expr::Binary(BinOp::Div, sub(rng), sub(rng)),
        6 => {
            let exponent = if rng.gen_bool(0.5) {
                Expr::Const(rng.gen_range(2..=3) as f64)
            } else {
                random_expr(rng, depth - 1)
            };
            Expr::Binary(BinOp::Pow, sub(rng), Box::new(exponent))
        }
        7 => Expr::Neg(sub(rng)),
        _ => {
            let f = FUNCS[rng.gen_range(0..FUNCS.len())];
            Expr::Call(f, (0..f.arity()).map(|_| random_expr(rng, depth - 1)).collect())
        }
    }
}

pub enum FdOutcome {
    /// The expression is not defined (or too large) around the point.
    Skip,
    /// The function is defined but the derivative expression is not, as for
    /// `u^v` with a variable exponent at `u = 0`.
    DerivativeUndefined,
    Pass,
    Fail { msg: String, t: f64, lambda: f64, x: [f64; 2] },
}

pub const FD_STEP: f64 = 1e-6;

/// Compares `∂e/∂x1` with a central difference at a random point.
pub fn fd_check<R: Rng>(e: &Expr, rng: &mut R) -> FdOutcome {
    let d = match e.differentiate(Var::X(0)) {
        Ok(d) => d,
        Err(err) => return FdOutcome::Fail { msg: format!("differentiate failed: {err}"), t: 0.0, lambda: 0.0, x: [0.0; 2] },
    };
    let t = rng.gen_range(0.0..2.0);
    let lambda = rng.gen_range(-1.0..1.0);
    let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
    let at = |x1: f64| e.evaluate(&EvalContext::new(t, lambda, &[x1, x[1]])).ok().filter(|v| v.is_finite() && v.abs() < 1e6);
    let (Some(_), Some(fp), Some(fm)) = (at(x[0]), at(x[0] + FD_STEP), at(x[0] - FD_STEP)) else {
        return FdOutcome::Skip;
    };
    let Ok(exact) = d.evaluate(&EvalContext::new(t, lambda, &x)) else {
        return FdOutcome::DerivativeUndefined;
    };
    let fd = (fp - fm) / (2.0 * FD_STEP);
    let err = (exact - fd).abs();
    let ok = if exact.abs() > 1e-3 { err <= 1e-6 * exact.abs() } else { err <= 1e-6 };
    if ok {
        FdOutcome::Pass
    } else {
        FdOutcome::Fail { msg: format!("{e} at t={t}, lambda={lambda}, x={x:?}: exact {exact}, fd {fd}"), t, lambda, x }
    }
}

/// Fourth-order Richardson estimate of `∂e/∂x1` built from central
/// differences at `h` and `h/2`; `None` where `e` is undefined nearby.
pub fn richardson(e: &Expr, t: f64, lambda: f64, x: [f64; 2], h: f64) -> Option<f64> {
    let at = |x1: f64| e.evaluate(&EvalContext::new(t, lambda, &[x1, x[1]])).ok().filter(|v| v.is_finite());
    let central = |h: f64| Some((at(x[0] + h)? - at(x[0] - h)?) / (2.0 * h));
    let (d1, d2) = (central(h)?, central(0.5 * h)?);
    Some((4.0 * d2 - d1) / 3.0)
}
