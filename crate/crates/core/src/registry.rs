//! Built-in problems, addressable by name from the CLI and the C API.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::problem::{BranchSpec, IntegratorSpec, ProblemFile, Settings};
use crate::regulated::Jump;

/// Registry names, in display order.
pub const NAMES: [&str; 3] = ["example-5.7", "liebau", "degenerate"];

/// Looks up a built-in problem.
pub fn get(name: &str) -> Result<ProblemFile> {
    match name {
        "example-5.7" => Ok(impulsive_scalar()),
        "liebau" => Ok(liebau()),
        "degenerate" => Ok(degenerate()),
        _ => Err(Error::Validation(format!("unknown problem `{name}`; built-ins are {}", NAMES.join(", ")))),
    }
}

/// `x' = λ b(t) x + c(t) x²` with the jump `Δ⁺x(1/2) = x(1/2)²`, `T = 1`,
/// `b ≡ c ≡ 1`. The trivial solution exists for every λ and the monodromy
/// along it is `e^λ`.
fn impulsive_scalar() -> ProblemFile {
    ProblemFile {
        description: "x' = lambda b(t) x + c(t) x^2, jump x(1/2)^2 at t = 1/2".into(),
        n: 1,
        period: 1.0,
        params: BTreeMap::from([("b".into(), "1".into()), ("c".into(), "1".into())]),
        f: vec!["lambda*b*x1 + c*x1^2".into()],
        g: vec!["x1^2".into()],
        h: IntegratorSpec { density: "0".into(), jumps: vec![Jump { tau: 0.5, size: 1.0 }], period: None },
        lambda: [-1.0, 1.0],
        omega: vec![[-2.0, 2.0]],
        settings: Settings::default(),
        branch: Some(BranchSpec { x0: vec![0.0], rho: Some(0.25) }),
    }
}

/// Periodically forced valveless pump model
/// `u'' = λ((2 + cos t) u' + 3 sin t · u) + R(t) u^{1/3} - 0.3 u^{2/3}` with the
/// impulse `Δ⁺u(π) = 2u³ - u² - 4u + 3` and `R = 6.6 - 5.7 cos t - 9 cos² t`.
/// `u₀ = (2 + cos t)³` solves it for every λ.
fn liebau() -> ProblemFile {
    ProblemFile {
        description: "u'' = lambda((2+cos t)u' + 3 sin t u) + R(t) u^(1/3) - 0.3 u^(2/3), impulse at pi".into(),
        n: 2,
        period: TAU,
        params: BTreeMap::from([("R".into(), "6.6 - 5.7*cos(t) - 9*cos(t)^2".into())]),
        f: vec![
            "x2".into(),
            "lambda*((2 + cos(t))*x2 + 3*sin(t)*x1) + R*x1^(1/3) - 0.3*x1^(2/3)".into(),
        ],
        g: vec!["2*x1^3 - x1^2 - 4*x1 + 3".into(), "0".into()],
        h: IntegratorSpec { density: "0".into(), jumps: vec![Jump { tau: PI, size: 1.0 }], period: None },
        lambda: [-1.0, 1.0],
        omega: vec![[0.5, 28.0], [-20.0, 20.0]],
        settings: Settings::default(),
        branch: Some(BranchSpec { x0: vec![27.0, 0.0], rho: Some(0.25) }),
    }
}

/// `f ≡ g ≡ 0`: every constant is periodic and `M = I` for all λ.
fn degenerate() -> ProblemFile {
    ProblemFile {
        description: "x' = 0 with an inert unit jump".into(),
        n: 1,
        period: 1.0,
        params: BTreeMap::new(),
        f: vec!["0".into()],
        g: vec!["0".into()],
        h: IntegratorSpec { density: "0".into(), jumps: vec![Jump { tau: 0.5, size: 1.0 }], period: None },
        lambda: [-1.0, 1.0],
        omega: vec![[-1.0, 1.0]],
        settings: Settings::default(),
        branch: Some(BranchSpec { x0: vec![0.0], rho: Some(0.25) }),
    }
}
