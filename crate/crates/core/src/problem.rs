//! JSON problem files.
//!
//! ```json
//! {
//!   "n": 1,
//!   "T": 1.0,
//!   "params": { "b": "1" },
//!   "f": ["lambda*b*x1 + x1^2"],
//!   "g": ["x1^2"],
//!   "h": { "density": "0", "jumps": [{ "t": 0.5, "size": 1.0 }] },
//!   "lambda": [-1.0, 1.0],
//!   "omega": [[-2.0, 2.0]],
//!   "settings": { "rk_tol": 1e-9, "bisect_tol": 1e-10 },
//!   "branch": { "x0": [0.0] }
//! }
//! ```
//!
//! `params` are expressions in `t` that `f`, `g` and the density may use by
//! name. `branch.x0` pins the initial state of a known solution family.
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Scope};
use crate::mde::{ProblemDef, SolveSettings};
use crate::regulated::{Integrator, Jump};

pub const DEFAULT_RK_TOL: f64 = 1e-9;
pub const DEFAULT_BISECT_TOL: f64 = 1e-10;

fn default_density() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default = "default_density")]
    pub density: String,
    #[serde(default)]
    pub jumps: Vec<Jump>,
    /// Must equal the problem's `T` when given.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    pub rk_tol: f64,
    pub bisect_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self { rk_tol: DEFAULT_RK_TOL, bisect_tol: DEFAULT_BISECT_TOL }
    }
}

impl Settings {
    pub fn solve(&self) -> SolveSettings {
        SolveSettings { rk_tol: self.rk_tol, ..SolveSettings::default() }
    }
}

/// A known solution family: the state `x0` at `t = 0`, periodic for every λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub x0: Vec<f64>,
    /// Radius of the neighbourhood the problem's hypotheses are checked on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub n: usize,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, String>,
    pub f: Vec<String>,
    pub g: Vec<String>,
    pub h: IntegratorSpec,
    pub lambda: [f64; 2],
    pub omega: Vec<[f64; 2]>,
    #[serde(default)]
    pub settings: Settings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<BranchSpec>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(crate::report::to_json(self)?)
    }

    fn params(&self) -> Result<BTreeMap<String, Expr>> {
        self.params
            .iter()
            .map(|(name, src)| {
                let e = Expr::parse_scoped(src, &Scope::time()).map_err(|e| Error::parse(format!("params.{name}"), e))?;
                Ok((name.clone(), e))
            })
            .collect()
    }

    /// Parses and validates every expression.
    pub fn to_def(&self) -> Result<ProblemDef> {
        if self.f.len() != self.n || self.g.len() != self.n {
            return Err(Error::Validation(format!(
                "n = {} but f has {} and g has {} components",
                self.n,
                self.f.len(),
                self.g.len()
            )));
        }
        if let Some(t) = self.h.period {
            if t != self.period {
                return Err(Error::Validation(format!("h.T = {t} differs from T = {}", self.period)));
            }
        }
        let params = self.params()?;
        let parse_all = |srcs: &[String], scope: Scope, key: &str| -> Result<Vec<Expr>> {
            srcs.iter()
                .enumerate()
                .map(|(i, s)| Expr::parse_scoped(s, &scope).map_err(|e| Error::parse(format!("{key}[{i}]"), e)))
                .collect()
        };
        let f = parse_all(&self.f, Scope::full(self.n).with_params(params.clone()), "f")?;
        let g = parse_all(&self.g, Scope::state(self.n).with_params(params.clone()), "g")?;
        let density = Expr::parse_scoped(&self.h.density, &Scope::time().with_params(params))
            .map_err(|e| Error::parse("h.density", e))?;
        let h = Integrator::new(density, self.h.jumps.clone(), self.period)?;
        let omega = self.omega.iter().map(|&[a, b]| (a, b)).collect();
        let def = ProblemDef::new(f, g, h, (self.lambda[0], self.lambda[1]), omega)?;
        if let Some(b) = &self.branch {
            if b.x0.len() != self.n {
                return Err(Error::Validation("branch.x0 has the wrong dimension".into()));
            }
        }
        if !(self.settings.rk_tol > 0.0) || !(self.settings.bisect_tol > 0.0) {
            return Err(Error::Validation("settings tolerances must be positive".into()));
        }
        Ok(def.with_description(self.description.clone()))
    }

    pub fn solve_settings(&self) -> SolveSettings {
        self.settings.solve()
    }
}
