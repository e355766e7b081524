//! Left-continuous integrators of bounded variation and regulated solution
//! paths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{EvalContext, Expr, Scope};
use crate::ode::DenseStep;
use crate::quad::{self, Side};

/// A jump of the integrator: `h(tau+) - h(tau) = size`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    #[serde(rename = "t")]
    pub tau: f64,
    pub size: f64,
}

/// The integrator `h(t) = ∫₀ᵗ density + Σ_{τⱼ < t} sizeⱼ` on `[0, T]`.
///
/// Normalised so that `h(0) = 0`; left-continuous, with all jumps strictly
/// inside `(0, T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrator {
    density: Expr,
    jumps: Vec<Jump>,
    period: f64,
}

impl Integrator {
    /// Validates and builds an integrator. Zero-size jumps are dropped.
    pub fn new(density: Expr, jumps: Vec<Jump>, period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Validation(format!("period must be positive, got {period}")));
        }
        let mut bad = None;
        density.for_each_var(&mut |v| {
            if v != crate::expr::Var::T {
                bad = Some(v);
            }
        });
        if let Some(v) = bad {
            return Err(Error::Validation(format!("integrator density may only use t, found {v}")));
        }
        let jumps: Vec<Jump> = jumps.into_iter().filter(|j| j.size != 0.0).collect();
        for (i, j) in jumps.iter().enumerate() {
            if !(j.tau > 0.0 && j.tau < period) || !j.size.is_finite() {
                return Err(Error::Validation(format!(
                    "jump at t = {} must lie strictly inside (0, {period}) with finite size",
                    j.tau
                )));
            }
            if i > 0 && jumps[i - 1].tau >= j.tau {
                return Err(Error::Validation("jump times must be strictly increasing".into()));
            }
        }
        Ok(Self { density, jumps, period })
    }

    /// Parses the density as an expression in `t`.
    pub fn parse(density: &str, jumps: Vec<Jump>, period: f64) -> Result<Self> {
        let d = Expr::parse_scoped(density, &Scope::time())
            .map_err(|e| Error::parse("integrator density", e))?;
        Self::new(d, jumps, period)
    }

    /// `h(t) = t` on `[0, T]`: the Lebesgue integrator.
    pub fn identity(period: f64) -> Self {
        Self { density: Expr::Const(1.0), jumps: Vec::new(), period }
    }

    /// Pure jump integrator with zero density.
    pub fn jumps_only(jumps: Vec<Jump>, period: f64) -> Result<Self> {
        Self::new(Expr::Const(0.0), jumps, period)
    }

    pub fn density(&self) -> &Expr {
        &self.density
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// True when the continuous part vanishes identically.
    pub fn has_zero_density(&self) -> bool {
        self.density.is_zero()
    }

    pub fn density_at(&self, t: f64) -> Result<f64> {
        self.density.evaluate(&EvalContext::time(t)).map_err(|e| Error::eval(t, e))
    }

    /// Jump times, in order.
    pub fn jump_times(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.tau).collect()
    }

    /// Sum of two integrators: densities add, jump lists merge.
    pub fn combine(&self, other: &Integrator) -> Result<Integrator> {
        if self.period != other.period {
            return Err(Error::Validation("integrators have different periods".into()));
        }
        let mut jumps: Vec<Jump> = self.jumps.iter().chain(&other.jumps).copied().collect();
        jumps.sort_by(|a, b| a.tau.total_cmp(&b.tau));
        let mut merged: Vec<Jump> = Vec::with_capacity(jumps.len());
        for j in jumps {
            match merged.last_mut() {
                Some(last) if last.tau == j.tau => last.size += j.size,
                _ => merged.push(j),
            }
        }
        let density = crate::expr::add(self.density.clone(), other.density.clone());
        Integrator::new(density, merged, self.period)
    }

    /// Value of `h` at `t`. Times before 0 map to `h(0) = 0`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let t = t.min(self.period);
        let mut cuts = vec![0.0];
        cuts.extend(self.jumps.iter().map(|j| j.tau).filter(|&tau| tau < t));
        cuts.push(t);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += quad::simpson_scalar(|s, _| self.density_at(s), w[0], w[1], quad::DEFAULT_TOL)?;
        }
        total += self.jumps.iter().filter(|j| j.tau < t).map(|j| j.size).sum::<f64>();
        Ok(total)
    }

    /// Total variation on `[0, T]`.
    pub fn variation(&self) -> Result<f64> {
        let continuous = if self.has_zero_density() {
            0.0
        } else {
            let (pos, neg) = quad::positive_negative_parts(
                |s| self.density_at(s),
                0.0,
                self.period,
                quad::DEFAULT_TOL,
            )?;
            pos + neg
        };
        Ok(continuous + self.jumps.iter().map(|j| j.size.abs()).sum::<f64>())
    }

    /// Variation over `[a, b]` (jump at `a` included, jump at `b` excluded).
    pub fn variation_on(&self, a: f64, b: f64) -> Result<f64> {
        let continuous = if self.has_zero_density() || a >= b {
            0.0
        } else {
            let (pos, neg) =
                quad::positive_negative_parts(|s| self.density_at(s), a, b, quad::DEFAULT_TOL)?;
            pos + neg
        };
        let jumps: f64 =
            self.jumps.iter().filter(|j| j.tau >= a && j.tau < b).map(|j| j.size.abs()).sum();
        Ok(continuous + jumps)
    }
}

/// What happened to the state at a jump time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpRecord {
    pub tau: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// A smooth stretch of a path on `[start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    start: f64,
    end: f64,
    steps: Vec<DenseStep>,
    end_value: Vec<f64>,
}

impl Segment {
    pub(crate) fn from_steps(start: f64, end: f64, steps: Vec<DenseStep>, end_value: Vec<f64>) -> Self {
        Self { start, end, steps, end_value }
    }

    /// A constant stretch.
    pub fn constant(start: f64, end: f64, value: Vec<f64>) -> Self {
        let steps = vec![DenseStep::constant(start, end - start, &value)];
        Self { start, end, steps, end_value: value }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    /// Step boundaries of the underlying interpolant, `start` and `end` included.
    pub fn nodes(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.steps.iter().map(|s| s.t0).collect();
        v.push(self.end);
        v
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        if t >= self.end {
            out.copy_from_slice(&self.end_value);
            return;
        }
        let i = self.steps.partition_point(|s| s.t0 <= t).saturating_sub(1);
        self.steps[i].eval_into(t, out);
    }

    #[cfg(test)]
    pub(crate) fn steps(&self) -> &[DenseStep] {
        &self.steps
    }
}

/// A computed regulated, left-continuous path `x: [0, T] → ℝⁿ`.
///
/// Between recorded jumps the path is smooth; at a jump time `τ` the path
/// value is the left value and [`RegulatedPath::right_limit`] gives `x(τ+)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatedPath {
    dim: usize,
    segments: Vec<Segment>,
    jumps: Vec<JumpRecord>,
}

impl RegulatedPath {
    /// Assembles a path. Segment `k + 1` must start where jump `k` happens.
    pub fn new(dim: usize, segments: Vec<Segment>, jumps: Vec<JumpRecord>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Validation("a path needs at least one segment".into()));
        }
        if segments.len() != jumps.len() + 1 {
            return Err(Error::Validation("expected one more segment than jumps".into()));
        }
        for (k, j) in jumps.iter().enumerate() {
            if segments[k].end != j.tau || segments[k + 1].start != j.tau {
                return Err(Error::Validation(format!("segments do not meet at jump t = {}", j.tau)));
            }
            if j.left.len() != dim || j.right.len() != dim {
                return Err(Error::Validation("jump record has wrong dimension".into()));
            }
        }
        if segments.iter().any(|s| s.end_value.len() != dim || s.end < s.start) {
            return Err(Error::Validation("segment has wrong dimension or orientation".into()));
        }
        Ok(Self { dim, segments, jumps })
    }

    pub fn constant(value: Vec<f64>, start: f64, end: f64) -> Self {
        let dim = value.len();
        Self { dim, segments: vec![Segment::constant(start, end, value)], jumps: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> f64 {
        self.segments[0].start
    }

    pub fn end(&self) -> f64 {
        self.segments[self.segments.len() - 1].end
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn jumps(&self) -> &[JumpRecord] {
        &self.jumps
    }

    pub fn jump_times(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.tau).collect()
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if t < self.start() || t > self.end() || t.is_nan() {
            Err(Error::OutOfRange { t, start: self.start(), end: self.end() })
        } else {
            Ok(())
        }
    }

    /// Left-continuous value `x(t)`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, Side::At, &mut out)?;
        Ok(out)
    }

    /// `x(τ+)`; equals `x(τ)` away from recorded jumps.
    pub fn right_limit(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, Side::Right, &mut out)?;
        Ok(out)
    }

    /// Value or one-sided limit at `t`, written into `out`.
    pub fn eval_into(&self, t: f64, side: Side, out: &mut [f64]) -> Result<()> {
        self.check_range(t)?;
        if let Ok(k) = self.jumps.binary_search_by(|j| j.tau.total_cmp(&t)) {
            let j = &self.jumps[k];
            out.copy_from_slice(if side == Side::Right { &j.right } else { &j.left });
            return Ok(());
        }
        // segment k covers (tau_{k-1}, tau_k]
        let k = self.jumps.partition_point(|j| j.tau < t);
        self.segments[k].eval_into(t, out);
        Ok(())
    }

    /// First component helper for scalar paths.
    pub fn eval_scalar(&self, t: f64) -> Result<f64> {
        Ok(self.eval(t)?[0])
    }

    /// Writes the path as CSV: `t, x1..xn, is_jump_left, is_jump_right`.
    ///
    /// Rows are taken at the interpolant nodes; each jump contributes two
    /// rows, the left value then the right limit.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("x{i}")));
        header.push("is_jump_left".into());
        header.push("is_jump_right".into());
        writeln!(w, "{}", header.join(","))?;
        let row = |w: &mut W, t: f64, x: &[f64], l: u8, r: u8| -> std::io::Result<()> {
            let mut fields = vec![crate::report::fmt_f64(t)];
            fields.extend(x.iter().map(|v| crate::report::fmt_f64(*v)));
            fields.push(l.to_string());
            fields.push(r.to_string());
            writeln!(w, "{}", fields.join(","))
        };
        let mut buf = vec![0.0; self.dim];
        for (k, seg) in self.segments.iter().enumerate() {
            let nodes = seg.nodes();
            let interior = if k == self.segments.len() - 1 { &nodes[..] } else { &nodes[..nodes.len() - 1] };
            for (i, &t) in interior.iter().enumerate() {
                if k > 0 && i == 0 {
                    continue; // the right-limit row of the previous jump stands for this node
                }
                seg.eval_into(t, &mut buf);
                row(&mut w, t, &buf, 0, 0)?;
            }
            if let Some(j) = self.jumps.get(k) {
                row(&mut w, j.tau, &j.left, 1, 0)?;
                row(&mut w, j.tau, &j.right, 0, 1)?;
            }
        }
        Ok(())
    }
}
