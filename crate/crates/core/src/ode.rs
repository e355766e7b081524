//! Dormand–Prince 5(4) integrator with continuous output.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

/// One accepted step with the coefficients of its interpolant.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DenseStep {
    pub t0: f64,
    pub h: f64,
    /// Five coefficient blocks of length `dim`, stored back to back.
    pub coeffs: Vec<f64>,
}

impl DenseStep {
    pub fn dim(&self) -> usize {
        self.coeffs.len() / 5
    }

    /// Interpolated state at `t`; `t` should lie in `[t0, t0 + h]`.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let n = self.dim();
        let s = if self.h == 0.0 { 0.0 } else { (t - self.t0) / self.h };
        let s1 = 1.0 - s;
        let c = &self.coeffs;
        for i in 0..out.len().min(n) {
            out[i] = c[i]
                + s * (c[n + i] + s1 * (c[2 * n + i] + s * (c[3 * n + i] + s1 * c[4 * n + i])));
        }
    }

    #[cfg(test)]
    pub fn end(&self) -> f64 {
        self.t0 + self.h
    }

    /// A step whose interpolant is the constant `value`.
    pub fn constant(t0: f64, h: f64, value: &[f64]) -> DenseStep {
        let n = value.len();
        let mut coeffs = vec![0.0; 5 * n];
        coeffs[..n].copy_from_slice(value);
        DenseStep { t0, h, coeffs }
    }
}

/// Result of integrating across one smooth interval.
#[derive(Debug, Clone)]
pub(crate) struct Trajectory {
    pub steps: Vec<DenseStep>,
    pub end_state: Vec<f64>,
}

fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], ctl: &StepControl) -> f64 {
    let n = y.len().max(1) as f64;
    let sum: f64 = y
        .iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| {
            let sc = ctl.atol + ctl.rtol * a.abs().max(b.abs());
            (e / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

fn initial_step<F>(rhs: &mut F, t0: f64, y0: &[f64], f0: &[f64], span: f64, ctl: &StepControl) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len();
    let scale = |v: f64| ctl.atol + ctl.rtol * v.abs();
    let d0 = (y0.iter().map(|&v| (v / scale(v)).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (f0.iter().zip(y0).map(|(&f, &v)| (f / scale(v)).powi(2)).sum::<f64>() / n as f64)
        .sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(span).min(ctl.max_step);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h * f).collect();
    let mut f1 = vec![0.0; n];
    rhs(t0 + h, &y1, &mut f1)?;
    let d2 = (f1.iter().zip(f0).zip(y0).map(|((a, b), &v)| ((a - b) / scale(v)).powi(2)).sum::<f64>()
        / n as f64)
        .sqrt()
        / h;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h).min(h1).min(span).min(ctl.max_step).max(f64::EPSILON * t0.abs().max(1.0)))
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1 > t0`.
///
/// `accept` sees every accepted step and may abort the integration.
pub(crate) fn integrate<F, G>(
    mut rhs: F,
    t0: f64,
    t1: f64,
    y0: &[f64],
    ctl: &StepControl,
    mut accept: G,
) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    G: FnMut(f64, &[f64]) -> Result<()>,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut steps = Vec::new();
    if t1 <= t0 || n == 0 {
        return Ok(Trajectory { steps, end_state: y });
    }
    let mut t = t0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    rhs(t, &y, &mut k[0])?;
    let mut h = initial_step(&mut rhs, t0, &y, &k[0].clone(), t1 - t0, ctl)?;
    let mut ytmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut fac_old = 1e-4f64;
    let mut rejected_last = false;
    let mut count = 0usize;

    loop {
        count += 1;
        if count > ctl.max_steps {
            return Err(Error::TooManySteps { t, steps: ctl.max_steps });
        }
        let last = t + h >= t1 || (t1 - (t + h)) < 1e-12 * h;
        if last {
            h = t1 - t;
        }
        if h <= 8.0 * f64::EPSILON * t.abs().max(1.0) && !last {
            return Err(Error::StepCollapse { t, h });
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..s {
                    acc += h * A[s][j] * k[j][i];
                }
                ytmp[i] = acc;
            }
            rhs(t + C[s] * h, &ytmp, &mut k[s])?;
            if s == 6 {
                y_new.copy_from_slice(&ytmp);
            }
        }
        for i in 0..n {
            err[i] = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
        }
        let norm = error_norm(&y, &y_new, &err, ctl);
        if !norm.is_finite() {
            h *= 0.1;
            rejected_last = true;
            continue;
        }
        // PI controller, Hairer's constants
        let fac11 = norm.powf(0.2 - 0.04 * 0.75);
        let mut fac = fac11 / fac_old.powf(0.04);
        fac = (fac / 0.9).clamp(0.1, 5.0);
        let h_new = h / fac;
        if norm <= 1.0 {
            fac_old = norm.max(1e-4);
            let mut coeffs = vec![0.0; 5 * n];
            for i in 0..n {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k[0][i] - ydiff;
                coeffs[i] = y[i];
                coeffs[n + i] = ydiff;
                coeffs[2 * n + i] = bspl;
                coeffs[3 * n + i] = ydiff - h * k[6][i] - bspl;
                coeffs[4 * n + i] = h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>();
            }
            let t_next = if last { t1 } else { t + h };
            steps.push(DenseStep { t0: t, h: t_next - t, coeffs });
            t = t_next;
            y.copy_from_slice(&y_new);
            accept(t, &y)?;
            if last {
                return Ok(Trajectory { steps, end_state: y });
            }
            let first = k[6].clone();
            k[0].copy_from_slice(&first);
            let mut h_next = h_new.min(ctl.max_step);
            if rejected_last {
                h_next = h_next.min(h);
            }
            rejected_last = false;
            h = h_next;
        } else {
            // min/max sends a NaN factor to 1.0 where clamp would keep it
            #[allow(clippy::manual_clamp)]
            let shrink = (fac11 / 0.9).min(5.0).max(1.0);
            h /= shrink;
            rejected_last = true;
        }
    }
}
