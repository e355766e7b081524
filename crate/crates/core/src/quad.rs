//! Adaptive Simpson quadrature and sign-change localisation.

use crate::error::{Error, Result};

/// Where an integrand is evaluated relative to a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Limit from the left, `t-`.
    Left,
    /// The value at `t` itself.
    At,
    /// Limit from the right, `t+`.
    Right,
}

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_DEPTH: usize = 60;
/// Levels always subdivided, so that a lucky agreement of the first
/// few samples on an oscillating integrand is not accepted.
pub const MIN_DEPTH: usize = 4;

/// Integrates a vector-valued function over the open interval `(a, b)`.
///
/// The endpoints are sampled as one-sided limits (`Right` at `a`, `Left`
/// at `b`), so the integrand may jump exactly at either end.
pub fn simpson<F>(mut f: F, dim: usize, a: f64, b: f64, tol: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, Side, &mut [f64]) -> Result<()>,
{
    if a == b {
        return Ok(vec![0.0; dim]);
    }
    let mut eval = |t: f64, side: Side| -> Result<Vec<f64>> {
        let mut out = vec![0.0; dim];
        f(t, side, &mut out)?;
        if out.iter().any(|v| v.is_nan()) {
            return Err(Error::NotANumber { t });
        }
        Ok(out)
    };
    let fa = eval(a, Side::Right)?;
    let fb = eval(b, Side::Left)?;
    let m = 0.5 * (a + b);
    let fm = eval(m, Side::At)?;
    let whole = rule(a, b, &fa, &fm, &fb);
    let mut acc = vec![0.0; dim];
    refine(&mut eval, a, b, &fa, &fm, &fb, &whole, tol, 0, &mut acc)?;
    Ok(acc)
}

/// Scalar convenience wrapper around [`simpson`].
pub fn simpson_scalar<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64, Side) -> Result<f64>,
{
    let v = simpson(
        |t, side, out: &mut [f64]| {
            out[0] = f(t, side)?;
            Ok(())
        },
        1,
        a,
        b,
        tol,
    )?;
    Ok(v[0])
}

fn rule(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    let w = (b - a) / 6.0;
    fa.iter().zip(fm).zip(fb).map(|((x, y), z)| w * (x + 4.0 * y + z)).collect()
}

#[allow(clippy::too_many_arguments)]
fn refine<E>(
    eval: &mut E,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: &[f64],
    tol: f64,
    depth: usize,
    acc: &mut [f64],
) -> Result<()>
where
    E: FnMut(f64, Side) -> Result<Vec<f64>>,
{
    let m = 0.5 * (a + b);
    let flm = eval(0.5 * (a + m), Side::At)?;
    let frm = eval(0.5 * (m + b), Side::At)?;
    let left = rule(a, m, fa, &flm, fm);
    let right = rule(m, b, fm, &frm, fb);

    let mut delta = 0.0f64;
    let mut scale = 0.0f64;
    for i in 0..whole.len() {
        delta = delta.max((left[i] + right[i] - whole[i]).abs());
        scale = scale.max((left[i] + right[i]).abs());
    }
    // below this the estimate is rounding noise
    let floor = 64.0 * f64::EPSILON * scale;
    let width_exhausted = (m - a).abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0);
    if (depth >= MIN_DEPTH && delta <= 15.0 * tol.max(floor)) || width_exhausted {
        for i in 0..acc.len() {
            acc[i] += left[i] + right[i] + (left[i] + right[i] - whole[i]) / 15.0;
        }
        return Ok(());
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature { a, b });
    }
    refine(eval, a, m, fa, &flm, fm, &left, 0.5 * tol, depth + 1, acc)?;
    refine(eval, m, b, fm, &frm, fb, &right, 0.5 * tol, depth + 1, acc)
}

/// Sign changes of a continuous function on `[a, b]`, located by sampling
/// `samples` subintervals and bisecting each bracket to width `xtol`.
pub fn sign_changes<F>(mut f: F, a: f64, b: f64, samples: usize, xtol: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut roots = Vec::new();
    let node = |i: usize| a + (b - a) * (i as f64) / (samples as f64);
    let mut prev_t = a;
    let mut prev = f(a)?;
    for i in 1..=samples {
        let t = if i == samples { b } else { node(i) };
        let v = f(t)?;
        if prev == 0.0 && i > 1 {
            // exact zero on a sample node; record it once
            if roots.last() != Some(&prev_t) {
                roots.push(prev_t);
            }
        } else if prev * v < 0.0 {
            let (mut lo, mut hi, mut flo) = (prev_t, t, prev);
            while hi - lo > xtol {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid)?;
                if fm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        prev_t = t;
        prev = v;
    }
    Ok(roots)
}

/// `(∫ f₊, ∫ f₋)` over `[a, b]` for continuous `f`, split at sign changes
/// so each piece is integrated without a kink.
pub fn positive_negative_parts<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut cuts = vec![a];
    cuts.extend(sign_changes(&mut f, a, b, 4096, 1e-12)?.into_iter().filter(|&r| r > a && r < b));
    cuts.push(b);
    let piece_tol = tol / (cuts.len() - 1) as f64;
    let (mut pos, mut neg) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let v = simpson_scalar(|t, _| f(t), lo, hi, piece_tol)?;
        if v >= 0.0 {
            pos += v;
        } else {
            neg -= v;
        }
    }
    Ok((pos, neg))
}
