//! Principal branch of the Lambert W function.
//!
//! `W0(x)` is the unique `w >= -1` with `w * exp(w) = x`, defined for
//! `x >= -1/e`. The initial guess is split by regime (branch-point series,
//! `ln(1 + x)` in the middle, asymptotic logs for large `x`) and then
//! polished by Halley iteration.

use crate::error::{Error, Result};

/// `-1/e`, the branch point of `W0`.
pub const BRANCH_POINT: f64 = -0.367_879_441_171_442_33;

const MAX_HALLEY_ITERS: usize = 64;

/// Evaluates the principal branch `W0(x)`.
///
/// Returns [`Error::LambertDomain`] for `x < -1/e` (and for NaN).
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < BRANCH_POINT {
        return Err(Error::LambertDomain { x });
    }
    if x == BRANCH_POINT {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }

    let mut w = initial_guess(x);
    for _ in 0..MAX_HALLEY_ITERS {
        let ew = w.exp();
        let f = w * ew - x;
        if f == 0.0 {
            break;
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        let next = (w - step).max(-1.0);
        if (next - w).abs() <= 4.0 * f64::EPSILON * next.abs().max(1e-300) {
            w = next;
            break;
        }
        w = next;
    }
    Ok(w)
}

fn initial_guess(x: f64) -> f64 {
    if x < -0.32 {
        // series in p = sqrt(2(ex + 1)) around the branch point
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p - 43.0 / 540.0 * p.powi(4)
    } else if x < 3.0 {
        x.ln_1p()
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}
