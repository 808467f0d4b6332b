use std::f64::consts::E;

use crate::error::{Error, Result};

/// Iteration cap for the Newton/Halley refinements below.
pub const LAMBERT_MAX_ITER: usize = 64;

const BRANCH_SLACK: f64 = 1e-12;

/// Principal branch `W0(x)`, the solution `w >= -1` of `w e^w = x`.
///
/// Arguments up to `1e-12` below `-1/e` are clamped to the branch point.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain { x });
    }
    let branch = -1.0 / E;
    if x < branch {
        if x >= branch - BRANCH_SLACK {
            return Ok(-1.0);
        }
        return Err(Error::Domain { x });
    }
    // distance from the branch point, scaled: x = (s - 1) / e
    Ok(lambert_w0_shifted(E * x + 1.0))
}

/// `W0((s - 1) / e)` for `s >= 0`.
///
/// Taking the offset `s` from the branch point directly keeps full relative
/// precision when `s` is tiny, where forming `(s - 1) / e` first would cancel.
pub fn lambert_w0_shifted(s: f64) -> f64 {
    if s <= 0.0 {
        return -1.0;
    }
    if s < 0.5 {
        return near_branch(s) - 1.0;
    }
    let x = (s - 1.0) / E;
    if x > 20.0 {
        large_argument(x)
    } else {
        halley(x)
    }
}

/// Solves `1 - e^u (1 - u) = s` for `u = 1 + W0` near the branch point.
fn near_branch(s: f64) -> f64 {
    let p = (2.0 * s).sqrt();
    let mut u = p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
    for _ in 0..LAMBERT_MAX_ITER {
        let residual = one_minus_exp_shift(u) - s;
        let slope = u * u.exp();
        if slope <= 0.0 {
            break;
        }
        let step = residual / slope;
        u -= step;
        if step.abs() <= 1e-16 * u.abs() {
            break;
        }
    }
    u
}

/// `1 - e^u (1 - u)` without cancellation for small `u`.
fn one_minus_exp_shift(u: f64) -> f64 {
    if u.abs() < 0.1 {
        // sum_{n>=2} (n-1) u^n / n!
        let mut term = u;
        let mut sum = 0.0;
        for n in 2..20 {
            term *= u / n as f64;
            sum += (n - 1) as f64 * term;
        }
        sum
    } else {
        1.0 - u.exp() * (1.0 - u)
    }
}

fn halley(x: f64) -> f64 {
    let l = x.ln_1p();
    let mut w = l * (1.0 - l.ln_1p() / (2.0 + l));
    for _ in 0..LAMBERT_MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w.abs().max(1e-300) {
            break;
        }
    }
    w
}

/// Newton on `w + ln w = ln x`, which never overflows.
fn large_argument(x: f64) -> f64 {
    let lx = x.ln();
    let llx = lx.ln();
    let mut w = lx - llx + llx / lx;
    for _ in 0..LAMBERT_MAX_ITER {
        let step = (w + w.ln() - lx) / (1.0 + 1.0 / w);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    w
}
