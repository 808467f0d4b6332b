use crate::error::{Error, Result};

pub const DEFAULT_BISECT_TOL: f64 = 1e-9;

const MAX_ITER: usize = 10_000;

/// A sign-changing bracket `[lo, hi]` and the width at which to stop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketedRoot {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
}

impl BracketedRoot {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi, tol: DEFAULT_BISECT_TOL }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Root of a monotone `f` inside `bracket`.
///
/// Stops once the bracket is narrower than `tol` or can no longer be split in
/// floating point. Deterministic: the same inputs always give the same bits.
pub fn bisect<F: Fn(f64) -> f64>(f: F, bracket: BracketedRoot) -> Result<f64> {
    let BracketedRoot { mut lo, mut hi, tol } = bracket;
    let bad = |reason: &str| Error::Bracket { lo, hi, reason: reason.to_string() };
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(bad("need finite lo < hi"));
    }
    if !(tol > 0.0) {
        return Err(bad("tolerance must be positive"));
    }
    let f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.is_nan() || f_hi.is_nan() || f_lo.signum() == f_hi.signum() {
        return Err(bad("function values at the ends do not change sign"));
    }
    let rising = f_hi > 0.0;
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if (v > 0.0) == rising {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn square_root_of_two() {
        let r = bisect(|x| x * x - 2.0, BracketedRoot::new(0.0, 2.0).with_tol(1e-8)).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() <= 1e-8);
    }

    #[test]
    fn symmetric_bracket_hits_zero() {
        assert_eq!(bisect(|x| x, BracketedRoot::new(-1.0, 1.0)).unwrap(), 0.0);
    }

    #[test]
    fn decreasing_functions_work() {
        let r = bisect(|x| 1.0 - x, BracketedRoot::new(0.0, 3.0).with_tol(1e-12)).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_brackets() {
        assert!(matches!(bisect(|x| x, BracketedRoot::new(1.0, 2.0)), Err(Error::Bracket { .. })));
        assert!(matches!(bisect(|x| x, BracketedRoot::new(2.0, 1.0)), Err(Error::Bracket { .. })));
        assert!(bisect(|x| x, BracketedRoot::new(-1.0, 1.0).with_tol(0.0)).is_err());
    }

    #[test]
    fn stops_at_float_resolution() {
        // tolerance far below ulp: terminates instead of spinning
        let r = bisect(|x| x - 1e8, BracketedRoot::new(0.0, 1e9).with_tol(1e-30)).unwrap();
        assert_relative_eq!(r, 1e8, max_relative = 1e-15);
    }
}
