use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdOptions {
    /// Stop once a full sweep lowers the objective by less than `tol * max(|f|, floor)`.
    pub tol: f64,
    /// Absolute floor for the stopping test, so zero objectives terminate.
    pub floor: f64,
    pub max_sweeps: usize,
    /// Relative width at which golden-section line searches stop.
    pub line_tol: f64,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self { tol: 1e-9, floor: 1e-300, max_sweeps: 10_000, line_tol: 1e-13 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BcdResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
    pub sweeps: usize,
    /// Objective after each sweep, starting with the initial point.
    pub history: Vec<f64>,
}

/// Minimizes a unimodal `f` over `[lo, hi]`. Returns `(argmin, f(argmin))`.
/// Both end points are always candidates, so minima on the boundary are exact.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64) {
    if !(hi > lo) {
        return (lo, f(lo));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let width_tol = rel_tol * (hi - lo).max(hi.abs().max(lo.abs()) * 1e-300);
    for _ in 0..400 {
        if b - a <= width_tol {
            break;
        }
        // NaN/inf compare as "not smaller", which pushes the search away from them
        if fc < fd || fd.is_nan() {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [(lo, f(lo)), (hi, f(hi)), (mid, f(mid)), (c, fc), (d, fd)]
        .into_iter()
        .filter(|(_, v)| !v.is_nan())
        .fold((mid, f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best })
}

/// Two-block coordinate descent on a box.
///
/// Each sweep minimizes over block `x` with `y` fixed and then over `y` with
/// `x` fixed, one coordinate at a time by golden-section search. Iterates are
/// only accepted when they do not raise the objective, so the history is
/// non-increasing.
pub fn bcd_minimize<F>(
    objective: F,
    x0: Vec<f64>,
    y0: Vec<f64>,
    x_bounds: &[(f64, f64)],
    y_bounds: &[(f64, f64)],
    opts: BcdOptions,
) -> Result<BcdResult>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if x0.len() != x_bounds.len() || y0.len() != y_bounds.len() {
        return Err(Error::InvalidParameter {
            name: "bcd",
            reason: "start point and bounds differ in length".into(),
        });
    }
    let clamp = |v: Vec<f64>, b: &[(f64, f64)]| -> Vec<f64> {
        v.iter().zip(b).map(|(x, (lo, hi))| x.clamp(*lo, *hi)).collect()
    };
    let mut x = clamp(x0, x_bounds);
    let mut y = clamp(y0, y_bounds);
    let mut value = objective(&x, &y);
    let mut history = vec![value];
    for sweep in 1..=opts.max_sweeps {
        let before = value;
        for i in 0..x.len() {
            let (lo, hi) = x_bounds[i];
            let mut trial = x.clone();
            let (best, fv) = golden_section(
                |v| {
                    trial[i] = v;
                    objective(&trial, &y)
                },
                lo,
                hi,
                opts.line_tol,
            );
            if fv <= value {
                x[i] = best;
                value = fv;
            }
        }
        for i in 0..y.len() {
            let (lo, hi) = y_bounds[i];
            let mut trial = y.clone();
            let (best, fv) = golden_section(
                |v| {
                    trial[i] = v;
                    objective(&x, &trial)
                },
                lo,
                hi,
                opts.line_tol,
            );
            if fv <= value {
                y[i] = best;
                value = fv;
            }
        }
        history.push(value);
        if !value.is_finite() {
            return Err(Error::Convergence { iterations: sweep, reason: "objective is not finite".into() });
        }
        if before - value <= opts.tol * value.abs().max(opts.floor) {
            return Ok(BcdResult { x, y, value, sweeps: sweep, history });
        }
    }
    Err(Error::Convergence {
        iterations: opts.max_sweeps,
        reason: "objective still decreasing".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn golden_section_finds_interior_and_boundary_minima() {
        let (x, _) = golden_section(|x| (x - 0.3).powi(2), 0.0, 1.0, 1e-12);
        assert_relative_eq!(x, 0.3, epsilon = 1e-9);
        let (x, fx) = golden_section(|x| x, 2.0, 5.0, 1e-12);
        assert_eq!(x, 2.0);
        assert_eq!(fx, 2.0);
        let (x, _) = golden_section(|x| -x, 2.0, 5.0, 1e-12);
        assert_eq!(x, 5.0);
    }

    #[test]
    fn separable_quadratic() {
        let f = |x: &[f64], y: &[f64]| (x[0] - 1.0).powi(2) + 2.0 * (y[0] + 0.5).powi(2) + 3.0;
        let r = bcd_minimize(f, vec![5.0], vec![5.0], &[(-10.0, 10.0)], &[(-10.0, 10.0)], BcdOptions::default()).unwrap();
        assert_relative_eq!(r.x[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(r.y[0], -0.5, epsilon = 1e-6);
        assert_relative_eq!(r.value, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn coupled_quadratic_history_is_monotone() {
        let f = |x: &[f64], y: &[f64]| x[0] * x[0] + y[0] * y[0] + x[0] * y[0] - x[0] - 2.0 * y[0];
        let r = bcd_minimize(f, vec![3.0], vec![-3.0], &[(-5.0, 5.0)], &[(-5.0, 5.0)], BcdOptions::default()).unwrap();
        // stationary point: 2x + y = 1, x + 2y = 2  ->  x = 0, y = 1
        assert!(r.x[0].abs() < 1e-4);
        assert_relative_eq!(r.y[0], 1.0, epsilon = 1e-4);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn optimal_start_stops_after_one_sweep() {
        let f = |x: &[f64], y: &[f64]| (x[0] - 1.0).powi(2) + (y[0] - 2.0).powi(2);
        let r = bcd_minimize(f, vec![1.0], vec![2.0], &[(0.0, 3.0)], &[(0.0, 3.0)], BcdOptions::default()).unwrap();
        assert_eq!(r.sweeps, 1);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn mismatched_bounds_are_rejected() {
        let f = |_: &[f64], _: &[f64]| 0.0;
        assert!(bcd_minimize(f, vec![0.0, 1.0], vec![0.0], &[(0.0, 1.0)], &[(0.0, 1.0)], BcdOptions::default()).is_err());
    }
}
