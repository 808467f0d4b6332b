//! Numerical building blocks: Lambert W, bracketed bisection, a dense simplex
//! LP solver and a two-block coordinate-descent minimizer.

mod bcd;
mod bisect;
mod lambert;
mod lp;

pub use bcd::{bcd_minimize, golden_section, BcdOptions, BcdResult};
pub use bisect::{bisect, BracketedRoot, DEFAULT_BISECT_TOL};
pub use lambert::{lambert_w0, lambert_w0_shifted, LAMBERT_MAX_ITER};
pub use lp::{solve_lp, LpProblem, LpRow, LpSolution, Relation};
