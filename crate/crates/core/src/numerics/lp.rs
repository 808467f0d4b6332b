//! Dense two-phase simplex with Bland's pivoting rule.
//!
//! The problems solved here have a handful of variables (one or two per
//! robot), so a dense tableau is plenty.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpRow {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub bound: f64,
}

impl LpRow {
    pub fn new(coeffs: Vec<f64>, relation: Relation, bound: f64) -> Self {
        Self { coeffs, relation, bound }
    }
}

/// `min c.x` subject to `rows` and `lower <= x <= upper`.
///
/// Lower bounds must be finite; upper bounds may be `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub rows: Vec<LpRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            rows: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn with_row(mut self, row: LpRow) -> Self {
        self.rows.push(row);
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        let bad = |reason: String| Err(Error::InvalidParameter { name: "lp", reason });
        if self.lower.len() != n || self.upper.len() != n {
            return bad(format!("bounds have length {}/{} for {n} variables", self.lower.len(), self.upper.len()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if row.coeffs.len() != n {
                return bad(format!("row {i} has {} coefficients for {n} variables", row.coeffs.len()));
            }
            if !row.bound.is_finite() || row.coeffs.iter().any(|c| !c.is_finite()) {
                return bad(format!("row {i} has non-finite entries"));
            }
        }
        for j in 0..n {
            if !self.lower[j].is_finite() || !(self.lower[j] <= self.upper[j]) {
                return bad(format!("variable {j} has bounds [{}, {}]", self.lower[j], self.upper[j]));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest constraint violation of `x` (0 when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for row in &self.rows {
            let lhs = dot(&row.coeffs, x);
            let v = match row.relation {
                Relation::Le => lhs - row.bound,
                Relation::Ge => row.bound - lhs,
                Relation::Eq => (lhs - row.bound).abs(),
            };
            worst = worst.max(v);
        }
        for j in 0..x.len() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the LP to optimality and returns the lexicographically smallest
/// optimal vertex (ties in the objective are broken towards small `x[0]`,
/// then small `x[1]`, and so on).
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let first = simplex(problem)?;
    let n = problem.objective.len();
    if n <= 1 {
        return Ok(first);
    }
    let magnitude: f64 = problem.objective.iter().zip(&first.x).map(|(c, x)| (c * x).abs()).sum();
    let slack = 1e-13 * magnitude.max(1e-300);
    let mut refined = problem.clone();
    refined.rows.push(LpRow::new(problem.objective.clone(), Relation::Le, first.objective + slack));
    let mut x = first.x;
    for i in 0..n {
        let mut p = refined.clone();
        p.objective = (0..n).map(|j| if j == i { 1.0 } else { 0.0 }).collect();
        match simplex(&p) {
            Ok(sol) => {
                let v = sol.x[i];
                refined.upper[i] = (v + 1e-12 * v.abs().max(1.0)).min(refined.upper[i]).max(refined.lower[i]);
                x = sol.x;
            }
            // numerical trouble in the tie-break pass keeps the vertex found so far
            Err(_) => break,
        }
    }
    let objective = problem.evaluate(&x);
    Ok(LpSolution { x, objective })
}

const PIVOT_EPS: f64 = 1e-12;
const COST_EPS: f64 = 1e-12;

struct Tableau {
    /// rows x (cols + 1); last column is the right-hand side
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn rhs(&self, r: usize) -> f64 {
        self.a[r][self.cols]
    }

    /// Runs simplex iterations for costs `cost` over columns `< allowed`.
    /// Returns `Err(column)` when the objective is unbounded along `column`.
    fn optimize(&mut self, cost: &[f64], allowed: usize) -> std::result::Result<(), usize> {
        let m = self.a.len();
        let scale = cost.iter().fold(0.0f64, |s, c| s.max(c.abs())).max(1e-300);
        for _ in 0..50_000 {
            // reduced costs c_j - c_B B^-1 A_j
            let mut entering = None;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j];
                for i in 0..m {
                    rc -= cost[self.basis[i]] * self.a[i][j];
                }
                if rc < -COST_EPS * scale {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let aij = self.a[i][c];
                if aij > PIVOT_EPS {
                    let ratio = self.rhs(i) / aij;
                    match leave {
                        None => leave = Some((i, ratio)),
                        Some((li, lr)) => {
                            let tie = (ratio - lr).abs() <= 1e-12 * lr.abs().max(1e-300);
                            if ratio < lr && !tie || tie && self.basis[i] < self.basis[li] {
                                leave = Some((i, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return Err(c),
            }
        }
        Ok(())
    }
}

fn simplex(problem: &LpProblem) -> Result<LpSolution> {
    let n = problem.objective.len();
    // shift to y = x - lower >= 0; finite upper bounds become rows
    struct StdRow {
        coeffs: Vec<f64>,
        relation: Relation,
        bound: f64,
        origin: String,
    }
    let mut rows: Vec<StdRow> = Vec::new();
    for (i, row) in problem.rows.iter().enumerate() {
        let shift = dot(&row.coeffs, &problem.lower);
        rows.push(StdRow {
            coeffs: row.coeffs.clone(),
            relation: row.relation,
            bound: row.bound - shift,
            origin: format!("row {i}"),
        });
    }
    for j in 0..n {
        if problem.upper[j].is_finite() {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            rows.push(StdRow {
                coeffs,
                relation: Relation::Le,
                bound: problem.upper[j] - problem.lower[j],
                origin: format!("upper bound of x[{j}]"),
            });
        }
    }
    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.relation != Relation::Eq).count();
    let art0 = n + slack_count;
    let cols = art0 + m;
    let mut a = vec![vec![0.0; cols + 1]; m];
    let mut slack = n;
    for (i, row) in rows.iter().enumerate() {
        a[i][..n].copy_from_slice(&row.coeffs);
        match row.relation {
            Relation::Le => {
                a[i][slack] = 1.0;
                slack += 1;
            }
            Relation::Ge => {
                a[i][slack] = -1.0;
                slack += 1;
            }
            Relation::Eq => {}
        }
        a[i][cols] = row.bound;
        if row.bound < 0.0 {
            for v in a[i].iter_mut() {
                *v = -*v;
            }
        }
        a[i][art0 + i] = 1.0;
    }
    let mut t = Tableau { a, basis: (art0..art0 + m).collect(), cols };

    let mut phase1 = vec![0.0; cols];
    for c in phase1.iter_mut().skip(art0) {
        *c = 1.0;
    }
    // phase one never reports unboundedness: its objective is bounded below by 0
    let _ = t.optimize(&phase1, cols);
    let rhs_scale = rows.iter().fold(1.0f64, |s, r| s.max(r.bound.abs()));
    let infeasibility: f64 = (0..m).filter(|&i| t.basis[i] >= art0).map(|i| t.rhs(i)).sum();
    if infeasibility > 1e-9 * rhs_scale {
        let (worst, _) = (0..m)
            .filter(|&i| t.basis[i] >= art0)
            .map(|i| (t.basis[i] - art0, t.rhs(i)))
            .fold((0, f64::MIN), |acc, v| if v.1 > acc.1 { v } else { acc });
        return Err(Error::Infeasible(format!(
            "linear program has no feasible point; {} cannot be met",
            rows[worst].origin
        )));
    }
    // drive zero-valued artificials out of the basis where possible
    for i in 0..m {
        if t.basis[i] >= art0 {
            if let Some(c) = (0..art0).find(|&j| t.a[i][j].abs() > 1e-9 && !t.basis.contains(&j)) {
                t.pivot(i, c);
            }
        }
    }
    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&problem.objective);
    if let Err(c) = t.optimize(&cost, art0) {
        let what = if c < n { format!("x[{c}]") } else { format!("slack {}", c - n) };
        return Err(Error::Unbounded(format!("objective decreases without bound along {what}")));
    }
    let mut x = problem.lower.clone();
    for i in 0..m {
        let b = t.basis[i];
        if b < n {
            x[b] += t.rhs(i).max(0.0);
        }
    }
    for j in 0..n {
        x[j] = x[j].min(problem.upper[j]);
    }
    let objective = problem.evaluate(&x);
    Ok(LpSolution { x, objective })
}
