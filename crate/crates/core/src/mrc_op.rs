//! Min-max energy balancing across the slaves (the optimal scheme).
//!
//! The task problem minimizes the largest per-slave energy `e`. Each slave's
//! energy is a convex, increasing function `F_k` of the bits it collects once
//! the offloading stage is solved optimally, so the primal optimum is found
//! by water-filling a common energy level. The dual side (multipliers
//! `lambda` on the reserves and `alpha` on the epigraph rows) is run by
//! projected subgradient ascent; each dual function value is an exact
//! Lagrangian minimum and so a certified lower bound, which gives the
//! reported duality gap.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, check_positive, Error, Result};
use crate::model::{
    f_power_slope, master_energy, slave_energy, EnergyBreakdown, MasterParams, OffloadLink, SensingPlan,
    SlaveAllocation, SlaveParams, TimeBudget,
};
use crate::mrc_rp::{offload_point, plan_from_times, solve_offload, solve_sensing_lp, solve_p5_per_slave, OffloadCase, RpDecision, ThresholdProfile};
use crate::numerics::{bcd_minimize, golden_section, BcdOptions, LpProblem, LpRow, Relation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpOptions {
    /// Initial dual step; the step at iteration `t` is `eta0 / sqrt(t)`.
    pub eta0: f64,
    pub max_iterations: usize,
    /// Relative duality gap at which the ascent stops.
    pub gap_tol: f64,
    /// Start the ascent from multipliers read off the primal optimum instead
    /// of uniform `alpha`.
    pub warm_start: bool,
}

impl Default for OpOptions {
    fn default() -> Self {
        Self { eta0: 0.1, max_iterations: 500, gap_tol: 1e-3, warm_start: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    /// Reserve multipliers, one per slave.
    pub lambda: Vec<f64>,
    /// Epigraph multipliers; kept on the probability simplex.
    pub alpha: Vec<f64>,
    pub eta0: f64,
}

impl DualState {
    pub fn new(k: usize, eta0: f64) -> Self {
        let a = if k == 0 { 0.0 } else { 1.0 / k as f64 };
        Self { lambda: vec![0.0; k], alpha: vec![a; k], eta0 }
    }

    /// Per-slave weights `alpha_k + lambda_k` of the Lagrangian.
    pub fn weights(&self) -> Vec<f64> {
        self.alpha.iter().zip(&self.lambda).map(|(a, l)| a + l).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpSolution {
    pub sensing: SensingPlan,
    pub decisions: Vec<RpDecision>,
    pub energies: Vec<EnergyBreakdown>,
    /// Largest per-slave energy of the returned allocation.
    pub e_star: f64,
    pub dual: DualState,
    /// Best certified lower bound on `e_star`.
    pub dual_value: f64,
    /// `e_star - dual_value` (J).
    pub gap: f64,
    pub iterations: usize,
    /// Best dual value after each iteration.
    pub dual_history: Vec<f64>,
}

impl OpSolution {
    pub fn relative_gap(&self) -> f64 {
        if self.e_star > 0.0 {
            self.gap / self.e_star
        } else {
            0.0
        }
    }

    pub fn allocations(&self) -> Vec<SlaveAllocation> {
        (0..self.decisions.len())
            .map(|k| SlaveAllocation {
                sensing_time: self.sensing.sensing_time[k],
                bits: self.sensing.bits[k],
                offload_bits: self.decisions[k].offload_bits,
                offload_time: self.decisions[k].offload_time,
            })
            .collect()
    }
}

/// Sensing LP: `min sum w_k (p_s + p_c) t_s,k` subject to collecting `total_bits`
/// within the window. Ties go to the lexicographically smallest vertex.
pub fn solve_sp1(weights: &[f64], slaves: &[SlaveParams], total_bits: f64, sensing_window: f64) -> Result<SensingPlan> {
    if weights.len() != slaves.len() {
        return Err(Error::InvalidParameter { name: "solve_sp1", reason: "length mismatch".into() });
    }
    for w in weights {
        check_nonnegative("weight", *w)?;
    }
    check_nonnegative("total_bits", total_bits)?;
    check_positive("sensing_window", sensing_window)?;
    let k = slaves.len();
    if total_bits == 0.0 {
        return Ok(SensingPlan::zeros(k));
    }
    let capacity: f64 = slaves.iter().map(|s| s.sensing_capacity(sensing_window)).sum();
    if capacity < total_bits * (1.0 - 1e-12) {
        return Err(Error::Infeasible(format!(
            "active slaves can sense at most {capacity} bits, task needs {total_bits}"
        )));
    }
    let objective = slaves.iter().zip(weights).map(|(s, w)| w * (s.sensing_power + s.circuit_power)).collect();
    let rate = slaves.iter().map(|s| s.sensing_power / s.sense_energy_per_bit).collect();
    let lp = LpProblem::new(objective)
        .with_row(LpRow::new(rate, Relation::Ge, total_bits))
        .with_bounds(vec![0.0; k], vec![sensing_window; k]);
    let times = solve_sensing_lp(lp)?;
    Ok(plan_from_times(slaves, times, total_bits))
}

/// Offloading stage for every slave. A positive weight scales a slave's
/// objective without moving its minimizer, so each slave is solved on its own.
pub fn solve_sp2(weights: &[f64], slaves: &[SlaveParams], bits: &[f64], window: f64) -> Result<Vec<RpDecision>> {
    if weights.len() != slaves.len() || bits.len() != slaves.len() {
        return Err(Error::InvalidParameter { name: "solve_sp2", reason: "length mismatch".into() });
    }
    for w in weights {
        check_nonnegative("weight", *w)?;
    }
    slaves.iter().zip(bits).map(|(s, b)| solve_p5_per_slave(s, *b, window)).collect()
}

/// Epigraph value recovered from the current primal point.
pub fn solve_sp3(alpha: &[f64], energies: &[f64]) -> Result<f64> {
    if alpha.len() != energies.len() {
        return Err(Error::InvalidParameter { name: "solve_sp3", reason: "length mismatch".into() });
    }
    Ok(energies.iter().copied().fold(0.0, f64::max))
}

/// One projected subgradient step on `(lambda, alpha)`.
pub fn dual_step(dual: &DualState, energies: &[f64], reserves: &[f64], e_star: f64, iter: usize) -> DualState {
    let eta = dual.eta0 / (iter.max(1) as f64).sqrt();
    let lambda = dual
        .lambda
        .iter()
        .zip(energies.iter().zip(reserves))
        .map(|(l, (e, r))| (l + eta * (e - r)).max(0.0))
        .collect();
    let mut alpha: Vec<f64> = dual.alpha.iter().zip(energies).map(|(a, e)| (a + eta * (e - e_star)).max(0.0)).collect();
    let sum: f64 = alpha.iter().sum();
    if sum > 0.0 {
        alpha.iter_mut().for_each(|a| *a /= sum);
    } else if !alpha.is_empty() {
        let u = 1.0 / alpha.len() as f64;
        alpha.iter_mut().for_each(|a| *a = u);
    }
    DualState { lambda, alpha, eta0: dual.eta0 }
}

/// Task energy of one slave as a function of the bits it collects, with the
/// offloading stage at its optimum.
#[derive(Debug, Clone)]
pub struct SlaveCost {
    link: OffloadLink,
    profile: ThresholdProfile,
    window: f64,
    sensing_per_bit: f64,
    /// Most bits the slave can sense in the window.
    pub cap: f64,
}

impl SlaveCost {
    pub fn new(params: &SlaveParams, budget: &TimeBudget) -> Self {
        let link = params.link();
        Self {
            profile: ThresholdProfile::of(&link),
            link,
            window: budget.slave_window,
            sensing_per_bit: params.sensing_cost_per_bit(),
            cap: params.sensing_capacity(budget.sensing),
        }
    }

    pub fn energy(&self, bits: f64) -> f64 {
        if bits <= 0.0 {
            return 0.0;
        }
        let (x, t) = offload_point(&self.link, &self.profile, bits, self.window);
        self.sensing_per_bit * bits + self.link.stage_energy(bits, x, t).unwrap_or(f64::INFINITY)
    }

    /// Right derivative of [`SlaveCost::energy`].
    pub fn slope(&self, bits: f64) -> f64 {
        let b = bits.max(self.cap * 1e-12).max(1e-9);
        let (x, t) = offload_point(&self.link, &self.profile, b, self.window);
        let local = self.link.local_cost_per_bit();
        let floor = self.link.mandatory_offload(b, self.window);
        let stage = if x <= 0.0 {
            local
        } else if x >= b || x <= floor {
            // the offloaded amount moves with the demand
            f_power_slope(x / t, self.link.bandwidth, self.link.noise) / self.link.gain
        } else {
            local
        };
        self.sensing_per_bit + stage
    }

    /// Largest `D <= cap` with `energy(D) <= level`.
    pub fn bits_at_level(&self, level: f64) -> f64 {
        if level <= 0.0 {
            return 0.0;
        }
        if self.energy(self.cap) <= level {
            return self.cap;
        }
        let (mut lo, mut hi) = (0.0, self.cap);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.energy(mid) <= level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Smallest (`upper = false`) or largest (`upper = true`) minimizer of
    /// `w F(D) - mu D` on `[0, cap]`.
    fn argmin_linear(&self, w: f64, mu: f64, upper: bool) -> f64 {
        let below = |d: f64| {
            let s = w * self.slope(d);
            if upper {
                s <= mu
            } else {
                s < mu
            }
        };
        if !below(0.0) {
            return 0.0;
        }
        if below(self.cap) {
            return self.cap;
        }
        let (mut lo, mut hi) = (0.0, self.cap);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if below(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Exact minimum of the Lagrangian over the sensing split for fixed weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianMin {
    /// Certified lower bound on the task optimum.
    pub value: f64,
    pub bits: Vec<f64>,
    pub energies: Vec<f64>,
}

/// Minimizes `sum w_k F_k(D_k) - lambda . reserves` over `sum D_k >= total_bits`.
/// Works through the one-dimensional dual in the price `mu` of the bit
/// constraint; any `mu` gives a valid bound and the best one is returned.
pub fn lagrangian_minimum(costs: &[SlaveCost], dual: &DualState, reserves: &[f64], total_bits: f64) -> LagrangianMin {
    let w = dual.weights();
    let offset: f64 = dual.lambda.iter().zip(reserves).map(|(l, r)| l * r).sum();
    let bound = |mu: f64| -> f64 {
        let mut v = mu * total_bits - offset;
        for (c, wk) in costs.iter().zip(&w) {
            let d = c.argmin_linear(*wk, mu, false);
            v += wk * c.energy(d) - mu * d;
        }
        v
    };
    let mu_max = costs.iter().zip(&w).map(|(c, wk)| wk * c.slope(c.cap)).fold(0.0, f64::max) * 1.01 + 1e-300;
    let (mu, value) = golden_section(|m| -bound(m), 0.0, mu_max, 1e-13);
    let value = -value;
    // split on flat faces: fill from the smallest minimizers upward in index order
    let mut bits: Vec<f64> = costs.iter().zip(&w).map(|(c, wk)| c.argmin_linear(*wk, mu * (1.0 - 1e-9), false)).collect();
    let upper: Vec<f64> = costs.iter().zip(&w).map(|(c, wk)| c.argmin_linear(*wk, mu * (1.0 + 1e-9), true)).collect();
    let mut missing = total_bits - bits.iter().sum::<f64>();
    for k in 0..bits.len() {
        if missing <= 0.0 {
            break;
        }
        let add = (upper[k] - bits[k]).max(0.0).min(missing);
        bits[k] += add;
        missing -= add;
    }
    let energies = costs.iter().zip(&bits).map(|(c, d)| c.energy(*d)).collect();
    LagrangianMin { value, bits, energies }
}

/// Exact min-max split by water-filling a common energy level.
pub fn water_fill(costs: &[SlaveCost], reserves: &[f64], total_bits: f64) -> Result<(Vec<f64>, f64)> {
    if total_bits <= 0.0 {
        return Ok((vec![0.0; costs.len()], 0.0));
    }
    let fill = |level: f64| -> Vec<f64> {
        costs.iter().zip(reserves).map(|(c, r)| c.bits_at_level(level.min(*r))).collect()
    };
    let top = costs.iter().zip(reserves).map(|(c, r)| c.energy(c.cap).min(*r)).fold(0.0, f64::max);
    let most: f64 = fill(top).iter().sum();
    if most < total_bits * (1.0 - 1e-12) {
        return Err(Error::Infeasible(format!(
            "active slaves can collect at most {most} bits within sensing time and reserves, task needs {total_bits}"
        )));
    }
    let (mut lo, mut hi) = (0.0, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if fill(mid).iter().sum::<f64>() >= total_bits {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut bits = fill(hi);
    let sum: f64 = bits.iter().sum();
    if sum > total_bits {
        let scale = total_bits / sum;
        bits.iter_mut().for_each(|b| *b *= scale);
    }
    let level = costs.iter().zip(&bits).map(|(c, d)| c.energy(*d)).fold(0.0, f64::max);
    Ok((bits, level))
}

/// Multipliers read off the optimality conditions of a water-filled split:
/// slaves on the common level get `alpha_k` proportional to `1 / F_k'`.
fn recovered_multipliers(costs: &[SlaveCost], bits: &[f64], level: f64, eta0: f64, left: bool) -> DualState {
    let mut dual = DualState::new(costs.len(), eta0);
    let mut alpha: Vec<f64> = costs
        .iter()
        .zip(bits)
        .map(|(c, d)| {
            if *d <= 0.0 || c.energy(*d) < level * (1.0 - 1e-9) {
                return 0.0;
            }
            let s = if left { c.slope((*d * (1.0 - 1e-9)).max(0.0)) } else { c.slope(*d) };
            1.0 / s
        })
        .collect();
    let sum: f64 = alpha.iter().sum();
    if sum > 0.0 {
        alpha.iter_mut().for_each(|a| *a /= sum);
        dual.alpha = alpha;
    }
    dual
}

/// Min-max allocation of one task over `slaves` with the given reserves.
pub fn solve_p3(
    slaves: &[SlaveParams],
    reserves: &[f64],
    total_bits: f64,
    budget: &TimeBudget,
    opts: &OpOptions,
) -> Result<OpSolution> {
    if slaves.len() != reserves.len() {
        return Err(Error::InvalidParameter { name: "solve_p3", reason: "length mismatch".into() });
    }
    if slaves.is_empty() {
        return Err(Error::Infeasible("no active slave robots".into()));
    }
    check_nonnegative("total_bits", total_bits)?;
    let costs: Vec<SlaveCost> = slaves.iter().map(|s| SlaveCost::new(s, budget)).collect();
    let (bits, level) = water_fill(&costs, reserves, total_bits)?;

    let mut dual = DualState::new(slaves.len(), opts.eta0);
    let mut best = f64::NEG_INFINITY;
    if opts.warm_start && level > 0.0 {
        for left in [false, true] {
            let candidate = recovered_multipliers(&costs, &bits, level, opts.eta0, left);
            let v = lagrangian_minimum(&costs, &candidate, reserves, total_bits).value;
            if v > best {
                best = v;
                dual = candidate;
            }
        }
    }
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut best_dual = dual.clone();
    for iter in 1..=opts.max_iterations {
        iterations = iter;
        let inner = lagrangian_minimum(&costs, &dual, reserves, total_bits);
        if inner.value > best {
            best = inner.value;
            best_dual = dual.clone();
        }
        history.push(best);
        if level - best <= opts.gap_tol * level.max(1e-300) {
            break;
        }
        let e_star = solve_sp3(&dual.alpha, &inner.energies)?;
        dual = dual_step(&dual, &inner.energies, reserves, e_star, iter);
    }

    let times: Vec<f64> = slaves.iter().zip(&bits).map(|(s, d)| s.sensing_time(*d)).collect();
    let sensing = SensingPlan { sensing_time: times, bits: bits.clone() };
    let weights = best_dual.weights();
    let decisions = solve_sp2(&weights, slaves, &bits, budget.slave_window)?;
    let energies = slaves
        .iter()
        .zip(&sensing.sensing_time)
        .zip(bits.iter().zip(&decisions))
        .map(|((s, ts), (d, dec))| slave_energy(s, *ts, *d, dec.offload_bits, dec.offload_time))
        .collect::<Result<Vec<_>>>()?;
    for ((s, e), r) in slaves.iter().zip(&energies).zip(reserves) {
        if e.total > *r {
            return Err(Error::Infeasible(format!("SR{} needs {} J but has {r} J left", s.id, e.total)));
        }
    }
    let e_star = energies.iter().map(|e| e.total).fold(0.0, f64::max);
    let dual_value = best.min(e_star);
    Ok(OpSolution {
        sensing,
        decisions,
        energies,
        e_star,
        dual: best_dual,
        dual_value,
        gap: (e_star - dual_value).max(0.0),
        iterations,
        dual_history: history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterSolution {
    pub decision: RpDecision,
    pub energy: EnergyBreakdown,
    /// Energy reached by block coordinate descent.
    pub bcd_energy: f64,
    /// Energy of the closed-form threshold policy.
    pub closed_form_energy: f64,
}

/// Master's offloading problem to the base station.
///
/// Solved by block coordinate descent over `(D_off, t_off)` and by the closed
/// form; the lower-energy point is returned. Fails when the result does not
/// fit the master's reserve.
pub fn solve_p2_master(master: &MasterParams, bits: f64, reserve: f64, window: f64) -> Result<MasterSolution> {
    check_nonnegative("bits", bits)?;
    check_positive("window", window)?;
    let link = master.link();
    let closed = solve_offload(&link, bits, window)?;
    let closed_energy = link.stage_energy(bits, closed.offload_bits, closed.offload_time)?;
    let (decision, bcd_energy) = if bits == 0.0 {
        (closed, 0.0)
    } else {
        let floor = link.mandatory_offload(bits, window);
        let objective = |x: &[f64], t: &[f64]| link.stage_energy(bits, x[0], t[0]).unwrap_or(f64::INFINITY);
        let r = bcd_minimize(
            objective,
            vec![0.5 * (floor + bits)],
            vec![window],
            &[(floor, bits)],
            &[(0.0, window)],
            BcdOptions::default(),
        )?;
        if r.value < closed_energy * (1.0 - 1e-12) {
            let (x, t) = (r.x[0], r.y[0]);
            let case = if x <= 0.0 {
                OffloadCase::NoOffload
            } else if x >= bits {
                OffloadCase::FullOffload
            } else if x <= floor {
                OffloadCase::MandatoryMinimum
            } else {
                OffloadCase::WindowClamped
            };
            (RpDecision { offload_bits: x, offload_time: t, phi: closed.phi, case }, r.value)
        } else {
            (closed, r.value)
        }
    };
    let energy = master_energy(master, bits, decision.offload_bits, decision.offload_time)?;
    if energy.total > reserve {
        return Err(Error::Infeasible(format!(
            "master needs {} J for {bits} bits but has {reserve} J left",
            energy.total
        )));
    }
    Ok(MasterSolution { decision, energy, bcd_energy, closed_form_energy: closed_energy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{master, slave};
    use crate::oracle::{grid_search_minmax, grid_search_p5};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn budget() -> TimeBudget {
        TimeBudget { sensing: 0.8, slave_window: 0.04, master_window: 0.01 }
    }

    fn pair() -> Vec<SlaveParams> {
        let a = slave();
        let mut b = slave();
        b.id = 2;
        vec![a, b]
    }

    #[test]
    fn sp1_tie_break_and_weights() {
        let s = pair();
        let cap = s[0].sensing_capacity(0.8);
        let plan = solve_sp1(&[1.0, 1.0], &s, cap / 2.0, 0.8).unwrap();
        assert_relative_eq!(plan.bits[0], cap / 2.0, max_relative = 1e-9);
        assert!(plan.bits[1] <= cap * 1e-9);
        let plan = solve_sp1(&[1.0, 2.0], &s, cap / 2.0, 0.8).unwrap();
        assert_eq!(plan.sensing_time[1], 0.0);
        assert_eq!(solve_sp1(&[1.0, 2.0], &s, 0.0, 0.8).unwrap(), SensingPlan::zeros(2));
        assert!(matches!(solve_sp1(&[1.0, 1.0], &s, 3.0 * cap, 0.8), Err(Error::Infeasible(_))));
    }

    #[test]
    fn sp2_ignores_weight_scale() {
        let s = pair();
        let a = solve_sp2(&[0.0, 1.0], &s, &[1e6, 1e6], 0.04).unwrap();
        let b = solve_sp2(&[5.0, 1.0], &s, &[1e6, 1e6], 0.04).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].offload_bits, 1e6);
        let mut poor = slave();
        poor.gain = 1e-14;
        let d = solve_sp2(&[1.0], &[poor], &[1e4], 0.04).unwrap();
        assert_eq!(d[0], RpDecision::zero());
    }

    #[test]
    fn sp3_is_the_largest_energy() {
        assert_eq!(solve_sp3(&[1.0, 0.0, 0.0], &[2.0, 1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(solve_sp3(&[0.5, 0.5], &[0.3, 0.3]).unwrap(), 0.3);
    }

    #[test]
    fn dual_step_projections() {
        let d = DualState { lambda: vec![0.5, 0.0], alpha: vec![0.5, 0.5], eta0: 0.1 };
        let n = dual_step(&d, &[1.0, 0.5], &[1.0, 2.0], 1.0, 1);
        assert_eq!(n.lambda, vec![0.5, 0.0]);
        assert_relative_eq!(n.alpha.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(n.alpha[0] > n.alpha[1]);
    }

    #[test]
    fn energy_function_matches_the_model() {
        let p = slave();
        let c = SlaveCost::new(&p, &budget());
        for bits in [1e3, 1e5, 2e6, 3.9e6] {
            let d = solve_p5_per_slave(&p, bits, 0.04).unwrap();
            let e = slave_energy(&p, p.sensing_time(bits), bits, d.offload_bits, d.offload_time).unwrap();
            assert_relative_eq!(c.energy(bits), e.total, max_relative = 1e-12);
        }
    }

    #[test]
    fn slope_matches_finite_differences() {
        let mut p = slave();
        p.cpu_speed = 1e10;
        let c = SlaveCost::new(&p, &budget());
        for bits in [1e4, 1e6, 5e6, 9.9e6] {
            let h = bits * 1e-6;
            let fd = (c.energy(bits + h) - c.energy(bits)) / h;
            assert_relative_eq!(c.slope(bits), fd, max_relative = 1e-4);
        }
    }

    #[test]
    fn single_slave_matches_the_grid() {
        let p = slave();
        let s = solve_p3(std::slice::from_ref(&p), &[3.0], 1e6, &budget(), &OpOptions::default()).unwrap();
        let g = grid_search_minmax(&[p], &[3.0], 1e6, &budget(), 50, 200).unwrap();
        assert!(s.e_star <= g.max_energy * (1.0 + 1e-9));
        assert!((s.e_star - g.max_energy).abs() <= 0.01 * g.max_energy);
        assert!(s.relative_gap() <= 1e-3);
    }

    #[test]
    fn identical_slaves_share_evenly() {
        let s = solve_p3(&pair(), &[3.0, 3.0], 2e6, &budget(), &OpOptions::default()).unwrap();
        assert!((s.energies[0].total - s.energies[1].total).abs() <= 1e-4);
        assert_relative_eq!(s.sensing.total_bits(), 2e6, max_relative = 1e-12);
    }

    #[test]
    fn cold_ascent_keeps_a_monotone_bound() {
        let mut s = pair();
        s[1].sense_energy_per_bit = 1.8e-8;
        s[1].gain = 1e-8;
        let opts = OpOptions { warm_start: false, max_iterations: 200, ..Default::default() };
        let sol = solve_p3(&s, &[3.0, 2.5], 4e6, &budget(), &opts).unwrap();
        assert!(sol.dual_history.windows(2).all(|w| w[1] >= w[0]));
        assert!(sol.dual_value <= sol.e_star);
    }

    #[test]
    fn exhausted_reserves_are_infeasible() {
        let err = solve_p3(&pair(), &[0.01, 0.01], 5e6, &budget(), &OpOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
        assert!(matches!(solve_p3(&[], &[], 1.0, &budget(), &OpOptions::default()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn master_zero_and_local() {
        let m = master();
        let s = solve_p2_master(&m, 0.0, 10.0, 0.01).unwrap();
        assert_eq!(s.energy.total, 0.0);
        let mut poor = master();
        poor.gain = 1e-16;
        let s = solve_p2_master(&poor, 1e5, 10.0, 0.01).unwrap();
        assert_eq!(s.decision.offload_bits, 0.0);
        assert_relative_eq!(s.energy.total, 1e5 * 100.0 * 1e-8, max_relative = 1e-12);
    }

    #[test]
    fn master_agrees_with_the_grid() {
        let m = master();
        for bits in [5e5, 2e6, 4e6] {
            let s = solve_p2_master(&m, bits, 1e9, 0.01).unwrap();
            let g = grid_search_p5(&m.link(), bits, 0.01, 200).unwrap();
            assert!(s.energy.total <= g.energy * 1.01, "{bits}: {} vs {}", s.energy.total, g.energy);
            assert!((s.bcd_energy - s.closed_form_energy).abs() <= 0.01 * s.closed_form_energy);
        }
    }

    #[test]
    fn master_reserve_is_enforced() {
        let err = solve_p2_master(&master(), 8e6, 1.0, 0.01).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn task_energy_is_midpoint_convex(
            gain_exp in -10.0..-5.0f64,
            speed in 1e8..8e8f64,
            a in 0.0..4e6f64,
            b in 0.0..4e6f64,
        ) {
            let mut p = slave();
            p.gain = 10f64.powf(gain_exp);
            p.cpu_speed = speed;
            let c = SlaveCost::new(&p, &budget());
            let mid = c.energy(0.5 * (a + b));
            let avg = 0.5 * (c.energy(a) + c.energy(b));
            prop_assert!(mid <= avg * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn interior_pairs_balance(
            es in 1.8e-8..2.2e-8f64,
            gain_exp in -8.0..-6.0f64,
            bits in 1e6..5e6f64,
        ) {
            let mut s = pair();
            s[1].sense_energy_per_bit = es;
            s[1].gain = 10f64.powf(gain_exp);
            let sol = solve_p3(&s, &[3.0, 3.0], bits, &budget(), &OpOptions::default()).unwrap();
            let spread = (sol.energies[0].total - sol.energies[1].total).abs();
            prop_assert!(spread <= 1e-3 * sol.e_star, "{spread}");
            prop_assert!(sol.dual_value <= sol.e_star * (1.0 + 1e-12));
        }
    }
}
