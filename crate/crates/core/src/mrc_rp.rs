//! The robust scheme.
//!
//! Sensing is assigned by an LP weighted with remaining battery energy, under
//! the constraint that every slave could still compute its whole share
//! locally. Offloading then follows a threshold policy: the priority
//! indicator `O` compares the marginal cost of transmitting against computing,
//! and the time multiplier `phi` on the offload window decides between the
//! mandatory minimum, a window-clamped split and full offload.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, check_positive, Error, Result};
use crate::model::{f_power_slope, MasterParams, OffloadLink, SensingPlan, SlaveParams};
use crate::numerics::{bisect, lambert_w0_shifted, solve_lp, BracketedRoot, LpProblem, LpRow, Relation};

/// Which branch of the threshold policy produced a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffloadCase {
    NoOffload,
    MandatoryMinimum,
    FullOffload,
    WindowClamped,
}

impl OffloadCase {
    pub fn as_str(self) -> &'static str {
        match self {
            OffloadCase::NoOffload => "no-offload",
            OffloadCase::MandatoryMinimum => "mandatory-minimum",
            OffloadCase::FullOffload => "full-offload",
            OffloadCase::WindowClamped => "window-clamped",
        }
    }
}

impl std::fmt::Display for OffloadCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Offloading decision of one robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpDecision {
    pub offload_bits: f64,
    pub offload_time: f64,
    /// Multiplier of the offload-window constraint.
    pub phi: f64,
    pub case: OffloadCase,
}

impl RpDecision {
    pub fn zero() -> Self {
        Self { offload_bits: 0.0, offload_time: 0.0, phi: 0.0, case: OffloadCase::NoOffload }
    }
}

/// Per-link threshold quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdProfile {
    pub priority: f64,
    pub gamma: f64,
    /// `B log2 O` for `O > 1`, else 0.
    pub ratio_unconstrained: f64,
    /// Balanced ratio at zero window multiplier; 0 without circuit power.
    pub free_ratio: f64,
}

impl ThresholdProfile {
    pub fn of(link: &OffloadLink) -> Self {
        let priority = priority_indicator(
            link.bandwidth,
            link.gain,
            link.cycles_per_bit,
            link.energy_per_cycle,
            link.noise,
        );
        let gamma = threshold_gamma(priority, link.noise, link.gain);
        let ratio_unconstrained = if priority > 1.0 { link.bandwidth * priority.log2() } else { 0.0 };
        let free_ratio = offload_ratio(link.circuit_power, link.bandwidth, link.noise, link.gain);
        Self { priority, gamma, ratio_unconstrained, free_ratio }
    }
}

/// `beta_k = min(E_Re) / E_Re_k`.
pub fn fairness_weights(reserves: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = reserves.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::InvalidState(format!("remaining energy must be positive, got {bad}")));
    }
    let min = reserves.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(reserves.iter().map(|r| min / r).collect())
}

/// Remaining-energy-weighted sensing LP.
///
/// Minimizes `sum beta_k E_s,k` such that the slaves collect `total_bits`
/// within the sensing window and each slave's reserve covers its sensing plus
/// computing its whole share locally.
pub fn solve_p4(
    slaves: &[SlaveParams],
    reserves: &[f64],
    beta: &[f64],
    total_bits: f64,
    sensing_window: f64,
) -> Result<SensingPlan> {
    let k = slaves.len();
    if reserves.len() != k || beta.len() != k {
        return Err(Error::InvalidParameter { name: "solve_p4", reason: "length mismatch".into() });
    }
    check_nonnegative("total_bits", total_bits)?;
    check_positive("sensing_window", sensing_window)?;
    if total_bits == 0.0 {
        return Ok(SensingPlan::zeros(k));
    }
    // variables: sensing time per slave
    let rate: Vec<f64> = slaves.iter().map(|s| s.sensing_power / s.sense_energy_per_bit).collect();
    let objective = slaves
        .iter()
        .zip(beta)
        .map(|(s, b)| b * (s.sensing_power + s.circuit_power))
        .collect();
    let mut lp = LpProblem::new(objective)
        .with_row(LpRow::new(rate.clone(), Relation::Ge, total_bits))
        .with_bounds(vec![0.0; k], vec![sensing_window; k]);
    for (i, s) in slaves.iter().enumerate() {
        // reserve >= sensing energy + full local compute of the collected bits
        let mut coeffs = vec![0.0; k];
        coeffs[i] = s.sensing_power + s.circuit_power + rate[i] * s.cycles_per_bit * s.energy_per_cycle;
        lp.rows.push(LpRow::new(coeffs, Relation::Le, reserves[i].max(0.0)));
    }
    let times = solve_sensing_lp(lp).map_err(|e| match e {
        Error::Infeasible(_) => Error::Infeasible(format!(
            "slaves cannot collect {total_bits} bits while keeping enough energy to compute them locally"
        )),
        other => other,
    })?;
    Ok(plan_from_times(slaves, times, total_bits))
}

/// Solves a sensing LP with ties broken towards the lowest-index slave.
pub(crate) fn solve_sensing_lp(mut lp: LpProblem) -> Result<Vec<f64>> {
    // the LP minimizes x[0] first among optimal vertices; reversing the columns
    // makes it push later slaves down, so earlier ones take the load
    lp.objective.reverse();
    lp.lower.reverse();
    lp.upper.reverse();
    for row in &mut lp.rows {
        row.coeffs.reverse();
    }
    let mut x = solve_lp(&lp)?.x;
    x.reverse();
    Ok(x)
}

/// Turns LP sensing times into a plan whose bits sum to the demand exactly.
pub(crate) fn plan_from_times(slaves: &[SlaveParams], times: Vec<f64>, total_bits: f64) -> SensingPlan {
    let mut bits: Vec<f64> = slaves
        .iter()
        .zip(&times)
        .map(|(s, t)| s.sensing_power * t / s.sense_energy_per_bit)
        .map(|b| if b < total_bits * 1e-12 { 0.0 } else { b })
        .collect();
    // LP round-off leaves a relative error of ~1e-12; the largest contributor absorbs it
    let diff = total_bits - bits.iter().sum::<f64>();
    if let Some(i) = (0..bits.len()).max_by(|&a, &b| bits[a].total_cmp(&bits[b])) {
        bits[i] = (bits[i] + diff).max(0.0);
    }
    let sensing_time = slaves.iter().zip(&bits).map(|(s, b)| s.sensing_time(*b)).collect();
    SensingPlan { sensing_time, bits }
}

/// `O = B h C p_cmp / (N ln 2)`.
pub fn priority_indicator(bandwidth: f64, gain: f64, cycles_per_bit: f64, energy_per_cycle: f64, noise: f64) -> f64 {
    bandwidth * gain * cycles_per_bit * energy_per_cycle / (noise * LN_2)
}

/// `gamma = (N/h)(O ln O - O + 1)` for `O >= 1`, else 0.
pub fn threshold_gamma(priority: f64, noise: f64, gain: f64) -> f64 {
    if priority <= 1.0 {
        return 0.0;
    }
    let e = priority - 1.0;
    // (1 + e) ln(1 + e) - e; the series avoids cancellation near O = 1
    let v = if e < 0.1 {
        let mut term = -e;
        let mut sum = 0.0;
        for n in 2..40 {
            term *= -e;
            sum += term / (n * (n - 1)) as f64;
        }
        sum
    } else {
        priority * e.ln_1p() - e
    };
    noise / gain * v.max(0.0)
}

/// Transmission ratio `D_off / t_off` that balances a window multiplier `phi`:
/// `B [W0((h phi - N) / (N e)) + 1] / ln 2`.
pub fn offload_ratio(phi: f64, bandwidth: f64, noise: f64, gain: f64) -> f64 {
    if phi <= 0.0 {
        return 0.0;
    }
    let s = gain * phi / noise;
    bandwidth * (lambert_w0_shifted(s) + 1.0) / LN_2
}

/// `-g(r) / h`, the multiplier at which `r` is the balanced ratio.
/// Closed-form inverse of [`offload_ratio`].
pub fn multiplier_for_ratio(ratio: f64, bandwidth: f64, noise: f64, gain: f64) -> f64 {
    let u = ratio * LN_2 / bandwidth;
    let v = if u < 0.1 {
        let mut term = u;
        let mut sum = 0.0;
        for n in 2..20 {
            term *= u / n as f64;
            sum += (n - 1) as f64 * term;
        }
        sum
    } else {
        1.0 - u.exp() * (1.0 - u)
    };
    noise / gain * v
}

/// Optimal offload point `(D_off, t_off)` of one link, without the window
/// multiplier. Cheap enough for inner loops.
pub fn offload_point(link: &OffloadLink, profile: &ThresholdProfile, bits: f64, window: f64) -> (f64, f64) {
    if bits <= 0.0 {
        return (0.0, 0.0);
    }
    let floor = link.mandatory_offload(bits, window);
    let free_ratio = profile.free_ratio;
    let offload_bits = if free_ratio >= profile.ratio_unconstrained {
        floor
    } else {
        (profile.ratio_unconstrained * window).clamp(floor, bits)
    };
    if offload_bits <= 0.0 {
        return (0.0, 0.0);
    }
    if free_ratio > 0.0 && offload_bits / free_ratio <= window {
        (offload_bits, offload_bits / free_ratio)
    } else {
        (offload_bits, window)
    }
}

/// Threshold offloading policy for one link with `bits` to process in `window`.
pub fn solve_offload(link: &OffloadLink, bits: f64, window: f64) -> Result<RpDecision> {
    check_nonnegative("bits", bits)?;
    check_positive("window", window)?;
    if bits == 0.0 {
        return Ok(RpDecision::zero());
    }
    let profile = ThresholdProfile::of(link);
    let floor = link.mandatory_offload(bits, window);
    let (offload_bits, offload_time) = offload_point(link, &profile, bits, window);
    if offload_bits <= 0.0 {
        return Ok(RpDecision::zero());
    }
    let phi = if offload_time < window {
        0.0
    } else {
        window_multiplier(link, offload_bits / window, profile.gamma)?
    };
    let case = if offload_bits >= bits {
        OffloadCase::FullOffload
    } else if offload_bits <= floor {
        OffloadCase::MandatoryMinimum
    } else {
        OffloadCase::WindowClamped
    };
    Ok(RpDecision { offload_bits, offload_time, phi, case })
}

/// Bisects the window multiplier `phi` so that the balanced ratio at
/// `phi + p_c` equals `target_ratio`.
fn window_multiplier(link: &OffloadLink, target_ratio: f64, gamma: f64) -> Result<f64> {
    let ratio_at = |phi: f64| offload_ratio(phi + link.circuit_power, link.bandwidth, link.noise, link.gain);
    if ratio_at(0.0) >= target_ratio {
        return Ok(0.0);
    }
    let mut hi = if gamma > 0.0 { gamma } else { link.noise / link.gain };
    let mut doublings = 0;
    while ratio_at(hi) < target_ratio {
        hi *= 2.0;
        doublings += 1;
        if doublings > 2000 || !hi.is_finite() {
            return Err(Error::Infeasible(format!(
                "no finite transmit power reaches {target_ratio} bits/s"
            )));
        }
    }
    // bisect on ln(phi) so tiny multipliers keep full relative precision
    let top = hi.ln();
    let bottom = top - 700.0;
    if ratio_at(bottom.exp()) >= target_ratio {
        return Ok(0.0);
    }
    let bracket = BracketedRoot::new(bottom, top).with_tol(1e-15 * top.abs().max(1.0));
    Ok(bisect(|y| ratio_at(y.exp()) - target_ratio, bracket)?.exp())
}

/// Threshold policy for one slave.
pub fn solve_p5_per_slave(params: &SlaveParams, bits: f64, window: f64) -> Result<RpDecision> {
    solve_offload(&params.link(), bits, window).map_err(|e| match e {
        Error::Infeasible(msg) => Error::Infeasible(format!("SR{}: {msg}", params.id)),
        other => other,
    })
}

/// Threshold policy for every slave; the problem separates across slaves.
pub fn solve_p5(slaves: &[SlaveParams], bits: &[f64], window: f64) -> Result<Vec<RpDecision>> {
    if slaves.len() != bits.len() {
        return Err(Error::InvalidParameter { name: "solve_p5", reason: "length mismatch".into() });
    }
    slaves.iter().zip(bits).map(|(s, b)| solve_p5_per_slave(s, *b, window)).collect()
}

/// Threshold policy applied to the master's link to the base station.
pub fn solve_master_rp(master: &MasterParams, bits: f64, window: f64) -> Result<RpDecision> {
    solve_offload(&master.link(), bits, window).map_err(|e| match e {
        Error::Infeasible(msg) => Error::Infeasible(format!("MR: {msg}")),
        other => other,
    })
}

/// Normalized KKT residuals of an offloading decision.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    /// Stationarity in the offloaded bits.
    pub offload: f64,
    /// Stationarity in the offload time.
    pub time: f64,
    pub primal: f64,
    pub complementary: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.offload.max(self.time).max(self.primal).max(self.complementary)
    }
}

/// Checks an offloading decision against the optimality conditions of the
/// per-link problem `min (D - x) C p + (t/h) f(x/t) + p_c t`.
pub fn kkt_residuals(link: &OffloadLink, bits: f64, window: f64, d: &RpDecision) -> KktResiduals {
    let floor = link.mandatory_offload(bits, window);
    let scale_bits = bits.max(1.0);
    let primal = [
        (d.offload_time - window).max(0.0) / window,
        (-d.offload_time).max(0.0) / window,
        (floor - d.offload_bits).max(0.0) / scale_bits,
        (d.offload_bits - bits).max(0.0) / scale_bits,
        (-d.phi).max(0.0),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    if bits == 0.0 {
        return KktResiduals { primal, ..Default::default() };
    }
    let free_ratio = offload_ratio(link.circuit_power, link.bandwidth, link.noise, link.gain);
    let ratio = if d.offload_time > 0.0 { d.offload_bits / d.offload_time } else { free_ratio };
    let unit = link.local_cost_per_bit();
    let marginal = f_power_slope(ratio, link.bandwidth, link.noise) / link.gain / unit - 1.0;
    let tol = 1e-12 * scale_bits;
    let at_floor = d.offload_bits <= floor + tol;
    let at_full = d.offload_bits >= bits - tol;
    let offload = match (at_floor, at_full) {
        (true, true) => 0.0,
        (true, false) => (-marginal).max(0.0),
        (false, true) => marginal.max(0.0),
        (false, false) => marginal.abs(),
    };
    let g_over_h = -multiplier_for_ratio(ratio, link.bandwidth, link.noise, link.gain);
    let sum = g_over_h + link.circuit_power + d.phi;
    let scale = g_over_h.abs() + link.circuit_power + d.phi + link.noise / link.gain;
    let time = if d.offload_time > 0.0 { sum.abs() / scale } else { (-sum).max(0.0) / scale };
    let complementary = d.phi / (d.phi + link.circuit_power + link.noise / link.gain)
        * ((window - d.offload_time).abs() / window);
    KktResiduals { offload, time, primal, complementary }
}
