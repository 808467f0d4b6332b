//! Brute-force grid references for the offloading and min-max problems.
//!
//! Every returned point is feasible, so oracle values are upper bounds on the
//! true optimum. Each search runs a coarse grid and then a second grid of the
//! same resolution over the cells next to the coarse winner.

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::model::{OffloadLink, SlaveParams, TimeBudget};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub offload_bits: f64,
    pub offload_time: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinmaxPoint {
    pub sensing_time: Vec<f64>,
    pub bits: Vec<f64>,
    pub offload: Vec<GridPoint>,
    /// Per-slave task energy.
    pub energies: Vec<f64>,
    pub max_energy: f64,
}

fn axis(lo: f64, hi: f64, res: usize, i: usize) -> f64 {
    if i == res {
        hi
    } else {
        lo + (hi - lo) * i as f64 / res as f64
    }
}

fn scan_p5(link: &OffloadLink, bits: f64, x: (f64, f64), t: (f64, f64), res: usize, exec: Execution) -> (usize, usize, GridPoint) {
    let rows = map_indices(res + 1, exec, |i| {
        let xi = axis(x.0, x.1, res, i);
        let mut best = (0, GridPoint { offload_bits: xi, offload_time: 0.0, energy: f64::INFINITY });
        for j in 0..=res {
            let tj = axis(t.0, t.1, res, j);
            if tj <= 0.0 && xi > 0.0 {
                continue;
            }
            let e = link.stage_energy(bits, xi, tj).unwrap_or(f64::INFINITY);
            if e < best.1.energy {
                best = (j, GridPoint { offload_bits: xi, offload_time: tj, energy: e });
            }
        }
        best
    });
    let mut winner = (0, 0, GridPoint { offload_bits: 0.0, offload_time: 0.0, energy: f64::INFINITY });
    for (i, (j, p)) in rows.into_iter().enumerate() {
        if p.energy < winner.2.energy {
            winner = (i, j, p);
        }
    }
    winner
}

/// Exhaustive search over `D_off in [max(G,0), D]` and `t_off in (0, window]`.
pub fn grid_search_p5(link: &OffloadLink, bits: f64, window: f64, resolution: usize) -> Result<GridPoint> {
    grid_search_p5_with(link, bits, window, resolution, Execution::default())
}

pub fn grid_search_p5_with(
    link: &OffloadLink,
    bits: f64,
    window: f64,
    resolution: usize,
    exec: Execution,
) -> Result<GridPoint> {
    if resolution < 2 {
        return Err(Error::InvalidParameter { name: "resolution", reason: "need at least 2 points per axis".into() });
    }
    if bits <= 0.0 {
        return Ok(GridPoint { offload_bits: 0.0, offload_time: 0.0, energy: 0.0 });
    }
    let floor = link.mandatory_offload(bits, window);
    let x = (floor, bits);
    let t = (0.0, window);
    let (i, j, coarse) = scan_p5(link, bits, x, t, resolution, exec);
    let zoom = |range: (f64, f64), k: usize| {
        let step = (range.1 - range.0) / resolution as f64;
        ((range.0 + step * (k as f64 - 1.0)).max(range.0), (range.0 + step * (k as f64 + 1.0)).min(range.1))
    };
    let (_, _, fine) = scan_p5(link, bits, zoom(x, i), zoom(t, j), resolution, exec);
    Ok(if fine.energy < coarse.energy { fine } else { coarse })
}

/// Energy of one slave collecting `bits`, with the offloading stage solved
/// on a grid. `None` when the bits do not fit the sensing window.
fn slave_cost(p: &SlaveParams, bits: f64, budget: &TimeBudget, inner: usize, exec: Execution) -> Option<(f64, GridPoint)> {
    let ts = p.sensing_time(bits);
    if ts > budget.sensing * (1.0 + 1e-12) {
        return None;
    }
    let g = grid_search_p5_with(&p.link(), bits, budget.slave_window, inner, exec).ok()?;
    let sensing = (p.sensing_power + p.circuit_power) * ts;
    Some((ts, GridPoint { energy: sensing + g.energy, ..g }))
}

/// Exhaustive min-max search for one or two slaves.
///
/// The outer grid runs over the first slave's sensing time; the second slave
/// senses the remaining bits. Points that exceed a reserve are skipped.
pub fn grid_search_minmax(
    slaves: &[SlaveParams],
    reserves: &[f64],
    total_bits: f64,
    budget: &TimeBudget,
    outer: usize,
    inner: usize,
) -> Result<MinmaxPoint> {
    grid_search_minmax_with(slaves, reserves, total_bits, budget, outer, inner, Execution::default())
}

pub fn grid_search_minmax_with(
    slaves: &[SlaveParams],
    reserves: &[f64],
    total_bits: f64,
    budget: &TimeBudget,
    outer: usize,
    inner: usize,
    exec: Execution,
) -> Result<MinmaxPoint> {
    if slaves.is_empty() || slaves.len() > 2 || reserves.len() != slaves.len() {
        return Err(Error::InvalidParameter { name: "grid_search_minmax", reason: "needs one or two slaves with reserves".into() });
    }
    if outer < 2 {
        return Err(Error::InvalidParameter { name: "resolution", reason: "need at least 2 points per axis".into() });
    }
    let evaluate = |split: &[f64]| -> Option<MinmaxPoint> {
        let mut point = MinmaxPoint {
            sensing_time: vec![],
            bits: vec![],
            offload: vec![],
            energies: vec![],
            max_energy: 0.0,
        };
        for ((p, r), bits) in slaves.iter().zip(reserves).zip(split) {
            // inner grids run sequentially; parallelism sits on the outer axis
            let (ts, g) = slave_cost(p, *bits, budget, inner, Execution::Sequential)?;
            if g.energy > *r {
                return None;
            }
            point.sensing_time.push(ts);
            point.bits.push(*bits);
            point.energies.push(g.energy);
            point.max_energy = point.max_energy.max(g.energy);
            point.offload.push(GridPoint { energy: g.energy - (p.sensing_power + p.circuit_power) * ts, ..g });
        }
        Some(point)
    };
    let infeasible = || Error::Infeasible(format!("no grid point collects {total_bits} bits within the reserves"));
    if slaves.len() == 1 {
        return evaluate(&[total_bits]).ok_or_else(infeasible);
    }
    let first = &slaves[0];
    let cap = first.sensing_capacity(budget.sensing).min(total_bits);
    let scan = |lo: f64, hi: f64| {
        let points = map_indices(outer + 1, exec, |i| {
            let d1 = axis(lo, hi, outer, i);
            evaluate(&[d1, (total_bits - d1).max(0.0)])
        });
        let mut best: Option<(usize, MinmaxPoint)> = None;
        for (i, p) in points.into_iter().enumerate() {
            if let Some(p) = p {
                if best.as_ref().is_none_or(|(_, b)| p.max_energy < b.max_energy) {
                    best = Some((i, p));
                }
            }
        }
        best
    };
    let (i, coarse) = scan(0.0, cap).ok_or_else(infeasible)?;
    let step = cap / outer as f64;
    let lo = (step * (i as f64 - 1.0)).max(0.0);
    let hi = (step * (i as f64 + 1.0)).min(cap);
    Ok(match scan(lo, hi) {
        Some((_, fine)) if fine.max_energy < coarse.max_energy => fine,
        _ => coarse,
    })
}
