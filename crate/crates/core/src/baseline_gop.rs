//! Greedy offloading baseline.
//!
//! Every slave pushes as many bits as its offload window allows at the
//! transmission ratio `B log2 O`, and computes the rest locally. When
//! offloading is not favorable (`O <= 1`) only the mandatory minimum leaves
//! the robot.

use crate::error::{check_positive, Error, Result};
use crate::model::SlaveParams;
use crate::mrc_rp::{solve_p5_per_slave, OffloadCase, RpDecision, ThresholdProfile};

/// Greedy decision for one slave.
pub fn solve_gop_per_slave(params: &SlaveParams, bits: f64, window: f64) -> Result<RpDecision> {
    check_positive("window", window)?;
    if bits <= 0.0 {
        return Ok(RpDecision::zero());
    }
    let link = params.link();
    let profile = ThresholdProfile::of(&link);
    if profile.priority <= 1.0 {
        return solve_p5_per_slave(params, bits, window);
    }
    let ratio = profile.ratio_unconstrained;
    let floor = link.mandatory_offload(bits, window);
    if bits / ratio <= window {
        return Ok(RpDecision {
            offload_bits: bits,
            offload_time: bits / ratio,
            phi: 0.0,
            case: OffloadCase::FullOffload,
        });
    }
    let offload_bits = (ratio * window).max(floor);
    let case = if offload_bits <= floor { OffloadCase::MandatoryMinimum } else { OffloadCase::WindowClamped };
    Ok(RpDecision { offload_bits, offload_time: window, phi: 0.0, case })
}

/// Greedy decisions for every slave.
pub fn solve_gop(slaves: &[SlaveParams], bits: &[f64], window: f64) -> Result<Vec<RpDecision>> {
    if slaves.len() != bits.len() {
        return Err(Error::InvalidParameter { name: "solve_gop", reason: "length mismatch".into() });
    }
    slaves.iter().zip(bits).map(|(s, b)| solve_gop_per_slave(s, *b, window)).collect()
}
