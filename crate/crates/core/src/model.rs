//! Domain types and the closed-form physical model: data collection, local
//! computation, Shannon-rate transmission and per-robot energy accounting.
//!
//! Everything is in SI units: bits, seconds, watts, joules, hertz and linear
//! (not dB) channel gains.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, check_positive, Error, Result};

/// Static physical constants of one slave robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaveParams {
    pub id: usize,
    /// Energy to sense one bit (J/bit).
    pub sense_energy_per_bit: f64,
    /// Sensing power (W).
    pub sensing_power: f64,
    /// CPU cycles needed per bit (cycles/bit).
    pub cycles_per_bit: f64,
    /// CPU speed (cycles/s).
    pub cpu_speed: f64,
    /// Energy per CPU cycle (J/cycle).
    pub energy_per_cycle: f64,
    /// Circuit power drawn while sensing or transmitting (W).
    pub circuit_power: f64,
    /// Uplink bandwidth to the master (Hz).
    pub bandwidth: f64,
    /// Noise power (W).
    pub noise: f64,
    /// Mean channel gain to the master (linear).
    pub gain: f64,
    /// Battery energy at episode start (J).
    pub initial_energy: f64,
}

impl SlaveParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("sense_energy_per_bit", self.sense_energy_per_bit)?;
        check_positive("sensing_power", self.sensing_power)?;
        check_positive("cycles_per_bit", self.cycles_per_bit)?;
        check_positive("cpu_speed", self.cpu_speed)?;
        check_positive("energy_per_cycle", self.energy_per_cycle)?;
        check_nonnegative("circuit_power", self.circuit_power)?;
        check_positive("bandwidth", self.bandwidth)?;
        check_positive("noise", self.noise)?;
        check_positive("gain", self.gain)?;
        if self.gain > 1.0 {
            return Err(Error::InvalidParameter {
                name: "gain",
                reason: format!("linear channel gain must not exceed 1, got {}", self.gain),
            });
        }
        check_positive("initial_energy", self.initial_energy)
    }

    /// Bits this robot collects when sensing for the whole window `t_sense`.
    pub fn sensing_capacity(&self, t_sense: f64) -> f64 {
        self.sensing_power * t_sense / self.sense_energy_per_bit
    }

    /// Sensing time needed to collect `bits`.
    pub fn sensing_time(&self, bits: f64) -> f64 {
        bits * self.sense_energy_per_bit / self.sensing_power
    }

    /// Energy of the sensing stage (sensing plus circuit) per collected bit.
    pub fn sensing_cost_per_bit(&self) -> f64 {
        self.sense_energy_per_bit * (1.0 + self.circuit_power / self.sensing_power)
    }

    pub fn link(&self) -> OffloadLink {
        OffloadLink {
            bandwidth: self.bandwidth,
            noise: self.noise,
            gain: self.gain,
            cycles_per_bit: self.cycles_per_bit,
            energy_per_cycle: self.energy_per_cycle,
            cpu_speed: self.cpu_speed,
            circuit_power: self.circuit_power,
        }
    }
}

/// Static physical constants of the master robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterParams {
    pub cycles_per_bit: f64,
    pub cpu_speed: f64,
    pub energy_per_cycle: f64,
    pub circuit_power: f64,
    /// Bandwidth to the base station (Hz).
    pub bandwidth: f64,
    pub noise: f64,
    /// Mean channel gain to the base station (linear).
    pub gain: f64,
    pub initial_energy: f64,
}

impl MasterParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("master.cycles_per_bit", self.cycles_per_bit)?;
        check_positive("master.cpu_speed", self.cpu_speed)?;
        check_positive("master.energy_per_cycle", self.energy_per_cycle)?;
        check_nonnegative("master.circuit_power", self.circuit_power)?;
        check_positive("master.bandwidth", self.bandwidth)?;
        check_positive("master.noise", self.noise)?;
        check_positive("master.gain", self.gain)?;
        check_positive("master.initial_energy", self.initial_energy)
    }

    pub fn link(&self) -> OffloadLink {
        OffloadLink {
            bandwidth: self.bandwidth,
            noise: self.noise,
            gain: self.gain,
            cycles_per_bit: self.cycles_per_bit,
            energy_per_cycle: self.energy_per_cycle,
            cpu_speed: self.cpu_speed,
            circuit_power: self.circuit_power,
        }
    }
}

/// Durations of the three stages of a task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBudget {
    /// Sensing window (s).
    pub sensing: f64,
    /// Slave compute/offload window (s).
    pub slave_window: f64,
    /// Master compute/offload window (s).
    pub master_window: f64,
}

impl TimeBudget {
    pub fn validate(&self) -> Result<()> {
        check_positive("time_budget.sensing", self.sensing)?;
        check_positive("time_budget.slave_window", self.slave_window)?;
        check_positive("time_budget.master_window", self.master_window)
    }
}

/// One offloading hop: a robot that either computes bits itself or pushes
/// them over a Shannon-rate link. Shared by the slave and master stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffloadLink {
    pub bandwidth: f64,
    pub noise: f64,
    pub gain: f64,
    pub cycles_per_bit: f64,
    pub energy_per_cycle: f64,
    pub cpu_speed: f64,
    pub circuit_power: f64,
}

impl OffloadLink {
    /// Energy to compute one bit locally (J/bit).
    pub fn local_cost_per_bit(&self) -> f64 {
        self.cycles_per_bit * self.energy_per_cycle
    }

    /// Bits the CPU finishes within `window`.
    pub fn local_capacity(&self, window: f64) -> f64 {
        self.cpu_speed * window / self.cycles_per_bit
    }

    /// Smallest admissible offload, `max(G, 0)`.
    pub fn mandatory_offload(&self, bits: f64, window: f64) -> f64 {
        (bits - self.local_capacity(window)).max(0.0)
    }

    /// Local compute + transmission + transmit-circuit energy of the offloading stage.
    pub fn stage_energy(&self, bits: f64, offload_bits: f64, offload_time: f64) -> Result<f64> {
        let compute = (bits - offload_bits) * self.local_cost_per_bit();
        let transmit =
            transmit_energy(offload_bits, offload_time, self.gain, self.bandwidth, self.noise)?;
        let circuit = if offload_bits > 0.0 {
            self.circuit_power * offload_time
        } else {
            0.0
        };
        Ok(compute + transmit + circuit)
    }
}

/// Decision for one slave robot within a task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SlaveAllocation {
    pub sensing_time: f64,
    pub bits: f64,
    pub offload_bits: f64,
    pub offload_time: f64,
}

/// Decision for the master robot within a task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MasterAllocation {
    pub bits: f64,
    pub offload_bits: f64,
    pub offload_time: f64,
}

/// Full per-task decision vector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub slaves: Vec<SlaveAllocation>,
    pub master: MasterAllocation,
}

impl Allocation {
    /// Checks the box and coupling constraints of a task decision.
    pub fn check(&self, slaves: &[SlaveParams], master: &MasterParams, budget: &TimeBudget) -> Result<()> {
        const TOL: f64 = 1e-9;
        let viol = |what: String| Err(Error::InvariantViolation(what));
        if slaves.len() != self.slaves.len() {
            return viol("allocation length does not match robot count".into());
        }
        let mut offloaded = 0.0;
        for (p, a) in slaves.iter().zip(&self.slaves) {
            if a.sensing_time < -TOL || a.sensing_time > budget.sensing * (1.0 + TOL) {
                return viol(format!("SR{} sensing time {} outside window", p.id, a.sensing_time));
            }
            if a.offload_time < -TOL || a.offload_time > budget.slave_window * (1.0 + TOL) {
                return viol(format!("SR{} offload time {} outside window", p.id, a.offload_time));
            }
            let floor = p.link().mandatory_offload(a.bits, budget.slave_window);
            let scale = a.bits.max(1.0);
            if a.offload_bits < floor - TOL * scale || a.offload_bits > a.bits + TOL * scale {
                return viol(format!("SR{} offload {} outside [{floor}, {}]", p.id, a.offload_bits, a.bits));
            }
            offloaded += a.offload_bits;
        }
        let m = &self.master;
        if (m.bits - offloaded).abs() > TOL * offloaded.max(1.0) {
            return viol(format!("master receives {} bits but slaves offload {offloaded}", m.bits));
        }
        let floor = master.link().mandatory_offload(m.bits, budget.master_window);
        let scale = m.bits.max(1.0);
        if m.offload_bits < floor - TOL * scale || m.offload_bits > m.bits + TOL * scale {
            return viol(format!("master offload {} outside [{floor}, {}]", m.offload_bits, m.bits));
        }
        if m.offload_time < -TOL || m.offload_time > budget.master_window * (1.0 + TOL) {
            return viol(format!("master offload time {} outside window", m.offload_time));
        }
        Ok(())
    }
}

/// Sensing-stage decision: time spent sensing and bits collected per slave.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SensingPlan {
    pub sensing_time: Vec<f64>,
    pub bits: Vec<f64>,
}

impl SensingPlan {
    pub fn zeros(n: usize) -> Self {
        Self { sensing_time: vec![0.0; n], bits: vec![0.0; n] }
    }

    pub fn total_bits(&self) -> f64 {
        self.bits.iter().sum()
    }
}

/// Per-robot energy spent on one task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub sensing: f64,
    pub compute: f64,
    pub transmit: f64,
    pub circuit: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(sensing: f64, compute: f64, transmit: f64, circuit: f64) -> Self {
        Self {
            sensing,
            compute,
            transmit,
            circuit,
            total: sensing + compute + transmit + circuit,
        }
    }
}

/// Bits collected by sensing at power `p_s` for `t_s` seconds.
pub fn sensed_bits(sensing_power: f64, sensing_time: f64, energy_per_bit: f64) -> Result<f64> {
    check_positive("sensing_power", sensing_power)?;
    check_positive("sense_energy_per_bit", energy_per_bit)?;
    check_nonnegative("sensing_time", sensing_time)?;
    Ok(sensing_power * sensing_time / energy_per_bit)
}

/// Raw minimum offload `D - U*T/C`. Negative when local compute has spare room.
pub fn min_offload(bits: f64, cpu_speed: f64, cycles_per_bit: f64, window: f64) -> Result<f64> {
    check_positive("cpu_speed", cpu_speed)?;
    check_positive("cycles_per_bit", cycles_per_bit)?;
    check_positive("window", window)?;
    check_nonnegative("bits", bits)?;
    Ok(bits - cpu_speed * window / cycles_per_bit)
}

/// Shannon rate `B log2(1 + p h / N)` in bits/s.
pub fn tx_rate(bandwidth: f64, power: f64, gain: f64, noise: f64) -> f64 {
    bandwidth * (power * gain / noise).ln_1p() / std::f64::consts::LN_2
}

/// Received power needed to sustain rate `x`: `N (2^(x/B) - 1)`.
pub fn f_power(rate: f64, bandwidth: f64, noise: f64) -> f64 {
    noise * (rate / bandwidth * std::f64::consts::LN_2).exp_m1()
}

/// Derivative of [`f_power`] with respect to the rate.
pub fn f_power_slope(rate: f64, bandwidth: f64, noise: f64) -> f64 {
    noise * std::f64::consts::LN_2 / bandwidth * (rate / bandwidth * std::f64::consts::LN_2).exp()
}

/// Linear gain for a path loss of `15 + a log10(d)` dB.
pub fn path_gain(distance: f64, exponent: f64) -> Result<f64> {
    if !(distance >= 1.0) {
        return Err(Error::InvalidParameter {
            name: "distance",
            reason: format!("path-loss model needs d >= 1 m, got {distance}"),
        });
    }
    check_positive("path_loss_exponent", exponent)?;
    let loss_db = 15.0 + exponent * distance.log10();
    Ok(10f64.powf(-loss_db / 10.0))
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Energy to push `bits` in `time` seconds over a link with gain `gain`.
/// Zero bits cost nothing regardless of `time`.
pub fn transmit_energy(bits: f64, time: f64, gain: f64, bandwidth: f64, noise: f64) -> Result<f64> {
    if bits <= 0.0 {
        return Ok(0.0);
    }
    if time <= 0.0 {
        return Err(Error::DivisionByZero("offloading a positive amount in zero time"));
    }
    Ok(time / gain * f_power(bits / time, bandwidth, noise))
}

/// Energy of one slave robot for a task.
pub fn slave_energy(
    params: &SlaveParams,
    sensing_time: f64,
    bits: f64,
    offload_bits: f64,
    offload_time: f64,
) -> Result<EnergyBreakdown> {
    let sensing = params.sensing_power * sensing_time;
    let compute = (bits - offload_bits) * params.cycles_per_bit * params.energy_per_cycle;
    let transmit = transmit_energy(offload_bits, offload_time, params.gain, params.bandwidth, params.noise)?;
    let offload_time = if offload_bits > 0.0 { offload_time } else { 0.0 };
    let circuit = params.circuit_power * (sensing_time + offload_time);
    Ok(EnergyBreakdown::new(sensing, compute.max(0.0), transmit, circuit))
}

/// Energy of the master robot for a task.
pub fn master_energy(
    params: &MasterParams,
    bits: f64,
    offload_bits: f64,
    offload_time: f64,
) -> Result<EnergyBreakdown> {
    let compute = (bits - offload_bits) * params.cycles_per_bit * params.energy_per_cycle;
    let transmit = transmit_energy(offload_bits, offload_time, params.gain, params.bandwidth, params.noise)?;
    let offload_time = if offload_bits > 0.0 { offload_time } else { 0.0 };
    let circuit = params.circuit_power * offload_time;
    Ok(EnergyBreakdown::new(0.0, compute.max(0.0), transmit, circuit))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// A slave robot with the round numbers used throughout the unit tests.
    pub fn slave() -> SlaveParams {
        SlaveParams {
            id: 1,
            sense_energy_per_bit: 2e-8,
            sensing_power: 0.1,
            cycles_per_bit: 500.0,
            cpu_speed: 5e8,
            energy_per_cycle: 3e-9,
            circuit_power: 0.0,
            bandwidth: 1e7,
            noise: 1e-12,
            gain: 1e-6,
            initial_energy: 3.0,
        }
    }

    pub fn master() -> MasterParams {
        MasterParams {
            cycles_per_bit: 100.0,
            cpu_speed: 2.4e9,
            energy_per_cycle: 1e-8,
            circuit_power: 0.0,
            bandwidth: 1e7,
            noise: 1e-12,
            gain: 1e-6,
            initial_energy: 10.0,
        }
    }
}
