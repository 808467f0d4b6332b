//! Multi-task episodes with battery depletion.
//!
//! An episode draws each robot's hardware once from the scenario, then runs
//! tasks back to back: the chosen policy allocates the slave stage over the
//! robots that are still above the low-power threshold, the master handles
//! whatever was offloaded, and batteries are drained. The episode ends when
//! the task count is reached or a task cannot be scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baseline_gop::solve_gop;
use crate::error::{Error, Result};
use crate::model::{path_gain, slave_energy, EnergyBreakdown, MasterParams, SlaveParams, TimeBudget};
use crate::mrc_op::{solve_p2_master, solve_p3, OpOptions};
use crate::mrc_rp::{fairness_weights, solve_p4, solve_p5, RpDecision};

/// How a scalar parameter is chosen for each robot.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamSpec {
    Fixed(f64),
    /// Uniform on `[min, max]`.
    Range { min: f64, max: f64 },
    /// Uniform over a discrete set.
    Choices(Vec<f64>),
    /// One value per robot, in robot order.
    PerRobot(Vec<f64>),
}

impl ParamSpec {
    pub fn is_random(&self) -> bool {
        matches!(self, ParamSpec::Range { .. } | ParamSpec::Choices(_))
    }

    fn validate(&self, name: &str, robots: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("{name}: {msg}")));
        match self {
            ParamSpec::Fixed(v) if !v.is_finite() => bad(format!("value {v} is not finite")),
            ParamSpec::Range { min, max } if !(min.is_finite() && max.is_finite() && min <= max) => {
                bad(format!("range [{min}, {max}] is empty"))
            }
            ParamSpec::Choices(c) if c.is_empty() => bad("choice list is empty".into()),
            ParamSpec::PerRobot(v) if v.len() != robots => {
                bad(format!("{} per-robot values for {robots} robots", v.len()))
            }
            _ => Ok(()),
        }
    }

    fn draw(&self, robot: usize, rng: &mut Option<ChaCha8Rng>) -> f64 {
        match self {
            ParamSpec::Fixed(v) => *v,
            ParamSpec::PerRobot(v) => v[robot],
            ParamSpec::Range { min, max } => {
                let rng = rng.as_mut().expect("seed checked in validate");
                if min == max {
                    *min
                } else {
                    rng.gen_range(*min..=*max)
                }
            }
            ParamSpec::Choices(c) => {
                let rng = rng.as_mut().expect("seed checked in validate");
                c[rng.gen_range(0..c.len())]
            }
        }
    }
}

/// Channel gain: a direct value or the `15 + a log10(d)` dB path-loss model.
#[derive(Debug, Clone, PartialEq)]
pub enum GainSpec {
    Direct(ParamSpec),
    PathLoss { exponent: f64, distance: ParamSpec },
}

impl GainSpec {
    fn is_random(&self) -> bool {
        match self {
            GainSpec::Direct(p) => p.is_random(),
            GainSpec::PathLoss { distance, .. } => distance.is_random(),
        }
    }

    fn validate(&self, name: &str, robots: usize) -> Result<()> {
        match self {
            GainSpec::Direct(p) => p.validate(name, robots),
            GainSpec::PathLoss { exponent, distance } => {
                if !(*exponent > 0.0) {
                    return Err(Error::Config(format!("{name}: path-loss exponent must be positive")));
                }
                distance.validate(name, robots)
            }
        }
    }

    fn draw(&self, robot: usize, rng: &mut Option<ChaCha8Rng>) -> Result<f64> {
        match self {
            GainSpec::Direct(p) => Ok(p.draw(robot, rng)),
            GainSpec::PathLoss { exponent, distance } => path_gain(distance.draw(robot, rng), *exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlaveSpec {
    pub count: usize,
    pub sense_energy_per_bit: ParamSpec,
    pub sensing_power: ParamSpec,
    pub cycles_per_bit: ParamSpec,
    pub cpu_speed: ParamSpec,
    pub energy_per_cycle: ParamSpec,
    pub circuit_power: ParamSpec,
    pub bandwidth: ParamSpec,
    pub noise: ParamSpec,
    pub gain: GainSpec,
    pub initial_energy: ParamSpec,
}

impl SlaveSpec {
    fn params(&self) -> [(&'static str, &ParamSpec); 9] {
        [
            ("sense_energy_per_bit", &self.sense_energy_per_bit),
            ("sensing_power", &self.sensing_power),
            ("cycles_per_bit", &self.cycles_per_bit),
            ("cpu_speed", &self.cpu_speed),
            ("energy_per_cycle", &self.energy_per_cycle),
            ("circuit_power", &self.circuit_power),
            ("bandwidth", &self.bandwidth),
            ("noise", &self.noise),
            ("initial_energy", &self.initial_energy),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterSpec {
    pub cycles_per_bit: ParamSpec,
    pub cpu_speed: ParamSpec,
    pub energy_per_cycle: ParamSpec,
    pub circuit_power: ParamSpec,
    pub bandwidth: ParamSpec,
    pub noise: ParamSpec,
    pub gain: GainSpec,
    pub initial_energy: ParamSpec,
}

impl MasterSpec {
    fn params(&self) -> [(&'static str, &ParamSpec); 7] {
        [
            ("cycles_per_bit", &self.cycles_per_bit),
            ("cpu_speed", &self.cpu_speed),
            ("energy_per_cycle", &self.energy_per_cycle),
            ("circuit_power", &self.circuit_power),
            ("bandwidth", &self.bandwidth),
            ("noise", &self.noise),
            ("initial_energy", &self.initial_energy),
        ]
    }
}

/// Gain override for one robot from `task` (1-based) onward.
/// Robot 0 is the master, slaves are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelOverride {
    pub task: usize,
    pub robot: usize,
    pub gain: f64,
}

/// What happens when the master cannot afford its stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MasterExhaustion {
    #[default]
    EndEpisode,
    /// The master stops processing and the slaves keep running tasks.
    Continue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: Option<u64>,
    pub tasks: usize,
    pub task_bits: f64,
    pub threshold: f64,
    pub budget: TimeBudget,
    pub slaves: SlaveSpec,
    pub master: MasterSpec,
    pub channel_schedule: Vec<ChannelOverride>,
    pub master_exhaustion: MasterExhaustion,
}

/// Hardware drawn for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub slaves: Vec<SlaveParams>,
    pub master: MasterParams,
}

impl Scenario {
    pub fn is_random(&self) -> bool {
        self.slaves.params().iter().any(|(_, p)| p.is_random())
            || self.slaves.gain.is_random()
            || self.master.params().iter().any(|(_, p)| p.is_random())
            || self.master.gain.is_random()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.slaves.count;
        if k == 0 {
            return Err(Error::Config("scenario needs at least one slave robot".into()));
        }
        for (name, p) in self.slaves.params() {
            p.validate(&format!("slaves.{name}"), k)?;
        }
        self.slaves.gain.validate("slaves.gain", k)?;
        for (name, p) in self.master.params() {
            if matches!(p, ParamSpec::PerRobot(_)) {
                return Err(Error::Config(format!("master.{name}: per-robot values make no sense for the master")));
            }
            p.validate(&format!("master.{name}"), 1)?;
        }
        self.master.gain.validate("master.gain", 1)?;
        self.budget.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.task_bits >= 0.0 && self.task_bits.is_finite()) {
            return Err(Error::Config(format!("task_bits must be nonnegative, got {}", self.task_bits)));
        }
        if !(self.threshold >= 0.0 && self.threshold.is_finite()) {
            return Err(Error::Config(format!("threshold must be nonnegative, got {}", self.threshold)));
        }
        for o in &self.channel_schedule {
            if o.task == 0 || o.robot > k || !(o.gain > 0.0 && o.gain <= 1.0) {
                return Err(Error::Config(format!(
                    "channel override {}:{}:{} needs task >= 1, robot in 0..={k} and gain in (0, 1]",
                    o.task, o.robot, o.gain
                )));
            }
        }
        if self.is_random() && self.seed.is_none() {
            return Err(Error::Config("scenario has ranged parameters but no seed".into()));
        }
        Ok(())
    }

    /// Draws every robot's parameters. Robots are drawn in order, slaves
    /// first, each parameter in declaration order.
    pub fn realize(&self) -> Result<Realization> {
        self.validate()?;
        let mut rng = self.seed.map(ChaCha8Rng::seed_from_u64);
        let s = &self.slaves;
        let mut slaves = Vec::with_capacity(s.count);
        for k in 0..s.count {
            let p = SlaveParams {
                id: k + 1,
                sense_energy_per_bit: s.sense_energy_per_bit.draw(k, &mut rng),
                sensing_power: s.sensing_power.draw(k, &mut rng),
                cycles_per_bit: s.cycles_per_bit.draw(k, &mut rng),
                cpu_speed: s.cpu_speed.draw(k, &mut rng),
                energy_per_cycle: s.energy_per_cycle.draw(k, &mut rng),
                circuit_power: s.circuit_power.draw(k, &mut rng),
                bandwidth: s.bandwidth.draw(k, &mut rng),
                noise: s.noise.draw(k, &mut rng),
                gain: s.gain.draw(k, &mut rng)?,
                initial_energy: s.initial_energy.draw(k, &mut rng),
            };
            p.validate().map_err(|e| Error::Config(format!("SR{}: {e}", k + 1)))?;
            slaves.push(p);
        }
        let m = &self.master;
        let master = MasterParams {
            cycles_per_bit: m.cycles_per_bit.draw(0, &mut rng),
            cpu_speed: m.cpu_speed.draw(0, &mut rng),
            energy_per_cycle: m.energy_per_cycle.draw(0, &mut rng),
            circuit_power: m.circuit_power.draw(0, &mut rng),
            bandwidth: m.bandwidth.draw(0, &mut rng),
            noise: m.noise.draw(0, &mut rng),
            gain: m.gain.draw(0, &mut rng)?,
            initial_energy: m.initial_energy.draw(0, &mut rng),
        };
        master.validate().map_err(|e| Error::Config(format!("MR: {e}")))?;
        Ok(Realization { slaves, master })
    }

    /// Gain of `robot` (0 = master) during `task`, after schedule overrides.
    pub fn gain_at(&self, base: f64, robot: usize, task: usize) -> f64 {
        self.channel_schedule
            .iter()
            .filter(|o| o.robot == robot && o.task <= task)
            .max_by_key(|o| o.task)
            .map_or(base, |o| o.gain)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Op,
    Rp,
    Gop,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Op, Policy::Rp, Policy::Gop];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Op => "op",
            Policy::Rp => "rp",
            Policy::Gop => "gop",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "op" => Ok(Policy::Op),
            "rp" => Ok(Policy::Rp),
            "gop" => Ok(Policy::Gop),
            other => Err(Error::Config(format!("unknown policy `{other}` (expected op, rp or gop)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub reserves: Vec<f64>,
    pub master_reserve: f64,
    pub active: Vec<bool>,
    pub master_active: bool,
    /// Tasks completed so far.
    pub task: usize,
}

impl SystemState {
    pub fn initial(r: &Realization, threshold: f64) -> Self {
        let reserves: Vec<f64> = r.slaves.iter().map(|s| s.initial_energy).collect();
        let active = reserves.iter().map(|e| *e >= threshold).collect();
        Self {
            reserves,
            master_reserve: r.master.initial_energy,
            active,
            master_active: r.master.initial_energy >= threshold,
            task: 0,
        }
    }
}

/// Drains one task's energy from every robot and refreshes the activity flags.
pub fn apply_task(
    state: &SystemState,
    slaves: &[EnergyBreakdown],
    master: &EnergyBreakdown,
    threshold: f64,
) -> Result<SystemState> {
    if slaves.len() != state.reserves.len() {
        return Err(Error::InvalidParameter { name: "apply_task", reason: "one breakdown per slave expected".into() });
    }
    let mut next = state.clone();
    for (k, e) in slaves.iter().enumerate() {
        if e.total < 0.0 {
            return Err(Error::InvariantViolation(format!("SR{} has negative energy {}", k + 1, e.total)));
        }
        next.reserves[k] = state.reserves[k] - e.total;
        if next.reserves[k] < 0.0 {
            return Err(Error::InvariantViolation(format!("SR{} battery would drop to {}", k + 1, next.reserves[k])));
        }
        next.active[k] = state.active[k] && next.reserves[k] >= threshold;
    }
    if master.total < 0.0 {
        return Err(Error::InvariantViolation(format!("MR has negative energy {}", master.total)));
    }
    next.master_reserve = state.master_reserve - master.total;
    if next.master_reserve < 0.0 {
        return Err(Error::InvariantViolation(format!("MR battery would drop to {}", next.master_reserve)));
    }
    next.master_active = state.master_active && next.master_reserve >= threshold;
    next.task = state.task + 1;
    Ok(next)
}

/// One robot during one task. Robot 0 is the master.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub task: usize,
    pub robot_id: usize,
    pub active: bool,
    pub t_s: f64,
    #[serde(rename = "D")]
    pub bits: f64,
    #[serde(rename = "D_off")]
    pub offload_bits: f64,
    pub t_off: f64,
    #[serde(rename = "E_s")]
    pub e_sensing: f64,
    #[serde(rename = "E_cmp")]
    pub e_compute: f64,
    #[serde(rename = "E_tr")]
    pub e_transmit: f64,
    #[serde(rename = "E_circ")]
    pub e_circuit: f64,
    #[serde(rename = "E_tot")]
    pub e_total: f64,
    #[serde(rename = "E_remaining")]
    pub e_remaining: f64,
    pub case_tag: String,
    pub dual_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    /// The policy found no allocation for `task`.
    Infeasible { task: usize, reason: String },
    NoActiveSlaves { task: usize },
    MasterExhausted { task: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub policy: Policy,
    pub seed: Option<u64>,
    pub realization: Realization,
    pub rows: Vec<TraceRow>,
    pub tasks_completed: usize,
    pub termination: Termination,
    /// Task after which each slave fell below the threshold; 0 when it
    /// started below it.
    pub first_deactivation: Vec<Option<usize>>,
    pub master_deactivation: Option<usize>,
    /// Summed energy of all robots, per completed task.
    pub system_energy: Vec<f64>,
    /// Summed slave energy per completed task.
    pub slave_energy: Vec<f64>,
    pub final_state: SystemState,
}

impl EpisodeTrace {
    /// Total energy each slave spent over the episode.
    pub fn slave_totals(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.realization.slaves.len()];
        for r in self.rows.iter().filter(|r| r.robot_id > 0) {
            t[r.robot_id - 1] += r.e_total;
        }
        t
    }

    pub fn master_total(&self) -> f64 {
        self.rows.iter().filter(|r| r.robot_id == 0).fold(0.0, |acc, r| acc + r.e_total)
    }

    /// Rows of one robot in task order.
    pub fn robot_rows(&self, robot: usize) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(move |r| r.robot_id == robot)
    }
}

struct SlaveStage {
    times: Vec<f64>,
    bits: Vec<f64>,
    decisions: Vec<RpDecision>,
    gap: Option<f64>,
}

fn slave_stage(
    policy: Policy,
    params: &[SlaveParams],
    reserves: &[f64],
    scenario: &Scenario,
    opts: &OpOptions,
) -> Result<SlaveStage> {
    let budget = &scenario.budget;
    let d = scenario.task_bits;
    match policy {
        Policy::Op => {
            let s = solve_p3(params, reserves, d, budget, opts)?;
            Ok(SlaveStage {
                gap: Some(s.relative_gap()),
                times: s.sensing.sensing_time,
                bits: s.sensing.bits,
                decisions: s.decisions,
            })
        }
        Policy::Rp | Policy::Gop => {
            let beta = if policy == Policy::Rp { fairness_weights(reserves)? } else { vec![1.0; params.len()] };
            let plan = solve_p4(params, reserves, &beta, d, budget.sensing)?;
            let decisions = if policy == Policy::Rp {
                solve_p5(params, &plan.bits, budget.slave_window)?
            } else {
                solve_gop(params, &plan.bits, budget.slave_window)?
            };
            Ok(SlaveStage { times: plan.sensing_time, bits: plan.bits, decisions, gap: None })
        }
    }
}

pub fn run_episode(scenario: &Scenario, policy: Policy) -> Result<EpisodeTrace> {
    run_episode_with(scenario, policy, &OpOptions::default())
}

pub fn run_episode_with(scenario: &Scenario, policy: Policy, opts: &OpOptions) -> Result<EpisodeTrace> {
    let realization = scenario.realize()?;
    let k = realization.slaves.len();
    let threshold = scenario.threshold;
    let mut state = SystemState::initial(&realization, threshold);
    let mut trace = EpisodeTrace {
        policy,
        seed: scenario.seed,
        rows: Vec::new(),
        tasks_completed: 0,
        termination: Termination::Completed,
        first_deactivation: state.active.iter().map(|a| if *a { None } else { Some(0) }).collect(),
        master_deactivation: if state.master_active { None } else { Some(0) },
        system_energy: Vec::new(),
        slave_energy: Vec::new(),
        final_state: state.clone(),
        realization,
    };
    let zero = EnergyBreakdown::default();
    for task in 1..=scenario.tasks {
        let ids: Vec<usize> = (0..k).filter(|&i| state.active[i]).collect();
        if ids.is_empty() {
            trace.termination = Termination::NoActiveSlaves { task };
            break;
        }
        let params: Vec<SlaveParams> = ids
            .iter()
            .map(|&i| {
                let mut p = trace.realization.slaves[i].clone();
                p.gain = scenario.gain_at(p.gain, i + 1, task);
                p
            })
            .collect();
        let reserves: Vec<f64> = ids.iter().map(|&i| state.reserves[i]).collect();
        let stage = match slave_stage(policy, &params, &reserves, scenario, opts) {
            Ok(s) => s,
            Err(Error::Infeasible(reason)) => {
                trace.termination = Termination::Infeasible { task, reason };
                break;
            }
            Err(e) => return Err(e),
        };
        let mut breakdowns = vec![zero; k];
        let mut over_budget = None;
        for (j, &i) in ids.iter().enumerate() {
            let dec = &stage.decisions[j];
            let e = slave_energy(&params[j], stage.times[j], stage.bits[j], dec.offload_bits, dec.offload_time)?;
            if e.total > state.reserves[i] {
                over_budget = Some(format!("SR{} needs {} J but has {} J left", i + 1, e.total, state.reserves[i]));
            }
            breakdowns[i] = e;
        }
        if let Some(reason) = over_budget {
            trace.termination = Termination::Infeasible { task, reason };
            break;
        }

        let master_bits: f64 = stage.decisions.iter().map(|d| d.offload_bits).sum();
        let mut master_params = trace.realization.master.clone();
        master_params.gain = scenario.gain_at(master_params.gain, 0, task);
        let mut master_tag = "inactive".to_string();
        let mut master_alloc = (0.0, 0.0, 0.0);
        let mut master_e = zero;
        let mut exhausted_now = false;
        if state.master_active {
            match solve_p2_master(&master_params, master_bits, state.master_reserve, scenario.budget.master_window) {
                Ok(m) => {
                    master_tag = m.decision.case.to_string();
                    master_alloc = (master_bits, m.decision.offload_bits, m.decision.offload_time);
                    master_e = m.energy;
                }
                Err(Error::Infeasible(reason)) => match scenario.master_exhaustion {
                    MasterExhaustion::EndEpisode => {
                        trace.termination = Termination::MasterExhausted { task, reason };
                        break;
                    }
                    MasterExhaustion::Continue => {
                        master_tag = "master-exhausted".into();
                        exhausted_now = true;
                    }
                },
                Err(e) => return Err(e),
            }
        } else if scenario.master_exhaustion == MasterExhaustion::EndEpisode {
            trace.termination = Termination::MasterExhausted { task, reason: "master is in low-power mode".into() };
            break;
        }

        let mut next = apply_task(&state, &breakdowns, &master_e, threshold)?;
        if exhausted_now {
            next.master_active = false;
        }
        let mut slave_sum = 0.0;
        for i in 0..k {
            let e = &breakdowns[i];
            let j = ids.iter().position(|&x| x == i);
            let (ts, bits, dec) = match j {
                Some(j) => (stage.times[j], stage.bits[j], stage.decisions[j]),
                None => (0.0, 0.0, RpDecision::zero()),
            };
            slave_sum += e.total;
            trace.rows.push(TraceRow {
                task,
                robot_id: i + 1,
                active: j.is_some(),
                t_s: ts,
                bits,
                offload_bits: dec.offload_bits,
                t_off: if dec.offload_bits > 0.0 { dec.offload_time } else { 0.0 },
                e_sensing: e.sensing,
                e_compute: e.compute,
                e_transmit: e.transmit,
                e_circuit: e.circuit,
                e_total: e.total,
                e_remaining: next.reserves[i],
                case_tag: if j.is_some() { dec.case.to_string() } else { "inactive".into() },
                dual_gap: stage.gap,
            });
            if state.active[i] && !next.active[i] {
                trace.first_deactivation[i] = Some(task);
            }
        }
        trace.rows.push(TraceRow {
            task,
            robot_id: 0,
            active: state.master_active,
            t_s: 0.0,
            bits: master_alloc.0,
            offload_bits: master_alloc.1,
            t_off: if master_alloc.1 > 0.0 { master_alloc.2 } else { 0.0 },
            e_sensing: 0.0,
            e_compute: master_e.compute,
            e_transmit: master_e.transmit,
            e_circuit: master_e.circuit,
            e_total: master_e.total,
            e_remaining: next.master_reserve,
            case_tag: master_tag,
            dual_gap: None,
        });
        if state.master_active && !next.master_active {
            trace.master_deactivation = Some(task);
        }
        trace.slave_energy.push(slave_sum);
        trace.system_energy.push(slave_sum + master_e.total);
        trace.tasks_completed = task;
        state = next;
    }
    trace.final_state = state;
    Ok(trace)
}
