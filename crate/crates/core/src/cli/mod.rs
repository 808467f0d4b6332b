//! Scenario ingestion, run orchestration, sweeps and output files.

pub mod emit;
pub mod scenario;

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec::{map_indices, Execution};
use crate::sim::{run_episode, ChannelOverride, EpisodeTrace, Policy, Scenario};

pub use emit::{emit_trace, summarize, write_summary, write_trace_csv, Summary, TRACE_COLUMNS};
pub use scenario::{load_scenario, parse_quantity, save_scenario, scenario_from_json, scenario_to_json, Dim};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicySelection {
    One(Policy),
    All,
}

impl PolicySelection {
    pub fn policies(self) -> Vec<Policy> {
        match self {
            PolicySelection::One(p) => vec![p],
            PolicySelection::All => Policy::ALL.to_vec(),
        }
    }
}

impl FromStr for PolicySelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "all" {
            Ok(PolicySelection::All)
        } else {
            Ok(PolicySelection::One(s.parse()?))
        }
    }
}

/// Scalar scenario field that a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKey {
    Sensing,
    SlaveWindow,
    MasterWindow,
    TaskBits,
    Threshold,
}

impl SweepKey {
    pub fn name(self) -> &'static str {
        match self {
            SweepKey::Sensing => "sensing",
            SweepKey::SlaveWindow => "slave_window",
            SweepKey::MasterWindow => "master_window",
            SweepKey::TaskBits => "task_bits",
            SweepKey::Threshold => "threshold",
        }
    }

    pub fn dim(self) -> Dim {
        match self {
            SweepKey::Sensing | SweepKey::SlaveWindow | SweepKey::MasterWindow => Dim::Time,
            SweepKey::TaskBits => Dim::Bits,
            SweepKey::Threshold => Dim::Energy,
        }
    }

    pub fn apply(self, s: &mut Scenario, value: f64) {
        match self {
            SweepKey::Sensing => s.budget.sensing = value,
            SweepKey::SlaveWindow => s.budget.slave_window = value,
            SweepKey::MasterWindow => s.budget.master_window = value,
            SweepKey::TaskBits => s.task_bits = value,
            SweepKey::Threshold => s.threshold = value,
        }
    }
}

impl FromStr for SweepKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sensing" | "time_budget.sensing" | "T_s" => Ok(SweepKey::Sensing),
            "slave_window" | "time_budget.slave_window" | "T_s_cmp" => Ok(SweepKey::SlaveWindow),
            "master_window" | "time_budget.master_window" | "T_M_cmp" => Ok(SweepKey::MasterWindow),
            "task_bits" | "D" => Ok(SweepKey::TaskBits),
            "threshold" => Ok(SweepKey::Threshold),
            other => Err(Error::Config(format!(
                "sweep key `{other}` is not a scenario field (use sensing, slave_window, master_window, task_bits or threshold)"
            ))),
        }
    }
}

/// `key=lo:hi:steps`, evenly spaced and inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub key: SweepKey,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        match self.steps {
            0 => vec![],
            1 => vec![self.lo],
            n => (0..n)
                .map(|i| if i == n - 1 { self.hi } else { self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64 })
                .collect(),
        }
    }
}

impl FromStr for Sweep {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("sweep `{s}` is not of the form key=lo:hi:steps"));
        let (key, range) = s.split_once('=').ok_or_else(bad)?;
        let key: SweepKey = key.trim().parse()?;
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let q = |t: &str| parse_quantity(t, key.dim()).map_err(|e| Error::Config(format!("sweep {}: {e}", key.name())));
        let steps = parts[2].trim().parse().map_err(|_| bad())?;
        Ok(Sweep { key, lo: q(parts[0])?, hi: q(parts[1])?, steps })
    }
}

/// `task:robot:gain`; robot 0 is the master.
pub fn parse_channel_override(s: &str) -> Result<ChannelOverride> {
    let bad = || Error::Config(format!("channel override `{s}` is not of the form task:robot:gain"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    Ok(ChannelOverride {
        task: parts[0].trim().parse().map_err(|_| bad())?,
        robot: parts[1].trim().parse().map_err(|_| bad())?,
        gain: parse_quantity(parts[2], Dim::Gain).map_err(|_| bad())?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: PathBuf,
    pub policy: PolicySelection,
    pub tasks: Option<usize>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub sweep: Option<Sweep>,
    pub channel_overrides: Vec<ChannelOverride>,
}

/// Applies command-line overrides to a loaded scenario.
pub fn configure(mut s: Scenario, cfg: &RunConfig) -> Result<Scenario> {
    if let Some(t) = cfg.tasks {
        s.tasks = t;
    }
    if cfg.seed.is_some() {
        s.seed = cfg.seed;
    }
    s.channel_schedule.extend(cfg.channel_overrides.iter().copied());
    s.validate()?;
    Ok(s)
}

/// One line of `sweep_summary.csv`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SweepRow {
    pub point: usize,
    pub key: &'static str,
    pub value: f64,
    pub policy: &'static str,
    pub tasks_completed: usize,
    pub total_slave_energy: f64,
    pub total_system_energy: f64,
    pub first_task_slave_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub traces: Vec<EpisodeTrace>,
    pub sweep_rows: Vec<SweepRow>,
}

/// Runs every selected policy for each sweep point and writes the outputs.
pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    let base = configure(load_scenario(&cfg.scenario)?, cfg)?;
    let policies = cfg.policy.policies();
    let Some(sweep) = cfg.sweep else {
        let traces: Vec<EpisodeTrace> = map_indices(policies.len(), Execution::Parallel, |i| run_episode(&base, policies[i]))
            .into_iter()
            .collect::<Result<_>>()?;
        for t in &traces {
            emit_trace(t, &cfg.out)?;
        }
        return Ok(RunReport { traces, sweep_rows: vec![] });
    };
    let points = sweep.points();
    let jobs: Vec<(usize, Policy)> = (0..points.len()).flat_map(|p| policies.iter().map(move |q| (p, *q))).collect();
    let traces: Vec<EpisodeTrace> = map_indices(jobs.len(), Execution::Parallel, |j| {
        let (p, policy) = jobs[j];
        let mut s = base.clone();
        sweep.key.apply(&mut s, points[p]);
        s.validate()?;
        run_episode(&s, policy)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(jobs.len());
    for ((p, policy), t) in jobs.iter().zip(&traces) {
        emit_trace(t, &point_dir(&cfg.out, *p))?;
        rows.push(SweepRow {
            point: *p,
            key: sweep.key.name(),
            value: points[*p],
            policy: policy.as_str(),
            tasks_completed: t.tasks_completed,
            total_slave_energy: t.slave_energy.iter().sum(),
            total_system_energy: t.system_energy.iter().sum(),
            first_task_slave_energy: t.slave_energy.first().copied(),
        });
    }
    std::fs::create_dir_all(&cfg.out)?;
    let mut w = csv::Writer::from_path(cfg.out.join("sweep_summary.csv")).map_err(|e| Error::Io(e.to_string()))?;
    for r in &rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(RunReport { traces, sweep_rows: rows })
}

fn point_dir(out: &Path, p: usize) -> PathBuf {
    out.join(format!("point_{p:03}"))
}
