//! Trace CSV and summary JSON output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::{EpisodeTrace, Termination};

/// Column order of the per-task trace.
pub const TRACE_COLUMNS: [&str; 15] = [
    "task",
    "robot_id",
    "active",
    "t_s",
    "D",
    "D_off",
    "t_off",
    "E_s",
    "E_cmp",
    "E_tr",
    "E_circ",
    "E_tot",
    "E_remaining",
    "case_tag",
    "dual_gap",
];

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes the trace as CSV. An empty trace gives a header-only file.
pub fn write_trace_csv<W: Write>(trace: &EpisodeTrace, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(TRACE_COLUMNS).map_err(csv_error)?;
    for row in &trace.rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub policy: String,
    pub seed: Option<u64>,
    pub tasks_completed: usize,
    pub termination: Termination,
    /// Energy spent per robot over the episode (`SR1`, `SR2`, ..., `MR`).
    pub energy_totals: BTreeMap<String, f64>,
    /// Task after which each robot entered low-power mode; `null` if it never did.
    pub first_deactivation: BTreeMap<String, Option<usize>>,
    pub system_energy_per_task: Vec<f64>,
    pub slave_energy_per_task: Vec<f64>,
}

pub fn summarize(trace: &EpisodeTrace) -> Summary {
    let mut energy_totals = BTreeMap::new();
    let mut first_deactivation = BTreeMap::new();
    for (k, total) in trace.slave_totals().into_iter().enumerate() {
        energy_totals.insert(format!("SR{}", k + 1), total);
        first_deactivation.insert(format!("SR{}", k + 1), trace.first_deactivation[k]);
    }
    energy_totals.insert("MR".into(), trace.master_total());
    first_deactivation.insert("MR".into(), trace.master_deactivation);
    Summary {
        policy: trace.policy.as_str().into(),
        seed: trace.seed,
        tasks_completed: trace.tasks_completed,
        termination: trace.termination.clone(),
        energy_totals,
        first_deactivation,
        system_energy_per_task: trace.system_energy.clone(),
        slave_energy_per_task: trace.slave_energy.clone(),
    }
}

pub fn write_summary<W: Write>(trace: &EpisodeTrace, mut out: W) -> Result<()> {
    let text = serde_json::to_string_pretty(&summarize(trace)).expect("plain data");
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Writes `trace_<policy>.csv` and `summary_<policy>.json` into `dir`.
pub fn emit_trace(trace: &EpisodeTrace, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let p = trace.policy.as_str();
    let csv = std::fs::File::create(dir.join(format!("trace_{p}.csv")))?;
    write_trace_csv(trace, std::io::BufWriter::new(csv))?;
    let json = std::fs::File::create(dir.join(format!("summary_{p}.json")))?;
    write_summary(trace, std::io::BufWriter::new(json))
}
