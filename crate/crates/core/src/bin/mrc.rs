use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mrc_core::cli::{parse_channel_override, run, PolicySelection, RunConfig, Sweep};
use mrc_core::sim::ChannelOverride;

#[derive(Parser)]
#[command(name = "mrc", version, about = "Energy-aware task offloading for master/slave robot teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run episodes and write per-task traces and summaries.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// op, rp, gop or all
        #[arg(long, default_value = "all", value_parser = |s: &str| s.parse::<PolicySelection>().map_err(|e| e.to_string()))]
        policy: PolicySelection,
        /// Overrides the scenario's task count.
        #[arg(long)]
        tasks: Option<usize>,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// key=lo:hi:steps, e.g. slave_window=10ms:40ms:4
        #[arg(long, value_parser = |s: &str| s.parse::<Sweep>().map_err(|e| e.to_string()))]
        sweep: Option<Sweep>,
        /// task:robot:gain, robot 0 is the master; repeatable
        #[arg(long = "channel-override", value_parser = |s: &str| parse_channel_override(s).map_err(|e| e.to_string()))]
        channel_override: Vec<ChannelOverride>,
    },
}

fn main() -> ExitCode {
    let Command::Run { scenario, policy, tasks, seed, out, sweep, channel_override } = Cli::parse().command;
    let cfg = RunConfig { scenario, policy, tasks, seed, out, sweep, channel_overrides: channel_override };
    match run(&cfg) {
        Ok(report) => {
            for t in &report.traces {
                eprintln!("{}: {} tasks, {:?}", t.policy.as_str(), t.tasks_completed, t.termination);
            }
            if !report.sweep_rows.is_empty() {
                eprintln!("{} sweep rows written to {}", report.sweep_rows.len(), cfg.out.join("sweep_summary.csv").display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
