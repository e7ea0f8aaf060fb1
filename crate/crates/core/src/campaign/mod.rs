//! Seeded Monte-Carlo campaigns.
//!
//! A campaign is a TOML file ([`config`]) naming one or more modes, a seed
//! list and optional parameter sweeps. Every (sweep point, seed) pair is an
//! independent job: it draws one topology and channel realization from the
//! seed's random streams and runs every requested mode on it. Jobs execute
//! on a worker pool; results are written in point, seed, mode order, so the
//! output never depends on the number of workers.
//!
//! Files written to the output directory:
//!
//! * `summary.csv`: one row per run (see [`SummaryRow`]); `eta` is the sum
//!   rate per cell divided by the total subcarrier count, in bits/s/Hz;
//! * `aggregate.csv`: mean, standard deviation, min and max per
//!   (sweep point, mode);
//! * `trace_<seed>_<mode>.csv` (with a `_p<point>` suffix when sweeping):
//!   objective per round, per outer step, or per dual evaluation;
//! * `manifest.toml`: the resolved configuration with the explicit seed
//!   list, itself a valid campaign file.

pub mod config;
pub mod output;
pub mod run;

use std::path::Path;

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig, Mode};
pub use output::{aggregate, write_outputs, AggregateRow};
pub use run::{
    build_realization, build_scenario, mode_comparison, run_job, run_records, sweep_points, RunRecord, SummaryRow,
    SweepPoint, Trace,
};

use crate::error::Result;

#[derive(Debug, Clone)]
pub struct CampaignReport {
    pub records: Vec<RunRecord>,
    pub failures: usize,
}

/// Runs the campaign and writes its outputs to `output_dir`.
pub fn run_campaign(config: &ExperimentConfig, output_dir: &Path, workers: usize) -> Result<CampaignReport> {
    let records = run_records(config, workers)?;
    write_outputs(output_dir, config, &records)?;
    let failures = records.iter().filter(|r| r.failed()).count();
    Ok(CampaignReport { records, failures })
}
