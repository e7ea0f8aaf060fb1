use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{RunRecord, Trace};
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Internal(format!("csv output failed: {other:?}")),
    }
}

pub fn write_summary(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in records {
        w.serialize(&r.row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_file_name(record: &RunRecord, multiple_points: bool) -> String {
    if multiple_points {
        format!("trace_{}_{}_p{}.csv", record.row.seed, record.label, record.point)
    } else {
        format!("trace_{}_{}.csv", record.row.seed, record.label)
    }
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(&trace.columns).map_err(csv_error)?;
    for row in &trace.rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Statistics of one (sweep point, mode) block over its successful seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub point: usize,
    pub mode: String,
    pub p_budget: f64,
    pub threshold: f64,
    pub max_pair_distance: f64,
    pub dedicated_subcarriers: Option<usize>,
    pub runs: usize,
    pub failures: usize,
    pub sum_rate_mean: Option<f64>,
    pub sum_rate_std: Option<f64>,
    pub sum_rate_min: Option<f64>,
    pub sum_rate_max: Option<f64>,
    #[serde(rename = "eta_per_cell_per_subcarrier_mean")]
    pub eta_mean: Option<f64>,
    #[serde(rename = "eta_per_cell_per_subcarrier_std")]
    pub eta_std: Option<f64>,
    #[serde(rename = "eta_per_cell_per_subcarrier_min")]
    pub eta_min: Option<f64>,
    #[serde(rename = "eta_per_cell_per_subcarrier_max")]
    pub eta_max: Option<f64>,
}

fn stats(values: &[f64]) -> [Option<f64>; 4] {
    if values.is_empty() {
        return [None; 4];
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    [Some(mean), Some(var.sqrt()), Some(min), Some(max)]
}

/// Groups records by (point, mode label) in first-appearance order.
pub fn aggregate(records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut keys: Vec<(usize, String, f64, Option<usize>)> = Vec::new();
    for r in records {
        let key = (r.point, r.row.mode.clone(), r.row.threshold, r.row.dedicated_subcarriers);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(point, mode, threshold, nd)| {
            let group: Vec<&RunRecord> = records
                .iter()
                .filter(|r| {
                    r.point == point && r.row.mode == mode && r.row.threshold == threshold && r.row.dedicated_subcarriers == nd
                })
                .collect();
            let ok: Vec<&&RunRecord> = group.iter().filter(|r| !r.failed()).collect();
            let rates: Vec<f64> = ok.iter().filter_map(|r| r.row.sum_rate).collect();
            let etas: Vec<f64> = ok.iter().filter_map(|r| r.row.eta).collect();
            let [sum_rate_mean, sum_rate_std, sum_rate_min, sum_rate_max] = stats(&rates);
            let [eta_mean, eta_std, eta_min, eta_max] = stats(&etas);
            let first = &group[0].row;
            AggregateRow {
                point,
                mode,
                p_budget: first.p_budget,
                threshold,
                max_pair_distance: first.max_pair_distance,
                dedicated_subcarriers: nd,
                runs: group.len(),
                failures: group.len() - ok.len(),
                sum_rate_mean,
                sum_rate_std,
                sum_rate_min,
                sum_rate_max,
                eta_mean,
                eta_std,
                eta_min,
                eta_max,
            }
        })
        .collect()
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Resolved configuration, re-parseable as a campaign file.
pub fn write_manifest(path: &Path, config: &ExperimentConfig) -> Result<()> {
    let mut resolved = config.resolved();
    resolved.output_dir = None;
    let text = format!(
        "# Resolved campaign configuration written by d2d-power {}.\n# Run it again with `d2d-power --config {}`.\n\n{}",
        env!("CARGO_PKG_VERSION"),
        MANIFEST_FILE,
        resolved.to_toml()
    );
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes summary, aggregate, manifest and one trace per successful run.
/// Returns the paths written.
pub fn write_outputs(dir: &Path, config: &ExperimentConfig, records: &[RunRecord]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let summary = dir.join(SUMMARY_FILE);
    write_summary(&summary, records)?;
    written.push(summary);
    let agg = dir.join(AGGREGATE_FILE);
    write_aggregate(&agg, &aggregate(records))?;
    written.push(agg);
    let manifest = dir.join(MANIFEST_FILE);
    write_manifest(&manifest, config)?;
    written.push(manifest);
    let multiple_points = records.iter().any(|r| r.point > 0);
    for r in records {
        if let Some(trace) = &r.trace {
            let path = dir.join(trace_file_name(r, multiple_points));
            write_trace(&path, trace)?;
            written.push(path);
        }
    }
    Ok(written)
}
