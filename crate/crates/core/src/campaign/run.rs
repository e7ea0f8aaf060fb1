use std::time::Instant;

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Mode, PenaltySourceKind};
use crate::error::{Error, Result};
use crate::game::{self, AllocationResult, DynamicsOptions, PenaltySource};
use crate::scenario::{
    generate_topology, sample_gains, GainTensors, PowerProfile, RngStreams, Scenario, StreamPurpose,
    Topology,
};
use crate::subproblem::{self, SubproblemInstance};
use crate::underlay::{self, DualBoundOptions, IadrmpicOptions};

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub p_budget: f64,
    pub threshold: f64,
    pub max_pair_distance: f64,
}

/// Cartesian product of the sweep lists, distance-major.
pub fn sweep_points(config: &ExperimentConfig) -> Vec<SweepPoint> {
    let mut points = Vec::new();
    for &max_pair_distance in &config.max_pair_distances() {
        for &p_budget in &config.p_budgets() {
            for &threshold in &config.thresholds() {
                points.push(SweepPoint { index: points.len(), p_budget, threshold, max_pair_distance });
            }
        }
    }
    points
}

/// Geometry and channel draws of one seed.
#[derive(Debug, Clone)]
pub struct Realization {
    pub topology: Topology,
    pub gains: GainTensors,
}

pub fn build_realization(
    config: &ExperimentConfig,
    seed: u64,
    max_pair_distance: f64,
    ues_per_cell: usize,
) -> Result<Realization> {
    let streams = RngStreams::new(config.master_seed);
    let topology = generate_topology(
        &config.topology_config(max_pair_distance, ues_per_cell),
        &mut streams.stream(seed, StreamPurpose::Topology),
    )?;
    let gains = sample_gains(
        &topology,
        &config.channel_config(),
        config.radio.num_subcarriers,
        &mut streams.stream(seed, StreamPurpose::Channel),
    )?;
    Ok(Realization { topology, gains })
}

/// Scenario with uniform noise, budget and threshold; masks per the radio
/// settings (derived from `threshold` in interference-derived mode).
pub fn build_scenario(
    config: &ExperimentConfig,
    realization: &Realization,
    p_budget: f64,
    threshold: f64,
) -> Result<Scenario> {
    realization.gains.clone().into_scenario(
        &realization.topology,
        config.radio.noise,
        p_budget,
        threshold,
        config.radio.mask(),
    )
}

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub seed: u64,
    pub mode: String,
    pub num_cells: usize,
    pub num_users: usize,
    pub num_subcarriers: usize,
    pub p_budget: f64,
    pub threshold: f64,
    pub max_pair_distance: f64,
    pub dedicated_subcarriers: Option<usize>,
    pub sum_rate: Option<f64>,
    /// Sum rate per cell divided by the total number of subcarriers.
    #[serde(rename = "eta_per_cell_per_subcarrier")]
    pub eta: Option<f64>,
    pub rounds: Option<usize>,
    pub nash_gap: Option<f64>,
    pub max_interference_ratio: Option<f64>,
    pub converged: Option<bool>,
    pub wall_time_s: f64,
    pub error: String,
}

/// Column-labelled numeric table written as a trace file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub point: usize,
    pub row: SummaryRow,
    /// Label used in the trace file name.
    pub label: String,
    pub trace: Option<Trace>,
}

impl RunRecord {
    pub fn failed(&self) -> bool {
        !self.row.error.is_empty()
    }
}

fn dynamics(config: &ExperimentConfig, max_rounds: usize) -> DynamicsOptions {
    DynamicsOptions {
        epsilon: config.algorithm.epsilon,
        max_rounds,
        penalty_source: match config.algorithm.penalty_source {
            PenaltySourceKind::Direct => PenaltySource::Direct,
            PenaltySourceKind::Sounding => PenaltySource::Sounding { reference_power: config.algorithm.sounding_power },
        },
    }
}

fn overlay_trace(result: &AllocationResult) -> Trace {
    Trace {
        columns: vec!["round", "objective"],
        rows: result.trace.round_values.iter().enumerate().map(|(i, v)| vec![i as f64, *v]).collect(),
    }
}

fn check_chain(config: &ExperimentConfig, result: &AllocationResult) -> Result<()> {
    if config.algorithm.debug_checks {
        let drop = result.trace.worst_update_drop();
        let chain = result.trace.worst_bound_violation();
        if drop > 1e-9 || chain > 1e-9 {
            return Err(Error::Internal(format!(
                "update check failed: relative drop {drop:e}, bound violation {chain:e}"
            )));
        }
    }
    Ok(())
}

/// Uniform random feasible profile: every power uniform under its mask,
/// rows scaled into the budget.
fn random_profile<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> PowerProfile {
    let (k, n) = (scenario.num_users(), scenario.num_subcarriers());
    let mut p = PowerProfile::zeros(k, n);
    for user in 0..k {
        let mut row: Vec<f64> = (0..n).map(|s| rng.random::<f64>() * scenario.mask(user, s)).collect();
        let total: f64 = row.iter().sum();
        if total > scenario.budget(user) {
            let scale = scenario.budget(user) / total;
            row.iter_mut().for_each(|x| *x *= scale);
        }
        p.set_row(user, &row);
    }
    p
}

struct Outcome {
    sum_rate: f64,
    rounds: usize,
    nash_gap: Option<f64>,
    interference_ratio: f64,
    converged: bool,
    trace: Trace,
}

fn run_overlay(config: &ExperimentConfig, mode: Mode, seed: u64, scenario: &Scenario) -> Result<Outcome> {
    let k = scenario.num_users();
    let identity: Vec<usize> = (0..k).collect();
    let init = game::default_initial_power(scenario)?;
    let result = match mode {
        Mode::OverlayIadrmp => {
            game::iadrmp_run(scenario, &init, &identity, &dynamics(config, config.algorithm.max_rounds))?
        }
        Mode::OverlayIwf => {
            game::iwf_run(scenario, &init, &identity, &dynamics(config, config.algorithm.iwf_max_rounds))?
        }
        Mode::OverlayMultistart => {
            let mut rng = RngStreams::new(config.master_seed).stream(seed, StreamPurpose::Orders);
            let orders = game::random_orders(k, config.algorithm.orders, &mut rng);
            let mut inits = vec![init];
            while inits.len() < config.algorithm.inits {
                inits.push(random_profile(scenario, &mut rng));
            }
            game::multistart_run(scenario, &orders, &inits, &dynamics(config, config.algorithm.max_rounds))?.best
        }
        _ => unreachable!("not an overlay mode"),
    };
    if mode != Mode::OverlayIwf {
        check_chain(config, &result)?;
    }
    Ok(Outcome {
        sum_rate: result.rates.sum_rate,
        rounds: result.trace.rounds,
        nash_gap: Some(result.nash_gap),
        interference_ratio: underlay::max_interference_ratio(scenario, &result.powers),
        converged: result.converged,
        trace: overlay_trace(&result),
    })
}

fn iadrmpic_options(config: &ExperimentConfig) -> IadrmpicOptions {
    IadrmpicOptions {
        step_size: config.algorithm.step_size,
        epsilon: config.algorithm.outer_epsilon,
        feasibility_tol: config.algorithm.feasibility_tol,
        max_outer: config.algorithm.max_outer,
        oscillation_window: config.algorithm.oscillation_window,
        order: None,
        p_init: None,
        dynamics: dynamics(config, config.algorithm.max_rounds),
    }
}

fn run_iadrmpic(config: &ExperimentConfig, scenario: &Scenario) -> Result<Outcome> {
    let scenario = scenario.with_zero_threshold_shutdown()?;
    let result = underlay::iadrmpic_run(&scenario, &iadrmpic_options(config))?;
    let rows = result
        .trace
        .iter()
        .map(|r| {
            let ratio = r
                .interference
                .iter()
                .zip(scenario.thresholds())
                .filter(|(_, q)| **q > 0.0)
                .map(|(i, q)| i / q)
                .fold(0.0, f64::max);
            let nu_max = r.multipliers.iter().cloned().fold(0.0, f64::max);
            let nu_mean = r.multipliers.iter().sum::<f64>() / r.multipliers.len() as f64;
            vec![r.step as f64, r.primal_value, r.dual_value, nu_mean, nu_max, ratio, r.step_size, r.power_change]
        })
        .collect();
    Ok(Outcome {
        sum_rate: result.primal_value,
        rounds: result.total_inner_rounds,
        nash_gap: Some(result.nash_gap),
        interference_ratio: result.max_interference_ratio(&scenario),
        converged: result.converged,
        trace: Trace {
            columns: vec![
                "step",
                "primal_value",
                "lagrangian_value",
                "nu_mean",
                "nu_max",
                "max_interference_ratio",
                "step_size",
                "power_change",
            ],
            rows,
        },
    })
}

fn run_upper_bound(config: &ExperimentConfig, seed: u64, scenario: &Scenario) -> Result<Outcome> {
    let scenario = scenario.with_zero_threshold_shutdown()?;
    let order_seed = RngStreams::new(config.master_seed).stream(seed, StreamPurpose::Orders).next_u64();
    let options = DualBoundOptions {
        orders: config.algorithm.orders,
        order_seed,
        radius: None,
        volume_tol: config.algorithm.dual_volume_tol,
        max_steps: (config.algorithm.dual_max_steps > 0).then_some(config.algorithm.dual_max_steps),
        extra_inits: Vec::new(),
        dynamics: dynamics(config, config.algorithm.max_rounds),
    };
    let result = underlay::dual_upper_bound(&scenario, &options)?;
    let mut best = f64::INFINITY;
    let rows = result
        .evaluations
        .iter()
        .enumerate()
        .map(|(i, v)| {
            best = best.min(*v);
            vec![i as f64, *v, best]
        })
        .collect();
    Ok(Outcome {
        sum_rate: result.bound,
        rounds: result.steps,
        nash_gap: None,
        interference_ratio: underlay::max_interference_ratio(&scenario, &result.maximizer),
        converged: result.converged,
        trace: Trace { columns: vec!["evaluation", "dual_value", "best_bound"], rows },
    })
}

/// Noise at every D2D receiver in reuse mode: thermal noise plus the uplink
/// of the cellular UE scheduled on each subcarrier of every cell. UEs get
/// subcarriers round-robin within their cell and waterfill their budget
/// over them against noise plus the eNB's interference allowance.
pub fn reuse_noise(
    config: &ExperimentConfig,
    realization: &Realization,
    seed: u64,
    threshold: f64,
) -> Result<Vec<f64>> {
    let topo = &realization.topology;
    let channel = config.channel_config();
    let n = config.radio.num_subcarriers;
    let sigma2 = config.radio.noise;
    let mut rng = RngStreams::new(config.master_seed).stream(seed, StreamPurpose::Cellular);
    let ues_per_cell = config.comparison.ues_per_cell;
    let mut ue_power = vec![0.0; topo.ue_positions.len() * n];
    let mut ue_to_rx = Vec::with_capacity(topo.ue_positions.len());
    for (u, (pos, cell)) in topo.ue_positions.iter().enumerate() {
        let uplink = channel.sample_link(pos.distance(&topo.enb_positions[*cell]), n, &mut rng)?;
        let local = u % ues_per_cell;
        let mask: Vec<f64> =
            (0..n).map(|s| if s % ues_per_cell == local { config.comparison.ue_power } else { 0.0 }).collect();
        let inst = SubproblemInstance {
            interference: uplink.iter().map(|g| (threshold + sigma2) / g).collect(),
            penalty: vec![0.0; n],
            budget: config.comparison.ue_power,
            mask,
        };
        ue_power[u * n..(u + 1) * n].copy_from_slice(&subproblem::solve(&inst)?.powers);
        let mut links = Vec::with_capacity(topo.pairs.len());
        for pair in &topo.pairs {
            links.push(channel.sample_link(pos.distance(&pair.rx), n, &mut rng)?);
        }
        ue_to_rx.push(links);
    }
    let mut noise = vec![sigma2; topo.pairs.len() * n];
    for (u, links) in ue_to_rx.iter().enumerate() {
        for (k, gains) in links.iter().enumerate() {
            for s in 0..n {
                noise[k * n + s] += gains[s] * ue_power[u * n + s];
            }
        }
    }
    Ok(noise)
}

/// Dedicated versus reuse operation on the same realization. Dedicated
/// mode runs the overlay dynamics on the first `N_d` subcarriers; reuse
/// mode runs the interference-constrained heuristic on all `N` subcarriers
/// with cellular interference added to the D2D noise. Both normalize by
/// the full `N`.
pub fn mode_comparison(config: &ExperimentConfig, seed: u64, point: &SweepPoint) -> Vec<RunRecord> {
    let mut out = Vec::new();
    let started = Instant::now();
    let realization = match build_realization(config, seed, point.max_pair_distance, config.comparison.ues_per_cell) {
        Ok(r) => r,
        Err(e) => {
            let label = Mode::ModeComparison.name().to_owned();
            out.push(record(config, seed, point, label.clone(), &label, point.threshold, Err(e), started));
            return out;
        }
    };
    let n = config.radio.num_subcarriers;
    for &nd in &config.comparison.dedicated_subcarriers {
        let started = Instant::now();
        let run = (|| {
            let full = build_scenario(config, &realization, point.p_budget, point.threshold)?;
            let subset: Vec<usize> = (0..nd).collect();
            let scenario = full.restrict_subcarriers(&subset)?;
            Ok((run_overlay(config, Mode::OverlayIadrmp, seed, &scenario)?, n))
        })();
        let label = format!("mode-comparison-dedicated-nd{nd}");
        let mut rec = record(config, seed, point, label.clone(), "mode-comparison-dedicated", point.threshold, run, started);
        rec.row.dedicated_subcarriers = Some(nd);
        out.push(rec);
    }
    for (qi, &q) in config.reuse_thresholds().iter().enumerate() {
        let started = Instant::now();
        let run = (|| {
            let noise = reuse_noise(config, &realization, seed, q)?;
            let base = build_scenario(config, &realization, point.p_budget, q)?;
            let mut parts = base.into_parts();
            parts.noise = noise;
            let scenario = Scenario::from_parts(parts)?.with_masks(config.radio.mask())?;
            Ok((run_iadrmpic(config, &scenario)?, n))
        })();
        let label = format!("mode-comparison-reuse-q{qi}");
        out.push(record(config, seed, point, label, "mode-comparison-reuse", q, run, started));
    }
    out
}

fn base_row(config: &ExperimentConfig, seed: u64, mode: &str, point: &SweepPoint, threshold: f64) -> SummaryRow {
    SummaryRow {
        seed,
        mode: mode.to_owned(),
        num_cells: config.topology.num_cells,
        num_users: config.topology.num_cells * config.topology.pairs_per_cell,
        num_subcarriers: config.radio.num_subcarriers,
        p_budget: point.p_budget,
        threshold,
        max_pair_distance: point.max_pair_distance,
        dedicated_subcarriers: None,
        sum_rate: None,
        eta: None,
        rounds: None,
        nash_gap: None,
        max_interference_ratio: None,
        converged: None,
        wall_time_s: 0.0,
        error: String::new(),
    }
}

#[allow(clippy::too_many_arguments)]
fn record(
    config: &ExperimentConfig,
    seed: u64,
    point: &SweepPoint,
    label: String,
    mode_name: &str,
    threshold: f64,
    outcome: Result<(Outcome, usize)>,
    started: Instant,
) -> RunRecord {
    let mut row = base_row(config, seed, mode_name, point, threshold);
    row.wall_time_s = started.elapsed().as_secs_f64();
    let trace = match outcome {
        Ok((o, total_subcarriers)) => {
            row.sum_rate = Some(o.sum_rate);
            row.eta = Some(o.sum_rate / config.topology.num_cells as f64 / total_subcarriers as f64);
            row.rounds = Some(o.rounds);
            row.nash_gap = o.nash_gap;
            row.max_interference_ratio = Some(o.interference_ratio);
            row.converged = Some(o.converged);
            Some(o.trace)
        }
        Err(e) => {
            log::error!("seed {seed}, {label}: {e}");
            row.error = e.to_string();
            None
        }
    };
    RunRecord { point: point.index, row, label, trace }
}

/// All modes of one (seed, sweep point) job.
pub fn run_job(config: &ExperimentConfig, seed: u64, point: &SweepPoint) -> Vec<RunRecord> {
    let mut records = Vec::new();
    let needs_scenario = config.modes().iter().any(|m| *m != Mode::ModeComparison);
    let scenario = if needs_scenario {
        Some(
            build_realization(config, seed, point.max_pair_distance, 0)
                .and_then(|r| build_scenario(config, &r, point.p_budget, point.threshold)),
        )
    } else {
        None
    };
    for mode in config.modes() {
        if mode == Mode::ModeComparison {
            records.extend(mode_comparison(config, seed, point));
            continue;
        }
        let started = Instant::now();
        let outcome = match scenario.as_ref().expect("scenario built for non-comparison modes") {
            Err(e) => Err(Error::Internal(format!("scenario generation failed: {e}"))),
            Ok(sc) => {
                let n = sc.num_subcarriers();
                match mode {
                    Mode::OverlayIadrmp | Mode::OverlayIwf | Mode::OverlayMultistart => {
                        run_overlay(config, mode, seed, sc)
                    }
                    Mode::UnderlayIadrmpic => run_iadrmpic(config, sc),
                    Mode::UnderlayUpperBound => run_upper_bound(config, seed, sc),
                    Mode::ModeComparison => unreachable!(),
                }
                .map(|o| (o, n))
            }
        };
        records.push(record(config, seed, point, mode.name().to_owned(), mode.name(), point.threshold, outcome, started));
    }
    records
}

/// Runs every (sweep point, seed) job on a pool of `workers` threads (0
/// picks the number of CPUs) and returns the records in point, seed, mode
/// order. Failed runs are recorded, not propagated.
pub fn run_records(config: &ExperimentConfig, workers: usize) -> Result<Vec<RunRecord>> {
    let points = sweep_points(config);
    let seeds = config.seed_list();
    let jobs: Vec<(SweepPoint, u64)> = points.iter().flat_map(|p| seeds.iter().map(move |s| (*p, *s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("cannot start worker pool: {e}")))?;
    let nested: Vec<Vec<RunRecord>> =
        pool.install(|| jobs.par_iter().map(|(point, seed)| run_job(config, *seed, point)).collect());
    Ok(nested.into_iter().flatten().collect())
}
