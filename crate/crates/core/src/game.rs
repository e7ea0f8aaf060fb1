//! Sequential better-response dynamics on the sum-rate potential game.
//!
//! Every couple's payoff is the network sum rate, so the game is an exact
//! potential game and any sequence of strict better responses climbs the
//! potential. A couple's response is the solution of its linearized problem
//! (see [`crate::subproblem`]): the interference it causes to the others is
//! expanded to first order, which under-estimates their rates because those
//! rates are convex in its power. Hence
//! `R(y) ≤ R̃(x; y) ≤ R(x)` for the old strategy `y` and the response `x`,
//! and the sum rate never decreases.
//!
//! The same loop runs the selfish iterative-waterfilling baseline (penalty
//! forced to zero) and the multiplier-penalized dynamics used by the
//! underlay heuristics.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rate::{self, RateReport};
use crate::scenario::{PowerProfile, Scenario};
use crate::sounding;
use crate::subproblem::{self, SubproblemInstance};
use crate::underlay;

/// How a couple chooses its new powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseRule {
    /// Linearized better response on the (penalized) sum rate.
    Linearized,
    /// Maximize own rate only (iterative waterfilling).
    Selfish,
}

/// Where the penalty slopes come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltySource {
    /// Evaluated from the channel gains.
    Direct,
    /// Reconstructed from simulated sounding broadcasts with this reference
    /// power (W).
    Sounding { reference_power: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsOptions {
    /// Stop once a full round improves the objective by less than this
    /// (bits/s/Hz). Selfish dynamics stop on the absolute change.
    pub epsilon: f64,
    pub max_rounds: usize,
    pub penalty_source: PenaltySource,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self { epsilon: 1e-4, max_rounds: 10_000, penalty_source: PenaltySource::Direct }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    pub round: usize,
    pub user: usize,
    /// Objective before the update.
    pub before: f64,
    /// Linearized objective at the response; `None` for selfish updates.
    pub surrogate: Option<f64>,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    /// Objective at the start and after every completed round.
    pub round_values: Vec<f64>,
    pub updates: Vec<UpdateRecord>,
    pub rounds: usize,
}

impl IterationTrace {
    /// Largest relative drop of the objective over a single update; zero
    /// when every update was non-decreasing.
    pub fn worst_update_drop(&self) -> f64 {
        self.updates
            .iter()
            .map(|u| (u.before - u.after) / u.before.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    /// Largest relative violation of `before ≤ surrogate ≤ after` over all
    /// linearized updates.
    pub fn worst_bound_violation(&self) -> f64 {
        self.updates
            .iter()
            .filter_map(|u| {
                u.surrogate.map(|s| {
                    let scale = u.after.abs().max(1.0);
                    ((u.before - s).max(0.0)).max((s - u.after).max(0.0)) / scale
                })
            })
            .fold(0.0, f64::max)
    }

    pub fn is_monotone(&self, rel_slack: f64) -> bool {
        self.worst_update_drop() <= rel_slack
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    pub powers: PowerProfile,
    pub rates: RateReport,
    /// Final value of the objective the dynamics climbed: the sum rate, or
    /// the Lagrangian when multipliers were supplied.
    pub objective: f64,
    pub trace: IterationTrace,
    pub converged: bool,
    pub nash_gap: f64,
}

/// Linearized better-response dynamics on the sum rate.
pub fn iadrmp_run(
    scenario: &Scenario,
    p_init: &PowerProfile,
    order: &[usize],
    options: &DynamicsOptions,
) -> Result<AllocationResult> {
    run_dynamics(scenario, p_init, order, ResponseRule::Linearized, None, options)
}

/// Iterative waterfilling: every couple maximizes its own rate.
pub fn iwf_run(
    scenario: &Scenario,
    p_init: &PowerProfile,
    order: &[usize],
    options: &DynamicsOptions,
) -> Result<AllocationResult> {
    run_dynamics(scenario, p_init, order, ResponseRule::Selfish, None, options)
}

/// Linearized dynamics on the Lagrangian `L(p, ν)`; `multipliers` is the flat
/// `B × N` vector `ν`.
pub fn penalized_run(
    scenario: &Scenario,
    p_init: &PowerProfile,
    order: &[usize],
    multipliers: &[f64],
    options: &DynamicsOptions,
) -> Result<AllocationResult> {
    run_dynamics(scenario, p_init, order, ResponseRule::Linearized, Some(multipliers), options)
}

fn check_order(order: &[usize], k: usize) -> Result<()> {
    let mut seen = vec![false; k];
    if order.len() != k {
        return Err(Error::InvalidInput(format!("order has {} entries for {k} couples", order.len())));
    }
    for &u in order {
        if u >= k || std::mem::replace(&mut seen[u], true) {
            return Err(Error::InvalidInput(format!("order {order:?} is not a permutation of 0..{k}")));
        }
    }
    Ok(())
}

fn check_multipliers(scenario: &Scenario, multipliers: Option<&[f64]>) -> Result<()> {
    if let Some(nu) = multipliers {
        if nu.len() != scenario.num_constraints() {
            return Err(Error::InvalidInput(format!(
                "{} multipliers for {} constraints",
                nu.len(),
                scenario.num_constraints()
            )));
        }
        if nu.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("multipliers must be finite and non-negative".into()));
        }
    }
    Ok(())
}

fn objective(scenario: &Scenario, p: &PowerProfile, multipliers: Option<&[f64]>) -> f64 {
    match multipliers {
        Some(nu) => underlay::lagrangian_value(scenario, p, nu),
        None => rate::sum_rate(scenario, p),
    }
}

/// Penalty slopes of `user` at `p`: `α` minus the multiplier prices
/// `Σ_b ν[b][n]·A[user][b][n]`.
fn penalty(
    scenario: &Scenario,
    p: &PowerProfile,
    user: usize,
    multipliers: Option<&[f64]>,
    source: PenaltySource,
) -> Vec<f64> {
    match source {
        PenaltySource::Direct => {
            let mut slope = rate::alpha(scenario, p, user);
            if let Some(nu) = multipliers {
                let n_sc = scenario.num_subcarriers();
                for (n, s) in slope.iter_mut().enumerate() {
                    for cell in 0..scenario.num_cells() {
                        *s -= nu[cell * n_sc + n] * scenario.enb_gain(user, cell, n);
                    }
                }
            }
            slope
        }
        PenaltySource::Sounding { reference_power } => {
            let frame = sounding::build_frame(scenario, p, multipliers, reference_power);
            // Rounding in the subtraction of the own-link term can leave a
            // value a few ulps above zero.
            sounding::measure_and_estimate(scenario, &frame, user).into_iter().map(|a| a.min(0.0)).collect()
        }
    }
}

fn instance_for(
    scenario: &Scenario,
    p: &PowerProfile,
    user: usize,
    rule: ResponseRule,
    multipliers: Option<&[f64]>,
    source: PenaltySource,
) -> SubproblemInstance {
    let penalty = match rule {
        ResponseRule::Linearized => penalty(scenario, p, user, multipliers, source),
        ResponseRule::Selfish => vec![0.0; scenario.num_subcarriers()],
    };
    SubproblemInstance {
        interference: rate::normalized_interference_row(scenario, p, user),
        penalty,
        budget: scenario.budget(user),
        mask: scenario.mask_row(user).to_vec(),
    }
}

fn multiplier_term(scenario: &Scenario, p: &PowerProfile, multipliers: Option<&[f64]>) -> f64 {
    multipliers.map_or(0.0, |nu| underlay::lagrangian_value(scenario, p, nu) - rate::sum_rate(scenario, p))
}

fn run_dynamics(
    scenario: &Scenario,
    p_init: &PowerProfile,
    order: &[usize],
    rule: ResponseRule,
    multipliers: Option<&[f64]>,
    options: &DynamicsOptions,
) -> Result<AllocationResult> {
    p_init.check_feasible(scenario, 1e-9)?;
    check_order(order, scenario.num_users())?;
    check_multipliers(scenario, multipliers)?;

    let mut p = p_init.clone();
    let mut current = objective(scenario, &p, multipliers);
    let mut trace = IterationTrace { round_values: vec![current], ..Default::default() };
    let mut converged = false;

    while trace.rounds < options.max_rounds {
        let round = trace.rounds + 1;
        let start = current;
        for &user in order {
            let inst = instance_for(scenario, &p, user, rule, multipliers, options.penalty_source);
            let response = subproblem::solve(&inst)?;
            let surrogate = match rule {
                ResponseRule::Linearized => {
                    let mut moved = p.clone();
                    moved.set_row(user, &response.powers);
                    Some(
                        rate::surrogate_rate(scenario, &p, user, &response.powers, p.row(user))
                            + multiplier_term(scenario, &moved, multipliers),
                    )
                }
                ResponseRule::Selfish => None,
            };
            let before = current;
            p.set_row(user, &response.powers);
            current = objective(scenario, &p, multipliers);
            trace.updates.push(UpdateRecord { round, user, before, surrogate, after: current });
        }
        trace.rounds = round;
        trace.round_values.push(current);
        let change = current - start;
        let settled = match rule {
            ResponseRule::Linearized => change < options.epsilon,
            ResponseRule::Selfish => change.abs() < options.epsilon,
        };
        if settled {
            converged = true;
            break;
        }
    }

    let nash_gap = nash_gap(scenario, &p, multipliers, options.penalty_source)?;
    Ok(AllocationResult { rates: rate::rate_report(scenario, &p), powers: p, objective: current, trace, converged, nash_gap })
}

fn nash_gap(
    scenario: &Scenario,
    p: &PowerProfile,
    multipliers: Option<&[f64]>,
    source: PenaltySource,
) -> Result<f64> {
    let base = objective(scenario, p, multipliers);
    let mut gap: f64 = 0.0;
    for user in 0..scenario.num_users() {
        let inst = instance_for(scenario, p, user, ResponseRule::Linearized, multipliers, source);
        let response = subproblem::solve(&inst)?;
        let mut moved = p.clone();
        moved.set_row(user, &response.powers);
        gap = gap.max(objective(scenario, &moved, multipliers) - base);
    }
    Ok(gap)
}

/// Largest sum-rate gain any single couple obtains by re-solving its
/// linearized problem at `p` while the others stay put. Zero at a fixed
/// point of the dynamics.
pub fn nash_check(scenario: &Scenario, p: &PowerProfile) -> Result<f64> {
    p.check_feasible(scenario, 1e-9)?;
    nash_gap(scenario, p, None, PenaltySource::Direct)
}

/// Same as [`nash_check`] on the Lagrangian for multipliers `multipliers`.
pub fn nash_check_penalized(scenario: &Scenario, p: &PowerProfile, multipliers: &[f64]) -> Result<f64> {
    p.check_feasible(scenario, 1e-9)?;
    check_multipliers(scenario, Some(multipliers))?;
    nash_gap(scenario, p, Some(multipliers), PenaltySource::Direct)
}

/// Every couple waterfills its budget as if no other couple transmitted.
pub fn default_initial_power(scenario: &Scenario) -> Result<PowerProfile> {
    let (k, n) = (scenario.num_users(), scenario.num_subcarriers());
    let mut p = PowerProfile::zeros(k, n);
    for user in 0..k {
        let inst = SubproblemInstance {
            interference: (0..n).map(|sc| scenario.noise(user, sc) / scenario.gain(user, user, sc)).collect(),
            penalty: vec![0.0; n],
            budget: scenario.budget(user),
            mask: scenario.mask_row(user).to_vec(),
        };
        p.set_row(user, &subproblem::solve(&inst)?.powers);
    }
    Ok(p)
}

/// The identity order followed by `count - 1` random permutations.
pub fn random_orders<R: Rng + ?Sized>(num_users: usize, count: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let identity: Vec<usize> = (0..num_users).collect();
    let mut orders = Vec::with_capacity(count);
    if count > 0 {
        orders.push(identity.clone());
    }
    while orders.len() < count {
        let mut o = identity.clone();
        o.shuffle(rng);
        orders.push(o);
    }
    orders
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultistartResult {
    pub best: AllocationResult,
    pub best_order: usize,
    pub best_init: usize,
    /// Final objective of every run, order-major.
    pub values: Vec<f64>,
}

/// Runs the linearized dynamics from every (order, initial profile) pair
/// and keeps the run with the largest final objective. Ties go to the
/// lowest (order, init) index. Runs are independent and execute in
/// parallel; the reduction is sequential so the choice is deterministic.
pub fn multistart_run(
    scenario: &Scenario,
    orders: &[Vec<usize>],
    inits: &[PowerProfile],
    options: &DynamicsOptions,
) -> Result<MultistartResult> {
    multistart_impl(scenario, orders, inits, None, options)
}

/// [`multistart_run`] on the Lagrangian for fixed multipliers.
pub fn multistart_penalized(
    scenario: &Scenario,
    orders: &[Vec<usize>],
    inits: &[PowerProfile],
    multipliers: &[f64],
    options: &DynamicsOptions,
) -> Result<MultistartResult> {
    multistart_impl(scenario, orders, inits, Some(multipliers), options)
}

fn multistart_impl(
    scenario: &Scenario,
    orders: &[Vec<usize>],
    inits: &[PowerProfile],
    multipliers: Option<&[f64]>,
    options: &DynamicsOptions,
) -> Result<MultistartResult> {
    if orders.is_empty() || inits.is_empty() {
        return Err(Error::InvalidInput("multi-start needs at least one order and one initial profile".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..orders.len()).flat_map(|o| (0..inits.len()).map(move |i| (o, i))).collect();
    let runs = jobs
        .par_iter()
        .map(|&(o, i)| run_dynamics(scenario, &inits[i], &orders[o], ResponseRule::Linearized, multipliers, options))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = runs.iter().map(|r| r.objective).collect();
    let mut best = 0;
    for (idx, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = idx;
        }
    }
    let (best_order, best_init) = jobs[best];
    let best_run = runs.into_iter().nth(best).expect("non-empty runs");
    Ok(MultistartResult { best: best_run, best_order, best_init, values })
}
