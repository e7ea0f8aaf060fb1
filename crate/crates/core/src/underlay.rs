//! Interference-constrained allocation.
//!
//! The constraints `Σ_k A[k][b][n]·p[k][n] ≤ Q[b][n]` are priced with
//! multipliers `ν[b][n] ≥ 0`, giving the Lagrangian
//! `L(p, ν) = R(p) + Σ ν·(Q − Σ_k A·p)`. For fixed `ν` the penalized problem
//! has the same structure as the unconstrained game, with each couple's
//! penalty slope shifted by `−Σ_b ν[b][n]·A[k][b][n]`.
//!
//! Two solvers live here:
//!
//! * [`iadrmpic_run`], a projected subgradient heuristic on `ν` whose inner
//!   step re-runs the penalized dynamics warm-started from the previous
//!   powers;
//! * [`dual_upper_bound`], which minimizes the dual function `g(ν) = max_p L`
//!   with the ellipsoid method. Every evaluation of `g` upper-bounds the
//!   constrained optimum as long as the inner maximization is global; it is
//!   approximated by multi-start dynamics.
//!
//! Multipliers are flat `B × N` vectors, row-major by cell.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::game::{self, AllocationResult, DynamicsOptions};
use crate::rate;
use crate::scenario::{PowerProfile, Scenario};

/// Aggregate D2D interference at every eNB, `B × N`.
pub fn interference_at_enbs(scenario: &Scenario, p: &PowerProfile) -> Vec<f64> {
    let n_sc = scenario.num_subcarriers();
    let mut out = vec![0.0; scenario.num_constraints()];
    for cell in 0..scenario.num_cells() {
        for n in 0..n_sc {
            out[cell * n_sc + n] =
                (0..scenario.num_users()).map(|k| scenario.enb_gain(k, cell, n) * p.get(k, n)).sum();
        }
    }
    out
}

/// Constraint slack `Q − Σ_k A·p`: a subgradient of the dual function at any
/// `ν` for which `p` maximizes the Lagrangian.
pub fn subgradient(scenario: &Scenario, p: &PowerProfile) -> Vec<f64> {
    interference_at_enbs(scenario, p).iter().zip(scenario.thresholds()).map(|(i, q)| q - i).collect()
}

pub fn lagrangian_value(scenario: &Scenario, p: &PowerProfile, multipliers: &[f64]) -> f64 {
    let slack = subgradient(scenario, p);
    rate::sum_rate(scenario, p) + multipliers.iter().zip(&slack).map(|(v, d)| v * d).sum::<f64>()
}

/// Largest `interference / Q` over constraints with `Q > 0`. A constraint
/// with `Q = 0` counts as infinitely violated if it receives any power.
pub fn max_interference_ratio(scenario: &Scenario, p: &PowerProfile) -> f64 {
    interference_at_enbs(scenario, p)
        .iter()
        .zip(scenario.thresholds())
        .map(|(&i, &q)| {
            if q > 0.0 {
                i / q
            } else if i > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Scales all powers on every subcarrier whose interference exceeds a
/// threshold by the smallest `Q / interference` ratio over the eNBs, so the
/// result satisfies every constraint. Budgets and masks stay satisfied.
pub fn restore_feasibility(scenario: &Scenario, p: &PowerProfile) -> PowerProfile {
    let n_sc = scenario.num_subcarriers();
    let load = interference_at_enbs(scenario, p);
    let mut out = p.clone();
    for n in 0..n_sc {
        let mut factor: f64 = 1.0;
        for cell in 0..scenario.num_cells() {
            let (i, q) = (load[cell * n_sc + n], scenario.threshold(cell, n));
            if i > q {
                factor = factor.min(q / i);
            }
        }
        if factor < 1.0 {
            for k in 0..scenario.num_users() {
                out.set(k, n, p.get(k, n) * factor);
            }
        }
    }
    out
}

/// Local maximizer of `L(·, ν)` reached by the penalized dynamics from
/// `p_init`.
pub fn inner_solve(
    scenario: &Scenario,
    multipliers: &[f64],
    p_init: &PowerProfile,
    order: &[usize],
    options: &DynamicsOptions,
) -> Result<AllocationResult> {
    game::penalized_run(scenario, p_init, order, multipliers, options)
}

/// Ellipsoid `{x : (x − c)ᵀ P⁻¹ (x − c) ≤ 1}` over the multipliers, stored
/// through its center `c` and shape matrix `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub iteration: usize,
    /// `ln √det P`, the log-volume up to the unit-ball constant.
    pub log_volume: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Moved(DualState),
    /// The cut direction vanished: the center is optimal.
    Stationary,
}

impl DualState {
    /// Ball of radius `radius` around `center`.
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        let m = center.len();
        if m == 0 || !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidInput(format!("ellipsoid needs a positive radius and dimension, got {radius} in {m}-D")));
        }
        let shape = DMatrix::identity(m, m) * (radius * radius);
        Ok(Self { center: DVector::from_vec(center), shape, iteration: 0, log_volume: m as f64 * radius.ln() })
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    pub fn multipliers(&self) -> Vec<f64> {
        self.center.iter().copied().collect()
    }
}

fn log_volume(shape: &DMatrix<f64>) -> Option<f64> {
    let chol = nalgebra::Cholesky::new(shape.clone())?;
    Some(chol.l().diagonal().iter().map(|d| d.ln()).sum())
}

/// Central cut keeping the half-ellipsoid `{x : dᵀ(x − c) ≤ 0}`.
pub fn ellipsoid_step(state: &DualState, d: &[f64]) -> Result<StepOutcome> {
    let m = state.dimension();
    if d.len() != m {
        return Err(Error::InvalidInput(format!("cut has {} entries for a {m}-D ellipsoid", d.len())));
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite cut direction".into()));
    }
    let d = DVector::from_column_slice(d);
    let pd = &state.shape * &d;
    let norm2 = d.dot(&pd);
    if !(norm2 > 0.0) {
        return Ok(StepOutcome::Stationary);
    }
    let step = pd / norm2.sqrt();
    let mf = m as f64;
    let center = &state.center - &step / (mf + 1.0);
    let mut shape = if m == 1 {
        &state.shape / 4.0
    } else {
        (&state.shape - &step * step.transpose() * (2.0 / (mf + 1.0))) * (mf * mf / (mf * mf - 1.0))
    };
    shape = (&shape + shape.transpose()) * 0.5;
    let log_volume = log_volume(&shape)
        .ok_or_else(|| Error::Numerical(format!("ellipsoid shape lost definiteness at step {}", state.iteration + 1)))?;
    Ok(StepOutcome::Moved(DualState { center, shape, iteration: state.iteration + 1, log_volume }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualBoundOptions {
    /// Random scheduling orders per dual evaluation (the identity order is
    /// always the first).
    pub orders: usize,
    /// Seed for the random orders.
    pub order_seed: u64,
    /// Initial ball radius in normalized units `ν·Q`; `None` uses the dual
    /// value at `ν = 0`.
    pub radius: Option<f64>,
    /// Stop once the ellipsoid volume falls below this fraction of the
    /// initial one.
    pub volume_tol: f64,
    /// Step cap; `None` means `200·M`.
    pub max_steps: Option<usize>,
    /// Additional starting profiles for every inner maximization.
    pub extra_inits: Vec<PowerProfile>,
    pub dynamics: DynamicsOptions,
}

impl Default for DualBoundOptions {
    fn default() -> Self {
        Self {
            orders: 6,
            order_seed: 0,
            radius: None,
            volume_tol: 1e-12,
            max_steps: None,
            extra_inits: Vec::new(),
            dynamics: DynamicsOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualBoundResult {
    /// Smallest dual value evaluated.
    pub bound: f64,
    /// Multipliers at which it was attained.
    pub multipliers: Vec<f64>,
    /// Lagrangian maximizer found at those multipliers.
    pub maximizer: PowerProfile,
    /// Every dual evaluation in order.
    pub evaluations: Vec<f64>,
    pub steps: usize,
    /// True when the run stopped on a stationary center or on the volume
    /// criterion rather than the step cap or a numerical failure.
    pub converged: bool,
    /// Set when the ellipsoid degenerated numerically before the volume
    /// criterion was met.
    pub collapsed: bool,
}

/// Minimizes the dual function over `ν ≥ 0` with central-cut ellipsoids.
///
/// The search runs in normalized coordinates `x = ν·Q` over the constraints
/// with `Q > 0` (the others keep `ν = 0`). Since `g(ν) ≥ L(0, ν) = Σ x`,
/// every minimizer lies in the simplex `x ≥ 0, Σ x ≤ g(0)`, so the initial
/// ellipsoid is the ball of radius `g(0)` around the origin. Centers outside
/// the simplex get a feasibility cut instead of a dual evaluation.
pub fn dual_upper_bound(scenario: &Scenario, options: &DualBoundOptions) -> Result<DualBoundResult> {
    let m_all = scenario.num_constraints();
    let k = scenario.num_users();
    if options.orders == 0 {
        return Err(Error::InvalidInput("dual bound needs at least one scheduling order".into()));
    }
    for p in &options.extra_inits {
        p.check_feasible(scenario, 1e-9)?;
    }
    let q = scenario.thresholds();
    let active: Vec<usize> = (0..m_all).filter(|&i| q[i] > 0.0).collect();
    let m = active.len();
    let mut rng = ChaCha20Rng::seed_from_u64(options.order_seed);
    let orders = game::random_orders(k, options.orders, &mut rng);
    let default_init = game::default_initial_power(scenario)?;
    let max_steps = options.max_steps.unwrap_or(200 * m);

    let evaluate = |nu: &[f64], warm: &PowerProfile| -> Result<AllocationResult> {
        let mut inits = vec![default_init.clone(), warm.clone()];
        inits.extend(options.extra_inits.iter().cloned());
        Ok(game::multistart_penalized(scenario, &orders, &inits, nu, &options.dynamics)?.best)
    };
    let to_multipliers = |x: &[f64]| -> Vec<f64> {
        let mut nu = vec![0.0; m_all];
        for (j, &i) in active.iter().enumerate() {
            nu[i] = x[j] / q[i];
        }
        nu
    };

    let origin = vec![0.0; m_all];
    let first = evaluate(&origin, &PowerProfile::zeros(k, scenario.num_subcarriers()))?;
    let g0 = first.objective;
    let mut evaluations = vec![g0];
    let mut best = (g0, origin.clone(), first.powers.clone());
    let radius = options.radius.unwrap_or(g0);
    if m == 0 || !(radius > 0.0 && radius.is_finite()) {
        return Ok(DualBoundResult {
            bound: g0,
            multipliers: origin,
            maximizer: first.powers,
            evaluations,
            steps: 0,
            converged: true,
            collapsed: false,
        });
    }

    let mut state = DualState::ball(vec![0.0; m], radius)?;
    let stop_log_volume = state.log_volume + options.volume_tol.ln();
    let mut pending = Some(first);
    let mut warm = best.2.clone();
    let mut converged = false;
    let mut collapsed = false;

    while state.iteration < max_steps {
        let x = state.multipliers();
        let negative = x.iter().enumerate().filter(|(_, v)| **v < 0.0).min_by(|a, b| a.1.total_cmp(b.1));
        let cut = if let Some((idx, _)) = negative {
            let mut e = vec![0.0; m];
            e[idx] = -1.0;
            e
        } else if x.iter().sum::<f64>() > g0 {
            vec![1.0; m]
        } else {
            let nu = to_multipliers(&x);
            let run = match pending.take() {
                Some(r) => r,
                None => {
                    let r = evaluate(&nu, &warm)?;
                    evaluations.push(r.objective);
                    r
                }
            };
            if run.objective < best.0 {
                best = (run.objective, nu, run.powers.clone());
            }
            let d = subgradient(scenario, &run.powers);
            warm = run.powers;
            active.iter().map(|&i| d[i] / q[i]).collect()
        };
        pending = None;
        match ellipsoid_step(&state, &cut) {
            Ok(StepOutcome::Moved(next)) => state = next,
            Ok(StepOutcome::Stationary) => {
                converged = true;
                break;
            }
            Err(Error::Numerical(msg)) => {
                log::warn!("dual bound stopped early: {msg}");
                collapsed = true;
                break;
            }
            Err(e) => return Err(e),
        }
        if state.log_volume < stop_log_volume {
            converged = true;
            break;
        }
    }

    let (bound, multipliers, maximizer) = best;
    Ok(DualBoundResult { bound, multipliers, maximizer, evaluations, steps: state.iteration, converged, collapsed })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IadrmpicOptions {
    /// Subgradient step on the normalized multipliers `ν·Q`.
    pub step_size: f64,
    /// Stop once no couple's power vector moves by more than this fraction
    /// of the largest power vector norm.
    pub epsilon: f64,
    /// Stop only once the projected normalized multiplier step, divided by
    /// the step size, is below this value: every constraint is then within
    /// this fraction of its threshold or slack with a zero multiplier.
    pub feasibility_tol: f64,
    pub max_outer: usize,
    /// Halve the step when the power change has not reached a new minimum
    /// for this many outer steps.
    pub oscillation_window: usize,
    /// Scheduling order of the inner dynamics; `None` is ascending index.
    pub order: Option<Vec<usize>>,
    /// Starting powers; `None` uses [`game::default_initial_power`].
    pub p_init: Option<PowerProfile>,
    pub dynamics: DynamicsOptions,
}

impl Default for IadrmpicOptions {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            epsilon: 1e-4,
            feasibility_tol: 1e-2,
            max_outer: 5000,
            oscillation_window: 20,
            order: None,
            p_init: None,
            dynamics: DynamicsOptions::default(),
        }
    }
}

/// One outer step of [`iadrmpic_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub step: usize,
    pub multipliers: Vec<f64>,
    pub interference: Vec<f64>,
    pub primal_value: f64,
    /// `L(p̃, ν)` at the local maximizer.
    pub dual_value: f64,
    pub power_change: f64,
    pub step_size: f64,
    pub inner_rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnderlayResult {
    pub powers: PowerProfile,
    pub multipliers: Vec<f64>,
    /// Aggregate interference per (eNB, subcarrier) at the final powers.
    pub interference: Vec<f64>,
    pub rates: rate::RateReport,
    /// Sum rate at `powers`, which may exceed thresholds by up to the
    /// feasibility tolerance.
    pub primal_value: f64,
    /// `powers` after [`restore_feasibility`].
    pub feasible_powers: PowerProfile,
    pub feasible_value: f64,
    /// Local Lagrangian value `L(p̃, ν)` at the final multipliers.
    pub dual_value: f64,
    pub dual_bound: Option<f64>,
    pub trace: Vec<OuterRecord>,
    pub converged: bool,
    pub nash_gap: f64,
    /// Largest relative violation of the local subgradient inequality over
    /// all outer steps.
    pub subgradient_violation: f64,
    pub total_inner_rounds: usize,
}

impl UnderlayResult {
    pub fn max_interference_ratio(&self, scenario: &Scenario) -> f64 {
        max_interference_ratio(scenario, &self.powers)
    }
}

/// Projected subgradient heuristic on the multipliers. The inner step is
/// the penalized dynamics started from the previous local maximizer, so the
/// local dual value satisfies
/// `L(p̃', μ) ≥ L(p̃, ν) + d(p̃)ᵀ(μ − ν)` at every step.
pub fn iadrmpic_run(scenario: &Scenario, options: &IadrmpicOptions) -> Result<UnderlayResult> {
    if !(options.step_size > 0.0 && options.step_size.is_finite()) {
        return Err(Error::InvalidInput(format!("step size must be positive, got {}", options.step_size)));
    }
    let k = scenario.num_users();
    let order = options.order.clone().unwrap_or_else(|| (0..k).collect());
    let p_init = match &options.p_init {
        Some(p) => p.clone(),
        None => game::default_initial_power(scenario)?,
    };
    let q = scenario.thresholds();
    let mut nu = vec![0.0; scenario.num_constraints()];
    let mut gamma = options.step_size;

    let mut current = inner_solve(scenario, &nu, &p_init, &order, &options.dynamics)?;
    let mut total_inner_rounds = current.trace.rounds;
    let mut trace = Vec::new();
    let mut violation: f64 = 0.0;
    let mut converged = false;
    let mut best_change = f64::INFINITY;
    let mut since_best = 0;

    for step in 1..=options.max_outer {
        let d = subgradient(scenario, &current.powers);
        let next_nu: Vec<f64> = nu
            .iter()
            .zip(&d)
            .zip(q)
            .map(|((&v, &g), &qq)| if qq > 0.0 { (v - gamma * g / (qq * qq)).max(0.0) } else { v })
            .collect();
        if next_nu == nu {
            // The penalized problem is unchanged; the current powers stand.
            converged = true;
            break;
        }
        let stationarity = nu
            .iter()
            .zip(&next_nu)
            .zip(q)
            .map(|((a, b), qq)| (a - b).abs() * qq / gamma)
            .fold(0.0, f64::max);
        let next = inner_solve(scenario, &next_nu, &current.powers, &order, &options.dynamics)?;
        total_inner_rounds += next.trace.rounds;

        let predicted = lagrangian_value(scenario, &current.powers, &nu)
            + d.iter().zip(next_nu.iter().zip(&nu)).map(|(g, (a, b))| g * (a - b)).sum::<f64>();
        let scale = predicted.abs().max(next.objective.abs()).max(1.0);
        violation = violation.max((predicted - next.objective) / scale);

        let mut change: f64 = 0.0;
        let mut size: f64 = 0.0;
        for user in 0..k {
            let diff: f64 =
                current.powers.row(user).iter().zip(next.powers.row(user)).map(|(a, b)| (a - b).powi(2)).sum();
            change = change.max(diff.sqrt());
            size = size.max(next.powers.row(user).iter().map(|x| x * x).sum::<f64>().sqrt());
        }

        trace.push(OuterRecord {
            step,
            multipliers: next_nu.clone(),
            interference: interference_at_enbs(scenario, &next.powers),
            primal_value: next.rates.sum_rate,
            dual_value: next.objective,
            power_change: change,
            step_size: gamma,
            inner_rounds: next.trace.rounds,
        });
        nu = next_nu;
        current = next;

        if change <= options.epsilon * size && stationarity <= options.feasibility_tol {
            converged = true;
            break;
        }
        if change < best_change {
            best_change = change;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= options.oscillation_window {
                gamma *= 0.5;
                since_best = 0;
                best_change = change;
                log::debug!("subgradient step halved to {gamma} at outer step {step}");
            }
        }
    }
    if !converged {
        log::warn!("interference-constrained heuristic stopped after {} outer steps", options.max_outer);
    }
    if violation > 1e-9 {
        log::warn!("local subgradient inequality violated by {violation:e}");
    }

    let feasible_powers = restore_feasibility(scenario, &current.powers);
    Ok(UnderlayResult {
        feasible_value: rate::sum_rate(scenario, &feasible_powers),
        feasible_powers,
        interference: interference_at_enbs(scenario, &current.powers),
        primal_value: current.rates.sum_rate,
        dual_value: current.objective,
        rates: current.rates,
        nash_gap: current.nash_gap,
        powers: current.powers,
        multipliers: nu,
        dual_bound: None,
        trace,
        converged,
        subgradient_violation: violation,
        total_inner_rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::test_util::{random_feasible_profile, random_scenario};
    use crate::subproblem::{self, SubproblemInstance};
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lagrangian_reduces_to_sum_rate_and_prices() {
        let sc = random_scenario(1, 3, 3, 2);
        let p = random_feasible_profile(&sc, 1);
        assert_eq!(lagrangian_value(&sc, &p, &[0.0; 6]), rate::sum_rate(&sc, &p));
        let nu: Vec<f64> = (1..=6).map(f64::from).collect();
        let zero = PowerProfile::zeros(3, 3);
        let expected: f64 = nu.iter().zip(sc.thresholds()).map(|(v, q)| v * q).sum();
        assert_relative_eq!(lagrangian_value(&sc, &zero, &nu), expected, max_relative = 1e-15);
    }

    #[test]
    fn lagrangian_matches_term_by_term() {
        let sc = random_scenario(2, 3, 2, 2);
        let p = random_feasible_profile(&sc, 2);
        let nu = [0.3, 0.0, 1.2, 0.7];
        let mut expected = rate::sum_rate(&sc, &p);
        for b in 0..2 {
            for n in 0..2 {
                let mut load = 0.0;
                for k in 0..3 {
                    load += sc.enb_gain(k, b, n) * p.get(k, n);
                }
                expected += nu[b * 2 + n] * (sc.threshold(b, n) - load);
            }
        }
        assert_relative_eq!(lagrangian_value(&sc, &p, &nu), expected, max_relative = 1e-12);
    }

    #[test]
    fn subgradient_is_threshold_slack() {
        let sc = random_scenario(3, 2, 2, 1);
        let zero = PowerProfile::zeros(2, 2);
        assert_eq!(subgradient(&sc, &zero), sc.thresholds().to_vec());
        let mut p = PowerProfile::zeros(2, 2);
        p.set(0, 1, sc.threshold(0, 1) / sc.enb_gain(0, 0, 1));
        let d = subgradient(&sc, &p);
        assert!(d[1].abs() <= 1e-15 * sc.threshold(0, 1));
    }

    #[test]
    fn zero_multipliers_reproduce_plain_dynamics() {
        let sc = random_scenario(4, 3, 3, 1);
        let init = game::default_initial_power(&sc).unwrap();
        let opts = DynamicsOptions::default();
        let plain = game::iadrmp_run(&sc, &init, &[0, 1, 2], &opts).unwrap();
        let inner = inner_solve(&sc, &[0.0; 3], &init, &[0, 1, 2], &opts).unwrap();
        assert_eq!(plain.powers, inner.powers);
        assert_eq!(plain.trace.round_values, inner.trace.round_values);
    }

    #[test]
    fn huge_price_clears_subcarrier() {
        let sc = random_scenario(5, 3, 3, 1);
        let init = game::default_initial_power(&sc).unwrap();
        let nu = [0.0, 1e12, 0.0];
        let res = inner_solve(&sc, &nu, &init, &[0, 1, 2], &DynamicsOptions::default()).unwrap();
        assert!(interference_at_enbs(&sc, &res.powers)[1] < 1e-3 * sc.threshold(0, 1));
        assert!(res.trace.is_monotone(1e-9));
    }

    #[test]
    fn single_couple_is_shifted_waterfilling() {
        let sc = random_scenario(6, 1, 4, 1);
        let nu = [0.5, 0.1, 2.0, 0.0];
        let res = inner_solve(&sc, &nu, &PowerProfile::zeros(1, 4), &[0], &DynamicsOptions::default()).unwrap();
        let inst = SubproblemInstance {
            interference: rate::normalized_interference_row(&sc, &res.powers, 0),
            penalty: (0..4).map(|n| -nu[n] * sc.enb_gain(0, 0, n)).collect(),
            budget: sc.budget(0),
            mask: sc.mask_row(0).to_vec(),
        };
        let sol = subproblem::solve(&inst).unwrap();
        assert!(subproblem::kkt_residual(&inst, res.powers.row(0), sol.mu) < 1e-6);
    }

    #[test]
    fn restoration_meets_every_threshold() {
        let sc = random_scenario(9, 3, 3, 2).with_threshold(0.05).unwrap();
        let p = random_feasible_profile(&sc, 9);
        assert!(max_interference_ratio(&sc, &p) > 1.0);
        let fixed = restore_feasibility(&sc, &p);
        assert!(max_interference_ratio(&sc, &fixed) <= 1.0 + 1e-12);
        fixed.check_feasible(&sc, 0.0).unwrap();
        let slack = sc.with_threshold(1e6).unwrap();
        assert_eq!(restore_feasibility(&slack, &p), p);
    }

    #[test]
    fn ellipsoid_worked_step() {
        let state = DualState::ball(vec![0.0, 0.0], 1.0).unwrap();
        let StepOutcome::Moved(next) = ellipsoid_step(&state, &[1.0, 0.0]).unwrap() else { panic!() };
        assert_relative_eq!(next.center[0], -1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(next.center[1], 0.0);
        assert_relative_eq!(next.shape[(0, 0)], 4.0 / 9.0, epsilon = 1e-15);
        assert_relative_eq!(next.shape[(1, 1)], 4.0 / 3.0, epsilon = 1e-15);
        assert_eq!(next.shape[(0, 1)], 0.0);
    }

    #[test]
    fn axis_cut_moves_center_by_one_over_m_plus_one() {
        for m in 2..6 {
            for axis in 0..m {
                let state = DualState::ball(vec![0.0; m], 1.0).unwrap();
                let mut d = vec![0.0; m];
                d[axis] = 2.5;
                let StepOutcome::Moved(next) = ellipsoid_step(&state, &d).unwrap() else { panic!() };
                for j in 0..m {
                    let expected = if j == axis { -1.0 / (m as f64 + 1.0) } else { 0.0 };
                    assert_relative_eq!(next.center[j], expected, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn one_dimensional_cut_halves_interval() {
        let state = DualState::ball(vec![1.0], 2.0).unwrap();
        let StepOutcome::Moved(next) = ellipsoid_step(&state, &[3.0]).unwrap() else { panic!() };
        assert_eq!(next.center[0], 0.0);
        assert_eq!(next.shape[(0, 0)], 1.0);
    }

    #[test]
    fn volume_shrinks_at_the_standard_rate() {
        let m = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut state = DualState::ball(vec![0.0; m], 1.0).unwrap();
        let expected = (-1.0 / (2.0 * m as f64)).exp();
        for _ in 0..100 {
            let d: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let StepOutcome::Moved(next) = ellipsoid_step(&state, &d).unwrap() else { panic!() };
            let ratio = (next.log_volume - state.log_volume).exp();
            assert!(ratio < 1.0);
            assert!((ratio / expected - 1.0).abs() < 0.05, "ratio {ratio}");
            state = next;
        }
    }

    #[test]
    fn zero_cut_is_stationary() {
        let state = DualState::ball(vec![0.0; 3], 1.0).unwrap();
        assert_eq!(ellipsoid_step(&state, &[0.0; 3]).unwrap(), StepOutcome::Stationary);
        assert!(ellipsoid_step(&state, &[0.0; 2]).is_err());
    }

    #[test]
    fn slack_constraints_leave_multipliers_at_zero() {
        let sc = random_scenario(8, 3, 2, 1).with_threshold(1e6).unwrap();
        let opts = IadrmpicOptions::default();
        let res = iadrmpic_run(&sc, &opts).unwrap();
        let init = game::default_initial_power(&sc).unwrap();
        let plain = game::iadrmp_run(&sc, &init, &[0, 1, 2], &opts.dynamics).unwrap();
        assert!(res.multipliers.iter().all(|&v| v == 0.0));
        assert_eq!(res.powers, plain.powers);
        assert!(res.converged);
    }

    #[test]
    fn subgradient_inequality_holds() {
        for seed in 0..5 {
            let sc = random_scenario(seed, 3, 2, 1).with_threshold(0.05).unwrap();
            let res = iadrmpic_run(&sc, &IadrmpicOptions::default()).unwrap();
            assert!(res.subgradient_violation <= 1e-9, "seed {seed}: {}", res.subgradient_violation);
        }
    }
}
