//! Per-couple linearized allocation:
//!
//! ```text
//! maximize   Σ_n log2(1 + p_n / i_n) + Σ_n α_n p_n
//! subject to 0 ≤ p_n ≤ mask_n,  Σ_n p_n ≤ budget
//! ```
//!
//! with `i_n > 0` and penalties `α_n ≤ 0`. Stationarity gives
//! `p_n(μ) = [1 / (ln2·(μ - α_n)) - i_n]` clipped to `[0, mask_n]`, where `μ`
//! prices the budget. The unconstrained candidate `μ = 0` is returned when it
//! fits the budget; otherwise `μ` is bisected on `(0, max_n 1/(ln2·i_n)]`,
//! over which `Σ p_n(μ)` is continuous and non-increasing.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemInstance {
    /// Normalized interference `i_n` (W), strictly positive.
    pub interference: Vec<f64>,
    /// Penalty slopes `α_n ≤ 0`, including any multiplier terms.
    pub penalty: Vec<f64>,
    pub budget: f64,
    pub mask: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub powers: Vec<f64>,
    /// Multiplier of the total-power constraint.
    pub mu: f64,
    pub objective: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bisection stops once `|Σp - budget| ≤ budget_rel_tol · budget`.
    pub budget_rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { budget_rel_tol: 1e-10, max_iter: 200 }
    }
}

impl SubproblemInstance {
    pub fn len(&self) -> usize {
        self.interference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interference.is_empty()
    }

    fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.penalty.len() != n || self.mask.len() != n {
            return Err(Error::InvalidInput(format!(
                "subproblem vectors disagree in length ({n}, {}, {})",
                self.penalty.len(),
                self.mask.len()
            )));
        }
        if !(self.budget.is_finite() && self.budget >= 0.0) {
            return Err(Error::InvalidInput(format!("budget must be finite and non-negative, got {}", self.budget)));
        }
        for i in 0..n {
            let (x, a, m) = (self.interference[i], self.penalty[i], self.mask[i]);
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::InvalidInput(format!("interference[{i}] = {x} must be finite and positive")));
            }
            if !(a.is_finite() && a <= 0.0) {
                return Err(Error::InvalidInput(format!("penalty[{i}] = {a} must be finite and non-positive")));
            }
            if !(m.is_finite() && m >= 0.0) {
                return Err(Error::InvalidInput(format!("mask[{i}] = {m} must be finite and non-negative")));
            }
        }
        Ok(())
    }

    /// Objective value at `powers`.
    pub fn objective(&self, powers: &[f64]) -> f64 {
        powers
            .iter()
            .zip(&self.interference)
            .zip(&self.penalty)
            .map(|((p, i), a)| (p / i).ln_1p() / LN_2 + a * p)
            .sum()
    }

    /// Power on subcarrier `n` for budget price `mu`.
    #[inline]
    fn power_at(&self, n: usize, mu: f64) -> f64 {
        let slope = mu - self.penalty[n];
        if slope <= 0.0 {
            // α_n = 0 with μ = 0: the objective keeps increasing up to the cap.
            return self.mask[n];
        }
        (1.0 / (LN_2 * slope) - self.interference[n]).clamp(0.0, self.mask[n])
    }

    fn powers_at(&self, mu: f64) -> Vec<f64> {
        (0..self.len()).map(|n| self.power_at(n, mu)).collect()
    }
}

pub fn solve(instance: &SubproblemInstance) -> Result<SubproblemSolution> {
    solve_with(instance, SolverOptions::default())
}

pub fn solve_with(instance: &SubproblemInstance, options: SolverOptions) -> Result<SubproblemSolution> {
    instance.validate()?;
    let finish = |powers: Vec<f64>, mu: f64| {
        let objective = instance.objective(&powers);
        let kkt_residual = kkt_residual(instance, &powers, mu);
        SubproblemSolution { powers, mu, objective, kkt_residual }
    };

    if instance.budget == 0.0 || instance.mask.iter().all(|&m| m == 0.0) {
        return Ok(finish(vec![0.0; instance.len()], 0.0));
    }

    let free = instance.powers_at(0.0);
    if free.iter().sum::<f64>() <= instance.budget {
        return Ok(finish(free, 0.0));
    }

    let tol = options.budget_rel_tol * instance.budget;
    let mut lo = 0.0;
    let mut hi = instance.interference.iter().map(|i| 1.0 / (LN_2 * i)).fold(0.0, f64::max);
    let mut best = (f64::INFINITY, hi);
    for _ in 0..options.max_iter {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let used: f64 = (0..instance.len()).map(|n| instance.power_at(n, mid)).sum();
        let gap = used - instance.budget;
        if gap.abs() < best.0 && gap <= tol {
            best = (gap.abs(), mid);
        }
        if gap.abs() <= tol {
            return Ok(finish(instance.powers_at(mid), mid));
        }
        if gap > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Numerical(format!(
        "budget bisection stalled after {} iterations: best gap {:e} W (tolerance {tol:e}) at mu = {:e}, bracket [{lo:e}, {hi:e}]",
        options.max_iter, best.0, best.1
    )))
}

/// Largest relative violation of the optimality conditions at `(powers, mu)`:
/// stationarity on interior coordinates, the matching sign conditions on
/// coordinates at 0 or at the mask, primal feasibility and complementary
/// slackness. Stationarity terms are scaled by the magnitude of the terms
/// they balance and budget terms by the budget, so the value is unit-free.
pub fn kkt_residual(instance: &SubproblemInstance, powers: &[f64], mu: f64) -> f64 {
    let mut worst: f64 = 0.0;
    if mu < 0.0 {
        worst = worst.max(-mu);
    }
    for n in 0..instance.len() {
        let (p, i, a, m) = (powers[n], instance.interference[n], instance.penalty[n], instance.mask[n]);
        if p < 0.0 || p > m {
            worst = worst.max((p.max(0.0) - p.min(m)).abs() / m.max(f64::MIN_POSITIVE));
            continue;
        }
        if m == 0.0 {
            continue;
        }
        let marginal = 1.0 / (LN_2 * (i + p));
        let g = marginal + a - mu;
        let scale = marginal + a.abs() + mu;
        let violation = if p == 0.0 {
            g.max(0.0)
        } else if p == m {
            (-g).max(0.0)
        } else {
            g.abs()
        };
        worst = worst.max(violation / scale);
    }
    let used: f64 = powers.iter().sum();
    let budget = instance.budget.max(f64::MIN_POSITIVE);
    worst = worst.max((used - instance.budget).max(0.0) / budget);
    if mu > 0.0 {
        worst = worst.max((used - instance.budget).abs() / budget);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn instance(i: &[f64], a: &[f64], budget: f64, mask: &[f64]) -> SubproblemInstance {
        SubproblemInstance { interference: i.to_vec(), penalty: a.to_vec(), budget, mask: mask.to_vec() }
    }

    #[test]
    fn single_subcarrier_penalized_optimum() {
        let inst = instance(&[1.0], &[-1.0 / (2.0 * LN_2)], 100.0, &[100.0]);
        let sol = solve(&inst).unwrap();
        assert!((sol.powers[0] - 1.0).abs() < 1e-12);
        assert_eq!(sol.mu, 0.0);
        // Grid oracle over [0, 10] with step 1e-4.
        let (mut best_p, mut best_v) = (0.0, f64::NEG_INFINITY);
        for step in 0..=100_000 {
            let p = step as f64 * 1e-4;
            let v = inst.objective(&[p]);
            if v > best_v {
                best_v = v;
                best_p = p;
            }
        }
        assert!((best_p - 1.0).abs() <= 1e-3);
        assert!(sol.objective >= best_v - 1e-12);
    }

    #[test]
    fn symmetric_budget_split() {
        let sol = solve(&instance(&[1.0, 1.0], &[0.0, 0.0], 2.0, &[1e9, 1e9])).unwrap();
        assert!((sol.powers[0] - 1.0).abs() < 1e-9 && (sol.powers[1] - 1.0).abs() < 1e-9);
        assert!(sol.mu > 0.0);
        assert!(sol.kkt_residual < 1e-9);
    }

    #[test]
    fn cap_binds_before_budget() {
        let sol = solve(&instance(&[1.0], &[0.0], 5.0, &[2.0])).unwrap();
        assert_eq!(sol.powers, vec![2.0]);
        assert_eq!(sol.mu, 0.0);
    }

    #[test]
    fn classic_waterfilling_level() {
        let sol = solve(&instance(&[0.5], &[0.0], 3.0, &[1e9])).unwrap();
        assert!((sol.powers[0] - (1.0 / (LN_2 * sol.mu) - 0.5)).abs() < 1e-9);
        assert!((sol.powers[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn all_zero_masks_give_zero() {
        let sol = solve(&instance(&[1.0, 2.0], &[-0.1, 0.0], 1.0, &[0.0, 0.0])).unwrap();
        assert_eq!(sol.powers, vec![0.0, 0.0]);
        assert_eq!(sol.mu, 0.0);
    }

    #[test]
    fn interior_residual_is_tiny() {
        let inst = instance(&[1.0], &[-0.5], 10.0, &[10.0]);
        let sol = solve(&inst).unwrap();
        assert!(sol.kkt_residual < 1e-15);
    }

    #[test]
    fn residual_flags_bad_point() {
        let inst = instance(&[0.1, 0.2, 3.0], &[-0.1, 0.0, -0.2], 1.0, &[5.0, 5.0, 5.0]);
        // Whole budget on the worst subcarrier.
        assert!(kkt_residual(&inst, &[0.0, 0.0, 1.0], 0.0) > 1e-3);
        assert!(solve(&inst).unwrap().kkt_residual < 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(solve(&instance(&[0.0], &[0.0], 1.0, &[1.0])), Err(Error::InvalidInput(_))));
        assert!(matches!(solve(&instance(&[1.0], &[f64::NAN], 1.0, &[1.0])), Err(Error::InvalidInput(_))));
        assert!(matches!(solve(&instance(&[1.0], &[0.5], 1.0, &[1.0])), Err(Error::InvalidInput(_))));
    }

    fn arb_instance() -> impl Strategy<Value = SubproblemInstance> {
        (1usize..6).prop_flat_map(|n| {
            (
                prop::collection::vec(0.01f64..3.0, n),
                prop::collection::vec(prop_oneof![Just(0.0), -4.0f64..0.0], n),
                0.01f64..5.0,
                prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..4.0, Just(1e6)], n),
            )
                .prop_map(|(interference, penalty, budget, mask)| SubproblemInstance {
                    interference,
                    penalty,
                    budget,
                    mask,
                })
        })
    }

    proptest! {
        #[test]
        fn solution_is_feasible_and_stationary(inst in arb_instance()) {
            let sol = solve(&inst).unwrap();
            for (p, m) in sol.powers.iter().zip(&inst.mask) {
                prop_assert!(*p >= 0.0 && p <= m);
            }
            prop_assert!(sol.powers.iter().sum::<f64>() <= inst.budget * (1.0 + 1e-10));
            prop_assert!(sol.kkt_residual < 1e-6);
        }

        #[test]
        fn total_power_non_increasing_in_price(inst in arb_instance(), a in 0.0f64..5.0, b in 0.0f64..5.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let at = |mu: f64| inst.powers_at(mu).iter().sum::<f64>();
            prop_assert!(at(hi) <= at(lo) + 1e-12);
        }
    }
}
