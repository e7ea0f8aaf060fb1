//! Shannon rates, normalized interference and the first-order terms used by
//! the linearized best response.
//!
//! Rates are in bits/s/Hz summed over subcarriers. Derivatives carry the
//! `1/ln 2` factor explicitly.

use std::f64::consts::LN_2;

use crate::scenario::{PowerProfile, Scenario};

/// Interference plus noise at the receiver of `user` on subcarrier `n`, in
/// watts: `Σ_{j≠user} G[j][user][n]·p[j][n] + σ²[user][n]`.
pub fn received_interference(scenario: &Scenario, p: &PowerProfile, user: usize, n: usize) -> f64 {
    let mut total = scenario.noise(user, n);
    for j in 0..scenario.num_users() {
        if j != user {
            total += scenario.gain(j, user, n) * p.get(j, n);
        }
    }
    total
}

/// Interference plus noise normalized by the direct gain, `i[user][n]`.
/// Always positive since the noise is.
pub fn normalized_interference(scenario: &Scenario, p: &PowerProfile, user: usize, n: usize) -> f64 {
    received_interference(scenario, p, user, n) / scenario.gain(user, user, n)
}

pub fn normalized_interference_row(scenario: &Scenario, p: &PowerProfile, user: usize) -> Vec<f64> {
    (0..scenario.num_subcarriers()).map(|n| normalized_interference(scenario, p, user, n)).collect()
}

#[inline]
fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / LN_2
}

pub fn user_rate(scenario: &Scenario, p: &PowerProfile, user: usize) -> f64 {
    (0..scenario.num_subcarriers())
        .map(|n| log2_1p(p.get(user, n) / normalized_interference(scenario, p, user, n)))
        .sum()
}

pub fn sum_rate(scenario: &Scenario, p: &PowerProfile) -> f64 {
    (0..scenario.num_users()).map(|k| user_rate(scenario, p, k)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    /// `K × N` row-major.
    pub per_subcarrier_sinr: Vec<f64>,
}

pub fn rate_report(scenario: &Scenario, p: &PowerProfile) -> RateReport {
    let (k, n) = (scenario.num_users(), scenario.num_subcarriers());
    let mut sinr = Vec::with_capacity(k * n);
    let mut per_user_rate = Vec::with_capacity(k);
    for user in 0..k {
        let mut rate = 0.0;
        for sc in 0..n {
            let s = p.get(user, sc) / normalized_interference(scenario, p, user, sc);
            rate += log2_1p(s);
            sinr.push(s);
        }
        per_user_rate.push(rate);
    }
    RateReport { sum_rate: per_user_rate.iter().sum(), per_user_rate, per_subcarrier_sinr: sinr }
}

/// Interference at receiver `other` excluding both `user` and `other`,
/// normalized by `other`'s direct gain (`i_{ℓ,k,n}`).
fn interference_without(scenario: &Scenario, p: &PowerProfile, other: usize, user: usize, n: usize) -> f64 {
    let mut total = scenario.noise(other, n);
    for j in 0..scenario.num_users() {
        if j != user && j != other {
            total += scenario.gain(j, other, n) * p.get(j, n);
        }
    }
    total / scenario.gain(other, other, n)
}

/// Sensitivity of the other couples' rates to the power of `user`:
/// `α[n] = ∂/∂p[user][n] Σ_{ℓ≠user} R_ℓ`, evaluated at `p`. Never positive.
pub fn alpha(scenario: &Scenario, p: &PowerProfile, user: usize) -> Vec<f64> {
    let k = scenario.num_users();
    (0..scenario.num_subcarriers())
        .map(|n| {
            let own = p.get(user, n);
            let mut acc = 0.0;
            for other in (0..k).filter(|&l| l != user) {
                let g_oo = scenario.gain(other, other, n);
                let g_uo = scenario.gain(user, other, n);
                let p_o = p.get(other, n);
                if g_uo == 0.0 || p_o == 0.0 {
                    continue;
                }
                let base = g_oo * interference_without(scenario, p, other, user, n) + g_uo * own;
                acc += g_oo * g_uo * p_o / (LN_2 * base * (base + g_oo * p_o));
            }
            -acc
        })
        .collect()
}

/// Per-receiver factor `δ[user][n]` that each receiver can measure locally;
/// `α[k][n] = -Σ_{ℓ≠k} G[k][ℓ][n]·δ[ℓ][n]`.
pub fn delta(scenario: &Scenario, p: &PowerProfile, user: usize) -> Vec<f64> {
    (0..scenario.num_subcarriers())
        .map(|n| {
            let signal = scenario.gain(user, user, n) * p.get(user, n);
            if signal == 0.0 {
                return 0.0;
            }
            let interference = received_interference(scenario, p, user, n);
            signal / (LN_2 * interference * (interference + signal))
        })
        .collect()
}

/// Linearized sum rate seen by `user` when it plays `x` while the others
/// keep `p`, with the interference it causes expanded to first order around
/// `p0`. Row `user` of `p` is ignored.
pub fn surrogate_rate(scenario: &Scenario, p: &PowerProfile, user: usize, x: &[f64], p0: &[f64]) -> f64 {
    let n_sc = scenario.num_subcarriers();
    let mut at_p0 = p.clone();
    at_p0.set_row(user, p0);
    let slope = alpha(scenario, &at_p0, user);
    let mut total = 0.0;
    for n in 0..n_sc {
        total += log2_1p(x[n] / normalized_interference(scenario, &at_p0, user, n));
        total += slope[n] * (x[n] - p0[n]);
        for other in (0..scenario.num_users()).filter(|&l| l != user) {
            let shifted = interference_without(scenario, p, other, user, n)
                + scenario.gain(user, other, n) / scenario.gain(other, other, n) * p0[n];
            total += log2_1p(p.get(other, n) / shifted);
        }
    }
    total
}
