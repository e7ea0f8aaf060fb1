//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the algorithms under test; only the data types
//! and accessors of the library are used.

#![allow(dead_code)]

use std::io::Write;

use d2d_power::scenario::ScenarioParts;
use d2d_power::subproblem::SubproblemInstance;
use d2d_power::{PowerProfile, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes one line straight to the process stdout so it shows up even when
/// the harness captures test output.
pub fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {criterion:>2}: {verdict}  {detail}");
    let _ = out.flush();
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Unit-scale instance with strictly positive cross gains.
pub fn random_scenario(seed: u64, k: usize, n: usize, b: usize) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0fac);
    let mut gain = vec![0.0; k * k * n];
    for from in 0..k {
        for to in 0..k {
            for s in 0..n {
                gain[(from * k + to) * n + s] =
                    if from == to { rng.random_range(0.5..2.0) } else { rng.random_range(0.01..0.5) };
            }
        }
    }
    Scenario::from_parts(ScenarioParts {
        num_users: k,
        num_subcarriers: n,
        num_cells: b,
        gain,
        enb_gain: (0..k * b * n).map(|_| rng.random_range(0.05..1.0)).collect(),
        noise: (0..k * n).map(|_| rng.random_range(0.05..0.5)).collect(),
        budget: (0..k).map(|_| rng.random_range(0.5..3.0)).collect(),
        mask: (0..k * n).map(|_| rng.random_range(0.3..2.0)).collect(),
        threshold: (0..b * n).map(|_| rng.random_range(0.2..1.0)).collect(),
        serving: (0..k).map(|u| u % b).collect(),
    })
    .expect("valid random scenario")
}

/// Strictly positive powers under every mask, rows scaled into the budget.
pub fn random_interior_profile(sc: &Scenario, seed: u64) -> PowerProfile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0b0f_f11e);
    let (k, n) = (sc.num_users(), sc.num_subcarriers());
    let mut p = PowerProfile::zeros(k, n);
    for u in 0..k {
        let mut row: Vec<f64> = (0..n).map(|s| rng.random_range(0.05..1.0) * sc.mask(u, s)).collect();
        let total: f64 = row.iter().sum();
        if total > sc.budget(u) {
            row.iter_mut().for_each(|x| *x *= sc.budget(u) / total);
        }
        p.set_row(u, &row);
    }
    p
}

/// Rate of `user` from the SINR definition, explicit loops.
pub fn oracle_user_rate(sc: &Scenario, p: &PowerProfile, user: usize) -> f64 {
    (0..sc.num_subcarriers())
        .map(|n| {
            let mut den = sc.noise(user, n);
            for j in (0..sc.num_users()).filter(|&j| j != user) {
                den += sc.gain(j, user, n) * p.get(j, n);
            }
            (1.0 + sc.gain(user, user, n) * p.get(user, n) / den).log2()
        })
        .sum()
}

pub fn oracle_sum_rate(sc: &Scenario, p: &PowerProfile) -> f64 {
    (0..sc.num_users()).map(|u| oracle_user_rate(sc, p, u)).sum()
}

/// Sum of every rate except `user`'s.
pub fn oracle_others_rate(sc: &Scenario, p: &PowerProfile, user: usize) -> f64 {
    (0..sc.num_users()).filter(|&l| l != user).map(|l| oracle_user_rate(sc, p, l)).sum()
}

/// Central finite difference of the other couples' sum rate with respect to
/// `p[user][n]`.
pub fn fd_alpha(sc: &Scenario, p: &PowerProfile, user: usize) -> Vec<f64> {
    (0..sc.num_subcarriers())
        .map(|n| {
            let x = p.get(user, n);
            let h = 1e-4 * x.max(1e-3);
            let mut plus = p.clone();
            plus.set(user, n, x + h);
            let mut minus = p.clone();
            minus.set(user, n, x - h);
            (oracle_others_rate(sc, &plus, user) - oracle_others_rate(sc, &minus, user)) / (2.0 * h)
        })
        .collect()
}

/// `δ` from its definition: `−∂R_ℓ/∂I_ℓ` per unit of received interference
/// at receiver `ℓ`, i.e. `S / (ln2 · I · (I + S))` with `S` the received
/// signal and `I` the received interference plus noise.
pub fn oracle_delta(sc: &Scenario, p: &PowerProfile, user: usize) -> Vec<f64> {
    (0..sc.num_subcarriers())
        .map(|n| {
            let s = sc.gain(user, user, n) * p.get(user, n);
            let mut i = sc.noise(user, n);
            for j in (0..sc.num_users()).filter(|&j| j != user) {
                i += sc.gain(j, user, n) * p.get(j, n);
            }
            s / (std::f64::consts::LN_2 * i * (i + s))
        })
        .collect()
}

/// Random subproblem with unit-scale data; roughly a third of the instances
/// get a zero penalty on some subcarriers and loose masks.
pub fn random_subproblem(rng: &mut ChaCha8Rng, n: usize) -> SubproblemInstance {
    let budget = rng.random_range(0.1..4.0);
    SubproblemInstance {
        interference: (0..n).map(|_| 10f64.powf(rng.random_range(-1.3..0.5))).collect(),
        penalty: (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { -rng.random_range(0.0..3.0) }).collect(),
        budget,
        mask: (0..n)
            .map(|_| if rng.random_bool(0.3) { 10.0 * budget } else { rng.random_range(0.02..2.0) })
            .collect(),
    }
}

fn term(inst: &SubproblemInstance, n: usize, p: f64) -> f64 {
    (1.0 + p / inst.interference[n]).log2() + inst.penalty[n] * p
}

/// Maximizes a concave scalar function on `[0, hi]` by golden-section search.
fn golden_max(f: impl Fn(f64) -> f64, hi: f64) -> f64 {
    if hi <= 0.0 {
        return f(0.0);
    }
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        }
    }
    fc.max(fd).max(f(0.0)).max(f(hi))
}

/// Lower estimate of the subproblem optimum: the first `N − 1` powers run
/// over a uniform budget grid (dynamic programming over the separable
/// objective), the last one is optimized continuously on what is left.
/// Every candidate is feasible, so the value never exceeds the optimum.
pub fn grid_oracle(inst: &SubproblemInstance, steps: usize) -> f64 {
    let n = inst.len();
    let unit = inst.budget / steps as f64;
    // best[b]: best value of the first coordinates using exactly b units.
    let mut best = vec![f64::NEG_INFINITY; steps + 1];
    best[0] = 0.0;
    for s in 0..n - 1 {
        let cap = ((inst.mask[s] / unit).floor() as usize).min(steps);
        let table: Vec<f64> = (0..=cap).map(|q| term(inst, s, q as f64 * unit)).collect();
        let mut next = vec![f64::NEG_INFINITY; steps + 1];
        for (used, &v) in best.iter().enumerate() {
            if v == f64::NEG_INFINITY {
                continue;
            }
            for (q, t) in table.iter().enumerate().take(steps - used + 1) {
                let cand = v + t;
                if cand > next[used + q] {
                    next[used + q] = cand;
                }
            }
        }
        best = next;
    }
    let last = n - 1;
    best.iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .map(|(used, v)| {
            let room = (inst.budget - used as f64 * unit).max(0.0).min(inst.mask[last]);
            v + golden_max(|p| term(inst, last, p), room)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
