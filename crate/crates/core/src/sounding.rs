//! Measurement-based estimation of the penalty slopes.
//!
//! Each D2D receiver broadcasts a sounding tone with power `δ·p0` on every
//! subcarrier and each eNB one with power `ν·p0`. With reciprocal channels a
//! transmitter hears the receiver tones through the same gains it uses for
//! data, so after removing its own receiver's contribution and dividing by
//! `p0` it recovers its penalty slope without any message exchange.
//!
//! The two broadcast classes are assumed to use separate sounding resources,
//! so they are measured independently. Measurements are noiseless unless a
//! noise level is passed to [`measure_with_noise`].
//!
//! The own receiver's tone usually dominates the aggregate, so removing it
//! cancels most of the digits of a plain floating-point sum. Readings are
//! therefore accumulated with compensated addition and kept as `high + low`,
//! which makes the noiseless estimate exact to working precision.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::rate;
use crate::scenario::{PowerProfile, Scenario};

#[derive(Debug, Clone, PartialEq)]
pub struct SoundingFrame {
    /// Reference power (W).
    pub reference_power: f64,
    /// `K × N` receiver broadcast powers, row-major.
    pub rx_broadcast: Vec<f64>,
    /// `B × N` eNB broadcast powers, row-major.
    pub enb_broadcast: Vec<f64>,
}

/// Aggregate received sounding power at one transmitter, per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub from_receivers: Vec<f64>,
    /// Rounding residual of `from_receivers`.
    pub from_receivers_low: Vec<f64>,
    pub from_enbs: Vec<f64>,
}

/// Error-free addition: `a + b = sum + err` exactly.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let sum = a + b;
    let bp = sum - a;
    (sum, (a - (sum - bp)) + (b - bp))
}

/// Broadcast powers for joint state `p` and multipliers `multipliers`
/// (`B × N`, `None` meaning all zero).
pub fn build_frame(
    scenario: &Scenario,
    p: &PowerProfile,
    multipliers: Option<&[f64]>,
    reference_power: f64,
) -> SoundingFrame {
    let n = scenario.num_subcarriers();
    let mut rx_broadcast = Vec::with_capacity(scenario.num_users() * n);
    for user in 0..scenario.num_users() {
        rx_broadcast.extend(rate::delta(scenario, p, user).into_iter().map(|d| d * reference_power));
    }
    let enb_broadcast = match multipliers {
        Some(nu) => nu.iter().map(|v| v * reference_power).collect(),
        None => vec![0.0; scenario.num_constraints()],
    };
    SoundingFrame { reference_power, rx_broadcast, enb_broadcast }
}

/// What transmitter `user` receives on each subcarrier.
pub fn measure(scenario: &Scenario, frame: &SoundingFrame, user: usize) -> Measurement {
    let n_sc = scenario.num_subcarriers();
    let mut from_receivers = vec![0.0; n_sc];
    let mut from_receivers_low = vec![0.0; n_sc];
    let mut from_enbs = vec![0.0; n_sc];
    for n in 0..n_sc {
        let (mut high, mut low) = (0.0, 0.0);
        for rx in 0..scenario.num_users() {
            let (s, e) = two_sum(high, scenario.gain(user, rx, n) * frame.rx_broadcast[rx * n_sc + n]);
            high = s;
            low += e;
        }
        from_receivers[n] = high;
        from_receivers_low[n] = low;
        for cell in 0..scenario.num_cells() {
            from_enbs[n] += scenario.enb_gain(user, cell, n) * frame.enb_broadcast[cell * n_sc + n];
        }
    }
    Measurement { from_receivers, from_receivers_low, from_enbs }
}

/// [`measure`] with independent zero-mean Gaussian noise of standard
/// deviation `noise_std` (W) added to every reading.
pub fn measure_with_noise<R: Rng + ?Sized>(
    scenario: &Scenario,
    frame: &SoundingFrame,
    user: usize,
    noise_std: f64,
    rng: &mut R,
) -> Measurement {
    let mut m = measure(scenario, frame, user);
    for x in m.from_receivers.iter_mut().chain(m.from_enbs.iter_mut()) {
        let z: f64 = rng.sample(StandardNormal);
        *x += noise_std * z;
    }
    m
}

/// Penalty slopes of `user` recovered from a measurement. The own receiver's
/// tone is known locally (the transmitter knows its direct gain and `δ` is
/// fed back with the data link) and is subtracted before scaling.
pub fn estimate(scenario: &Scenario, frame: &SoundingFrame, user: usize, m: &Measurement) -> Vec<f64> {
    let n_sc = scenario.num_subcarriers();
    let p0 = frame.reference_power;
    (0..n_sc)
        .map(|n| {
            let own = scenario.gain(user, user, n) * frame.rx_broadcast[user * n_sc + n];
            -((m.from_receivers[n] - own) + m.from_receivers_low[n]) / p0 - m.from_enbs[n] / p0
        })
        .collect()
}

/// Noiseless measurement followed by [`estimate`].
pub fn measure_and_estimate(scenario: &Scenario, frame: &SoundingFrame, user: usize) -> Vec<f64> {
    estimate(scenario, frame, user, &measure(scenario, frame, user))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::test_util::{random_feasible_profile, random_scenario};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn zero_power_means_silent_receivers() {
        let sc = random_scenario(1, 3, 2, 1);
        let frame = build_frame(&sc, &PowerProfile::zeros(3, 2), None, 1e-3);
        assert!(frame.rx_broadcast.iter().all(|&x| x == 0.0));
        assert!(frame.enb_broadcast.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn lone_couple_estimates_zero() {
        let sc = random_scenario(2, 1, 3, 1);
        let p = random_feasible_profile(&sc, 2);
        let frame = build_frame(&sc, &p, None, 1.0);
        assert_eq!(measure_and_estimate(&sc, &frame, 0), vec![0.0; 3]);
    }

    #[test]
    fn broadcasts_are_scaled_delta() {
        let sc = random_scenario(3, 3, 3, 1);
        let p = random_feasible_profile(&sc, 3);
        let frame = build_frame(&sc, &p, None, 0.5);
        for user in 0..3 {
            for (n, d) in rate::delta(&sc, &p, user).into_iter().enumerate() {
                assert_eq!(frame.rx_broadcast[user * 3 + n], d * 0.5);
            }
        }
    }

    #[test]
    fn estimate_matches_alpha_without_multipliers() {
        for seed in 0..20 {
            let sc = random_scenario(seed, 3, 4, 1);
            let p = random_feasible_profile(&sc, seed);
            let frame = build_frame(&sc, &p, None, 1e-3);
            for user in 0..3 {
                let est = measure_and_estimate(&sc, &frame, user);
                for (a, b) in est.iter().zip(rate::alpha(&sc, &p, user)) {
                    assert!(rel(*a, b) < 1e-12, "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn estimate_includes_multiplier_prices() {
        let sc = random_scenario(4, 3, 3, 2);
        let p = random_feasible_profile(&sc, 4);
        let nu: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
        let frame = build_frame(&sc, &p, Some(&nu), 1e-2);
        for user in 0..3 {
            let est = measure_and_estimate(&sc, &frame, user);
            let alpha = rate::alpha(&sc, &p, user);
            for n in 0..3 {
                let price: f64 = (0..2).map(|b| nu[b * 3 + n] * sc.enb_gain(user, b, n)).sum();
                assert!(rel(est[n], alpha[n] - price) < 1e-12);
            }
        }
    }

    #[test]
    fn noise_hook_perturbs_readings() {
        let sc = random_scenario(5, 2, 2, 1);
        let p = random_feasible_profile(&sc, 5);
        let frame = build_frame(&sc, &p, None, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let clean = measure(&sc, &frame, 0);
        assert_eq!(measure_with_noise(&sc, &frame, 0, 0.0, &mut rng), clean);
        assert_ne!(measure_with_noise(&sc, &frame, 0, 1e-3, &mut rng), clean);
    }
}
