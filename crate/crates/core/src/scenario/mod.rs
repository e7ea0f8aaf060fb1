//! Problem instances: channel gains, noise, power budgets, masks and
//! interference thresholds, plus the random multi-cell generator that
//! produces them.
//!
//! Tensors are stored flat in row-major order:
//!
//! * `gain[j][k][n]`: power gain from the transmitter of couple `j` to the
//!   receiver of couple `k` on subcarrier `n`,
//! * `enb_gain[k][b][n]`: transmitter of couple `k` to eNB `b`,
//! * `noise[k][n]`, `mask[k][n]`, `threshold[b][n]`.

mod channel;
mod io;
mod topology;

pub use channel::{sample_gains, ChannelConfig, GainTensors, RngStreams, StreamPurpose};
pub use io::{load_scenario, read_scenario, save_scenario, write_scenario};
pub use topology::{generate_topology, hex_centers, point_in_hex, D2dPair, Point, Topology, TopologyConfig};

use crate::error::{Error, Result};

/// How per-subcarrier power masks are populated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaskMode {
    /// `mask[k][n] = Q[b(k)][n] / A[k][b(k)][n]`; `cap` is used where the
    /// serving-eNB gain vanishes.
    InterferenceDerived { cap: f64 },
    /// The same cap on every couple and subcarrier.
    Constant(f64),
}

/// Owned, unchecked scenario contents. Turn into a [`Scenario`] with
/// [`Scenario::from_parts`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParts {
    pub num_users: usize,
    pub num_subcarriers: usize,
    pub num_cells: usize,
    pub gain: Vec<f64>,
    pub enb_gain: Vec<f64>,
    pub noise: Vec<f64>,
    pub budget: Vec<f64>,
    pub mask: Vec<f64>,
    pub threshold: Vec<f64>,
    pub serving: Vec<usize>,
}

/// Immutable problem instance shared by every algorithm in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    parts: ScenarioParts,
}

impl Scenario {
    pub fn from_parts(parts: ScenarioParts) -> Result<Self> {
        let (k, n, b) = (parts.num_users, parts.num_subcarriers, parts.num_cells);
        if k == 0 || n == 0 || b == 0 {
            return Err(Error::InvalidInput(format!(
                "scenario dimensions must be positive (K={k}, N={n}, B={b})"
            )));
        }
        check_len("gain", parts.gain.len(), k * k * n)?;
        check_len("enb_gain", parts.enb_gain.len(), k * b * n)?;
        check_len("noise", parts.noise.len(), k * n)?;
        check_len("budget", parts.budget.len(), k)?;
        check_len("mask", parts.mask.len(), k * n)?;
        check_len("threshold", parts.threshold.len(), b * n)?;
        check_len("serving", parts.serving.len(), k)?;

        if let Some(x) = parts.gain.iter().chain(&parts.enb_gain).find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::InvalidInput(format!("channel gains must be finite and non-negative, got {x}")));
        }
        for user in 0..k {
            for sc in 0..n {
                if parts.gain[(user * k + user) * n + sc] <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "direct gain of couple {user} on subcarrier {sc} must be positive"
                    )));
                }
            }
        }
        if let Some(x) = parts.noise.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidInput(format!("noise power must be positive, got {x}")));
        }
        if let Some(x) = parts.budget.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidInput(format!("power budget must be non-negative, got {x}")));
        }
        if let Some(x) = parts.mask.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::InvalidInput(format!("power mask must be finite and non-negative, got {x}")));
        }
        if let Some(x) = parts.threshold.iter().find(|q| q.is_nan() || **q < 0.0) {
            return Err(Error::InvalidInput(format!("interference threshold must be non-negative, got {x}")));
        }
        if let Some(s) = parts.serving.iter().find(|s| **s >= b) {
            return Err(Error::InvalidInput(format!("serving cell {s} out of range for B={b}")));
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &ScenarioParts {
        &self.parts
    }

    pub fn into_parts(self) -> ScenarioParts {
        self.parts
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.parts.num_users
    }

    #[inline]
    pub fn num_subcarriers(&self) -> usize {
        self.parts.num_subcarriers
    }

    #[inline]
    pub fn num_cells(&self) -> usize {
        self.parts.num_cells
    }

    /// Number of interference constraints, one per (eNB, subcarrier).
    #[inline]
    pub fn num_constraints(&self) -> usize {
        self.parts.num_cells * self.parts.num_subcarriers
    }

    /// Gain from the transmitter of couple `from` to the receiver of couple `to`.
    #[inline]
    pub fn gain(&self, from: usize, to: usize, n: usize) -> f64 {
        let (k, nn) = (self.parts.num_users, self.parts.num_subcarriers);
        self.parts.gain[(from * k + to) * nn + n]
    }

    /// Gain from the transmitter of couple `user` to eNB `cell`.
    #[inline]
    pub fn enb_gain(&self, user: usize, cell: usize, n: usize) -> f64 {
        let (b, nn) = (self.parts.num_cells, self.parts.num_subcarriers);
        self.parts.enb_gain[(user * b + cell) * nn + n]
    }

    #[inline]
    pub fn noise(&self, user: usize, n: usize) -> f64 {
        self.parts.noise[user * self.parts.num_subcarriers + n]
    }

    #[inline]
    pub fn budget(&self, user: usize) -> f64 {
        self.parts.budget[user]
    }

    #[inline]
    pub fn mask(&self, user: usize, n: usize) -> f64 {
        self.parts.mask[user * self.parts.num_subcarriers + n]
    }

    pub fn mask_row(&self, user: usize) -> &[f64] {
        let nn = self.parts.num_subcarriers;
        &self.parts.mask[user * nn..(user + 1) * nn]
    }

    #[inline]
    pub fn threshold(&self, cell: usize, n: usize) -> f64 {
        self.parts.threshold[cell * self.parts.num_subcarriers + n]
    }

    /// Flat `B × N` threshold vector, constraint index `b * N + n`.
    pub fn thresholds(&self) -> &[f64] {
        &self.parts.threshold
    }

    #[inline]
    pub fn serving_cell(&self, user: usize) -> usize {
        self.parts.serving[user]
    }

    /// Power masks for `mode` on this scenario's gains and thresholds.
    pub fn derive_masks(&self, mode: MaskMode) -> Vec<f64> {
        let (k, n) = (self.num_users(), self.num_subcarriers());
        let mut mask = vec![0.0; k * n];
        for user in 0..k {
            let cell = self.serving_cell(user);
            for sc in 0..n {
                mask[user * n + sc] = match mode {
                    MaskMode::Constant(value) => value,
                    MaskMode::InterferenceDerived { cap } => {
                        let a = self.enb_gain(user, cell, sc);
                        let q = self.threshold(cell, sc);
                        if a > 0.0 {
                            (q / a).min(cap)
                        } else {
                            log::warn!("couple {user} has zero gain to its eNB on subcarrier {sc}; mask set to cap {cap}");
                            cap
                        }
                    }
                };
            }
        }
        mask
    }

    pub fn with_masks(&self, mode: MaskMode) -> Result<Self> {
        let mut parts = self.parts.clone();
        parts.mask = self.derive_masks(mode);
        Self::from_parts(parts)
    }

    /// Same instance with every couple's budget set to `budget`.
    pub fn with_budget(&self, budget: f64) -> Result<Self> {
        let mut parts = self.parts.clone();
        parts.budget.iter_mut().for_each(|p| *p = budget);
        Self::from_parts(parts)
    }

    /// Same instance with a uniform interference threshold. Masks are left
    /// untouched; call [`Scenario::with_masks`] afterwards when they derive
    /// from the threshold.
    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        let mut parts = self.parts.clone();
        parts.threshold.iter_mut().for_each(|q| *q = threshold);
        Self::from_parts(parts)
    }

    /// Keeps only the listed subcarriers, in the given order.
    pub fn restrict_subcarriers(&self, subcarriers: &[usize]) -> Result<Self> {
        let (k, n, b) = (self.num_users(), self.num_subcarriers(), self.num_cells());
        if subcarriers.is_empty() || subcarriers.iter().any(|&s| s >= n) {
            return Err(Error::InvalidInput("subcarrier subset empty or out of range".into()));
        }
        let m = subcarriers.len();
        let pick = |data: &[f64], rows: usize| -> Vec<f64> {
            let mut out = Vec::with_capacity(rows * m);
            for r in 0..rows {
                out.extend(subcarriers.iter().map(|&s| data[r * n + s]));
            }
            out
        };
        Self::from_parts(ScenarioParts {
            num_users: k,
            num_subcarriers: m,
            num_cells: b,
            gain: pick(&self.parts.gain, k * k),
            enb_gain: pick(&self.parts.enb_gain, k * b),
            noise: pick(&self.parts.noise, k),
            budget: self.parts.budget.clone(),
            mask: pick(&self.parts.mask, k),
            threshold: pick(&self.parts.threshold, b),
            serving: self.parts.serving.clone(),
        })
    }

    /// Zeroes the mask of every couple that reaches an eNB on a subcarrier
    /// whose threshold is zero. Such a constraint can only hold with zero
    /// power, which no finite multiplier enforces.
    pub fn with_zero_threshold_shutdown(&self) -> Result<Self> {
        let (k, n, b) = (self.num_users(), self.num_subcarriers(), self.num_cells());
        let mut parts = self.parts.clone();
        for user in 0..k {
            for sc in 0..n {
                if (0..b).any(|cell| self.threshold(cell, sc) == 0.0 && self.enb_gain(user, cell, sc) > 0.0) {
                    parts.mask[user * n + sc] = 0.0;
                }
            }
        }
        Self::from_parts(parts)
    }
}

fn check_len(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::InvalidInput(format!("{name} has {got} entries, expected {want}")));
    }
    Ok(())
}

/// Transmit powers of every couple on every subcarrier, `K × N` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    num_users: usize,
    num_subcarriers: usize,
    data: Vec<f64>,
}

impl PowerProfile {
    pub fn zeros(num_users: usize, num_subcarriers: usize) -> Self {
        Self { num_users, num_subcarriers, data: vec![0.0; num_users * num_subcarriers] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let num_users = rows.len();
        let num_subcarriers = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_subcarriers) {
            return Err(Error::InvalidInput("ragged power profile".into()));
        }
        Ok(Self { num_users, num_subcarriers, data: rows.into_iter().flatten().collect() })
    }

    pub fn from_flat(num_users: usize, num_subcarriers: usize, data: Vec<f64>) -> Result<Self> {
        check_len("power profile", data.len(), num_users * num_subcarriers)?;
        Ok(Self { num_users, num_subcarriers, data })
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.num_users
    }

    #[inline]
    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    #[inline]
    pub fn get(&self, user: usize, n: usize) -> f64 {
        self.data[user * self.num_subcarriers + n]
    }

    #[inline]
    pub fn set(&mut self, user: usize, n: usize, value: f64) {
        self.data[user * self.num_subcarriers + n] = value;
    }

    pub fn row(&self, user: usize) -> &[f64] {
        &self.data[user * self.num_subcarriers..(user + 1) * self.num_subcarriers]
    }

    pub fn set_row(&mut self, user: usize, values: &[f64]) {
        self.data[user * self.num_subcarriers..(user + 1) * self.num_subcarriers].copy_from_slice(values);
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn user_total(&self, user: usize) -> f64 {
        self.row(user).iter().sum()
    }

    /// Checks box and budget feasibility against `scenario`. `tol` is the
    /// relative slack allowed on each budget.
    pub fn check_feasible(&self, scenario: &Scenario, tol: f64) -> Result<()> {
        if self.num_users != scenario.num_users() || self.num_subcarriers != scenario.num_subcarriers() {
            return Err(Error::InvalidInput(format!(
                "power profile is {}x{}, scenario is {}x{}",
                self.num_users,
                self.num_subcarriers,
                scenario.num_users(),
                scenario.num_subcarriers()
            )));
        }
        for user in 0..self.num_users {
            for n in 0..self.num_subcarriers {
                let p = self.get(user, n);
                let cap = scenario.mask(user, n);
                if !p.is_finite() || p < 0.0 || p > cap * (1.0 + tol) + f64::MIN_POSITIVE {
                    return Err(Error::InvalidInput(format!(
                        "power {p} of couple {user} on subcarrier {n} outside [0, {cap}]"
                    )));
                }
            }
            let total = self.user_total(user);
            let budget = scenario.budget(user);
            if total > budget * (1.0 + tol) {
                return Err(Error::InvalidInput(format!("couple {user} uses {total} W over budget {budget} W")));
            }
        }
        Ok(())
    }
}
