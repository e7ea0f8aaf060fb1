use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Exp1, StandardNormal};

use super::{MaskMode, Scenario, ScenarioParts, Topology};
use crate::error::{Error, Result};

/// Large-scale and small-scale propagation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Gain at the 1 m reference distance.
    pub path_loss_constant: f64,
    pub path_loss_exponent: f64,
    /// Log-normal shadowing standard deviation (dB); 0 disables shadowing.
    pub shadowing_std_db: f64,
    /// Unit-mean exponential (Rayleigh power) fading per subcarrier.
    pub fading: bool,
    /// Distances are clamped to at least this value (m).
    pub min_distance: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { path_loss_constant: 1.0, path_loss_exponent: 4.0, shadowing_std_db: 8.0, fading: true, min_distance: 1.0 }
    }
}

impl ChannelConfig {
    /// Deterministic path loss only.
    pub fn path_loss_only() -> Self {
        Self { shadowing_std_db: 0.0, fading: false, ..Self::default() }
    }

    pub fn path_loss(&self, distance: f64) -> Result<f64> {
        let d = distance.max(self.min_distance);
        if !(d > 0.0) {
            return Err(Error::Internal(format!("zero link distance after clamping to {} m", self.min_distance)));
        }
        Ok(self.path_loss_constant * d.powf(-self.path_loss_exponent))
    }

    /// Per-subcarrier gains of one link: path loss times one shadowing draw
    /// shared across subcarriers times independent fading per subcarrier.
    /// Random draws happen even when shadowing or fading is disabled, so
    /// toggling them never shifts the stream of later links.
    pub fn sample_link<R: Rng + ?Sized>(&self, distance: f64, num_subcarriers: usize, rng: &mut R) -> Result<Vec<f64>> {
        let base = self.path_loss(distance)?;
        let z: f64 = rng.sample(StandardNormal);
        let shadow = 10f64.powf(self.shadowing_std_db * z / 10.0);
        Ok((0..num_subcarriers)
            .map(|_| {
                let f: f64 = rng.sample(Exp1);
                base * shadow * if self.fading { f } else { 1.0 }
            })
            .collect())
    }
}

/// Gain tensors drawn for a topology; see [`super`] for the layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTensors {
    pub num_users: usize,
    pub num_cells: usize,
    pub num_subcarriers: usize,
    pub gain: Vec<f64>,
    pub enb_gain: Vec<f64>,
}

/// Draws couple-to-couple and couple-to-eNB gains. Links are visited in
/// `(tx, rx)` row-major order, then `(tx, eNB)`.
pub fn sample_gains<R: Rng + ?Sized>(
    topology: &Topology,
    channel: &ChannelConfig,
    num_subcarriers: usize,
    rng: &mut R,
) -> Result<GainTensors> {
    let k = topology.num_pairs();
    let b = topology.num_cells();
    let n = num_subcarriers;
    let mut gain = Vec::with_capacity(k * k * n);
    for from in &topology.pairs {
        for to in &topology.pairs {
            gain.extend(channel.sample_link(from.tx.distance(&to.rx), n, rng)?);
        }
    }
    let mut enb_gain = Vec::with_capacity(k * b * n);
    for pair in &topology.pairs {
        for enb in &topology.enb_positions {
            enb_gain.extend(channel.sample_link(pair.tx.distance(enb), n, rng)?);
        }
    }
    Ok(GainTensors { num_users: k, num_cells: b, num_subcarriers: n, gain, enb_gain })
}

impl GainTensors {
    /// Assembles a scenario with uniform noise, budgets and thresholds and
    /// masks populated per `mask_mode`.
    pub fn into_scenario(
        self,
        topology: &Topology,
        noise: f64,
        budget: f64,
        threshold: f64,
        mask_mode: MaskMode,
    ) -> Result<Scenario> {
        let (k, b, n) = (self.num_users, self.num_cells, self.num_subcarriers);
        let parts = ScenarioParts {
            num_users: k,
            num_subcarriers: n,
            num_cells: b,
            gain: self.gain,
            enb_gain: self.enb_gain,
            noise: vec![noise; k * n],
            budget: vec![budget; k],
            mask: vec![0.0; k * n],
            threshold: vec![threshold; b * n],
            serving: topology.pairs.iter().map(|p| p.serving).collect(),
        };
        Scenario::from_parts(parts)?.with_masks(mask_mode)
    }
}

/// What a random stream is used for. Each purpose gets an independent key so
/// that, for instance, changing the number of multi-start orders never shifts
/// the channel draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Topology,
    Channel,
    Cellular,
    Orders,
    Measurement,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Topology => 0x746f_706f,
            StreamPurpose::Channel => 0x6368_616e,
            StreamPurpose::Cellular => 0x6365_6c6c,
            StreamPurpose::Orders => 0x6f72_6472,
            StreamPurpose::Measurement => 0x6d65_6173,
        }
    }
}

/// Derives every random stream of a campaign from one master seed:
/// ChaCha20 keyed by `master ^ purpose`, with the realization seed selecting
/// the ChaCha stream. Streams of different realizations never overlap, so
/// realizations can run in any order or in parallel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    pub master_seed: u64,
}

impl RngStreams {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn stream(&self, realization: u64, purpose: StreamPurpose) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.master_seed ^ purpose.tag());
        rng.set_stream(realization);
        rng
    }
}
