//! Campaign description file (TOML).
//!
//! Every section is optional; omitted values take the defaults of the
//! reference simulation setup (one 500 m cell, 8 couples, 8 subcarriers,
//! 0.25 W budget, 1e-13 W noise, 100 m maximum couple distance). Unknown keys
//! are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::scenario::{ChannelConfig, MaskMode, TopologyConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "overlay-iadrmp")]
    OverlayIadrmp,
    #[serde(rename = "overlay-iwf")]
    OverlayIwf,
    #[serde(rename = "overlay-multistart")]
    OverlayMultistart,
    #[serde(rename = "underlay-iadrmpic")]
    UnderlayIadrmpic,
    #[serde(rename = "underlay-ub")]
    UnderlayUpperBound,
    #[serde(rename = "mode-comparison")]
    ModeComparison,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::OverlayIadrmp,
        Mode::OverlayIwf,
        Mode::OverlayMultistart,
        Mode::UnderlayIadrmpic,
        Mode::UnderlayUpperBound,
        Mode::ModeComparison,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::OverlayIadrmp => "overlay-iadrmp",
            Mode::OverlayIwf => "overlay-iwf",
            Mode::OverlayMultistart => "overlay-multistart",
            Mode::UnderlayIadrmpic => "underlay-iadrmpic",
            Mode::UnderlayUpperBound => "underlay-ub",
            Mode::ModeComparison => "mode-comparison",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Mode::ALL.iter().map(|m| m.name()).collect();
            format!("unknown mode {s:?}; expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Either a number of realizations (seeds `0..count`) or explicit seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Seeds {
    pub fn to_vec(&self) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (0..*n).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologySection {
    pub num_cells: usize,
    pub cell_radius: f64,
    pub pairs_per_cell: usize,
    pub max_pair_distance: f64,
}

impl Default for TopologySection {
    fn default() -> Self {
        Self { num_cells: 1, cell_radius: 500.0, pairs_per_cell: 8, max_pair_distance: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub path_loss_constant: f64,
    pub path_loss_exponent: f64,
    pub shadowing_std_db: f64,
    pub fading: bool,
    pub min_distance: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let c = ChannelConfig::default();
        Self {
            path_loss_constant: c.path_loss_constant,
            path_loss_exponent: c.path_loss_exponent,
            shadowing_std_db: c.shadowing_std_db,
            fading: c.fading,
            min_distance: c.min_distance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    InterferenceDerived,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioSection {
    pub num_subcarriers: usize,
    /// Noise plus residual cellular interference per subcarrier (W).
    pub noise: f64,
    /// Per-couple power budget (W).
    pub p_budget: f64,
    /// Interference threshold per eNB and subcarrier (W).
    pub threshold: f64,
    pub mask_mode: MaskKind,
    /// Mask value in constant mode (W).
    pub mask_value: f64,
    /// Mask used when a couple has no path to its eNB (W).
    pub mask_cap: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        Self {
            num_subcarriers: 8,
            noise: 1e-13,
            p_budget: 0.25,
            threshold: 1e-13,
            mask_mode: MaskKind::InterferenceDerived,
            mask_value: 0.25,
            mask_cap: 1e3,
        }
    }
}

impl RadioSection {
    pub fn mask(&self) -> MaskMode {
        match self.mask_mode {
            MaskKind::InterferenceDerived => MaskMode::InterferenceDerived { cap: self.mask_cap },
            MaskKind::Constant => MaskMode::Constant(self.mask_value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltySourceKind {
    Direct,
    Sounding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgorithmSection {
    /// Round-over-round stopping threshold of the dynamics (bits/s/Hz).
    pub epsilon: f64,
    pub max_rounds: usize,
    /// Round cap of the selfish baseline.
    pub iwf_max_rounds: usize,
    /// Scheduling orders for multi-start runs and dual evaluations.
    pub orders: usize,
    /// Starting profiles for multi-start runs.
    pub inits: usize,
    pub step_size: f64,
    /// Relative power-change threshold of the outer multiplier loop.
    pub outer_epsilon: f64,
    /// Relative constraint tolerance of the outer multiplier loop.
    pub feasibility_tol: f64,
    pub max_outer: usize,
    pub oscillation_window: usize,
    pub dual_volume_tol: f64,
    /// Ellipsoid step cap; 0 means 200 times the number of constraints.
    pub dual_max_steps: usize,
    pub penalty_source: PenaltySourceKind,
    /// Sounding reference power (W).
    pub sounding_power: f64,
    /// Check the per-update bounding chain and fail the run on violation.
    pub debug_checks: bool,
}

impl Default for AlgorithmSection {
    fn default() -> Self {
        Self {
            epsilon: 1e-4,
            max_rounds: 10_000,
            iwf_max_rounds: 1000,
            orders: 6,
            inits: 1,
            step_size: 0.1,
            outer_epsilon: 1e-4,
            feasibility_tol: 1e-2,
            max_outer: 5000,
            oscillation_window: 20,
            dual_volume_tol: 1e-12,
            dual_max_steps: 0,
            penalty_source: PenaltySourceKind::Direct,
            sounding_power: 1e-3,
            debug_checks: false,
        }
    }
}

/// Parameter grids. Each list replaces the single value from the other
/// sections; the campaign runs their cartesian product.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub p_budget: Option<Vec<f64>>,
    pub threshold: Option<Vec<f64>>,
    pub max_pair_distance: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComparisonSection {
    /// Subcarriers reserved for D2D in dedicated mode.
    pub dedicated_subcarriers: Vec<usize>,
    /// Thresholds for the reuse mode (W). Empty means `radio.threshold`.
    pub reuse_thresholds: Vec<f64>,
    pub ues_per_cell: usize,
    /// Cellular UE power budget (W).
    pub ue_power: f64,
}

impl Default for ComparisonSection {
    fn default() -> Self {
        Self { dedicated_subcarriers: vec![4], reuse_thresholds: Vec::new(), ues_per_cell: 4, ue_power: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: OneOrMany<Mode>,
    #[serde(default = "default_seeds")]
    pub seeds: Seeds,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub topology: TopologySection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub radio: RadioSection,
    #[serde(default)]
    pub algorithm: AlgorithmSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub comparison: ComparisonSection,
}

fn default_seeds() -> Seeds {
    Seeds::Count(1)
}

impl ExperimentConfig {
    /// Defaults for every section with the given modes.
    pub fn new(modes: Vec<Mode>) -> Self {
        Self {
            mode: OneOrMany::Many(modes),
            seeds: default_seeds(),
            master_seed: 0,
            output_dir: None,
            topology: TopologySection::default(),
            channel: ChannelSection::default(),
            radio: RadioSection::default(),
            algorithm: AlgorithmSection::default(),
            sweep: SweepSection::default(),
            comparison: ComparisonSection::default(),
        }
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.mode.to_vec()
    }

    pub fn seed_list(&self) -> Vec<u64> {
        self.seeds.to_vec()
    }

    pub fn topology_config(&self, max_pair_distance: f64, ues_per_cell: usize) -> TopologyConfig {
        TopologyConfig {
            num_cells: self.topology.num_cells,
            cell_radius: self.topology.cell_radius,
            pairs_per_cell: self.topology.pairs_per_cell,
            max_pair_distance,
            ues_per_cell,
        }
    }

    pub fn channel_config(&self) -> ChannelConfig {
        ChannelConfig {
            path_loss_constant: self.channel.path_loss_constant,
            path_loss_exponent: self.channel.path_loss_exponent,
            shadowing_std_db: self.channel.shadowing_std_db,
            fading: self.channel.fading,
            min_distance: self.channel.min_distance,
        }
    }

    pub fn p_budgets(&self) -> Vec<f64> {
        self.sweep.p_budget.clone().unwrap_or_else(|| vec![self.radio.p_budget])
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.sweep.threshold.clone().unwrap_or_else(|| vec![self.radio.threshold])
    }

    pub fn max_pair_distances(&self) -> Vec<f64> {
        self.sweep.max_pair_distance.clone().unwrap_or_else(|| vec![self.topology.max_pair_distance])
    }

    pub fn reuse_thresholds(&self) -> Vec<f64> {
        if self.comparison.reuse_thresholds.is_empty() {
            vec![self.radio.threshold]
        } else {
            self.comparison.reuse_thresholds.clone()
        }
    }

    /// Fully resolved copy: explicit seed list and mode list.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.seeds = Seeds::List(self.seed_list());
        c.mode = OneOrMany::Many(self.modes());
        c
    }

    /// Checks value ranges. The error carries the dotted key of the
    /// offending entry.
    pub fn validate(&self) -> Result<(), (String, String)> {
        fn bad(key: &str, msg: impl Into<String>) -> Result<(), (String, String)> {
            Err((key.to_owned(), msg.into()))
        }
        fn positive(key: &str, v: f64) -> Result<(), (String, String)> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                bad(key, format!("must be a positive finite number, got {v}"))
            }
        }
        fn non_negative(key: &str, v: f64) -> Result<(), (String, String)> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                bad(key, format!("must be a non-negative finite number, got {v}"))
            }
        }
        if self.modes().is_empty() {
            return bad("mode", "at least one mode is required");
        }
        if self.seed_list().is_empty() {
            return bad("seeds", "at least one seed is required");
        }
        let t = &self.topology;
        if t.num_cells == 0 {
            return bad("topology.num_cells", "must be at least 1");
        }
        if t.pairs_per_cell == 0 {
            return bad("topology.pairs_per_cell", "must be at least 1");
        }
        positive("topology.cell_radius", t.cell_radius)?;
        non_negative("topology.max_pair_distance", t.max_pair_distance)?;
        let c = &self.channel;
        positive("channel.path_loss_constant", c.path_loss_constant)?;
        positive("channel.path_loss_exponent", c.path_loss_exponent)?;
        non_negative("channel.shadowing_std_db", c.shadowing_std_db)?;
        positive("channel.min_distance", c.min_distance)?;
        let r = &self.radio;
        if r.num_subcarriers == 0 {
            return bad("radio.num_subcarriers", "must be at least 1");
        }
        positive("radio.noise", r.noise)?;
        positive("radio.p_budget", r.p_budget)?;
        non_negative("radio.threshold", r.threshold)?;
        non_negative("radio.mask_value", r.mask_value)?;
        positive("radio.mask_cap", r.mask_cap)?;
        let a = &self.algorithm;
        positive("algorithm.epsilon", a.epsilon)?;
        positive("algorithm.step_size", a.step_size)?;
        positive("algorithm.outer_epsilon", a.outer_epsilon)?;
        positive("algorithm.feasibility_tol", a.feasibility_tol)?;
        positive("algorithm.sounding_power", a.sounding_power)?;
        if !(a.dual_volume_tol > 0.0 && a.dual_volume_tol < 1.0) {
            return bad("algorithm.dual_volume_tol", "must lie in (0, 1)");
        }
        for (key, v) in [
            ("algorithm.max_rounds", a.max_rounds),
            ("algorithm.iwf_max_rounds", a.iwf_max_rounds),
            ("algorithm.orders", a.orders),
            ("algorithm.inits", a.inits),
            ("algorithm.max_outer", a.max_outer),
            ("algorithm.oscillation_window", a.oscillation_window),
        ] {
            if v == 0 {
                return bad(key, "must be at least 1");
            }
        }
        for (key, list) in [
            ("sweep.p_budget", &self.sweep.p_budget),
            ("sweep.threshold", &self.sweep.threshold),
            ("sweep.max_pair_distance", &self.sweep.max_pair_distance),
        ] {
            if let Some(values) = list {
                if values.is_empty() {
                    return bad(key, "must not be empty");
                }
                for &v in values {
                    if key == "sweep.p_budget" {
                        positive(key, v)?;
                    } else {
                        non_negative(key, v)?;
                    }
                }
            }
        }
        if self.modes().contains(&Mode::ModeComparison) {
            let cmp = &self.comparison;
            if cmp.dedicated_subcarriers.is_empty() {
                return bad("comparison.dedicated_subcarriers", "must not be empty");
            }
            for &nd in &cmp.dedicated_subcarriers {
                if nd == 0 || nd >= r.num_subcarriers {
                    return bad(
                        "comparison.dedicated_subcarriers",
                        format!("{nd} dedicated subcarriers out of range 1..{}", r.num_subcarriers),
                    );
                }
            }
            for &q in &cmp.reuse_thresholds {
                non_negative("comparison.reuse_thresholds", q)?;
            }
            if cmp.ues_per_cell == 0 {
                return bad("comparison.ues_per_cell", "must be at least 1");
            }
            positive("comparison.ue_power", cmp.ue_power)?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always serializable")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid value for `{key}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Invalid { key: String, line: Option<usize>, message: String },
}

impl ConfigError {
    /// Stable short identifier of the error class.
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::Io { .. } => "config-io",
            ConfigError::Syntax { .. } => "config-syntax",
            ConfigError::Invalid { .. } => "config-invalid",
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Line of `key` (dotted, `section.name` or top-level `name`) in `text`.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let (section, name) = match key.rsplit_once('.') {
        Some((s, n)) => (Some(s), n),
        None => (None, key),
    };
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = Some(rest.trim_end_matches(']').trim().to_owned());
            continue;
        }
        let in_section = current.as_deref() == section;
        if in_section && line.split('=').next().is_some_and(|lhs| lhs.trim() == name) {
            return Some(i + 1);
        }
    }
    None
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        let mut message = e.message().to_owned();
        // toml reports duplicates without the name; the span covers the key.
        if message.starts_with("duplicate key") {
            if let Some(key) = e.span().and_then(|s| text.get(s)).map(str::trim).filter(|k| !k.is_empty()) {
                message = format!("duplicate key `{key}`");
            }
        }
        ConfigError::Syntax { line, column, message }
    })?;
    config.validate().map_err(|(key, message)| ConfigError::Invalid { line: key_line(text, &key), key, message })?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
    parse_config_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_reference_defaults() {
        let c = parse_config_str("mode = \"overlay-iadrmp\"\n[topology]\nnum_cells = 1\n").unwrap();
        assert_eq!(c.modes(), vec![Mode::OverlayIadrmp]);
        assert_eq!(c.radio.num_subcarriers, 8);
        assert_eq!(c.radio.p_budget, 0.25);
        assert_eq!(c.radio.noise, 1e-13);
        assert_eq!(c.topology.max_pair_distance, 100.0);
        assert_eq!(c.topology.cell_radius, 500.0);
        assert_eq!(c.topology.pairs_per_cell, 8);
        assert_eq!(c.seed_list(), vec![0]);
    }

    #[test]
    fn zero_cells_is_invalid_with_line() {
        let err = parse_config_str("mode = \"overlay-iwf\"\n\n[topology]\nnum_cells = 0\n").unwrap_err();
        match &err {
            ConfigError::Invalid { key, line, .. } => {
                assert_eq!(key, "topology.num_cells");
                assert_eq!(*line, Some(4));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(err.code(), "config-invalid");
    }

    #[test]
    fn duplicate_key_names_the_key() {
        let err = parse_config_str("mode = \"overlay-iwf\"\n[radio]\nnoise = 1e-13\nnoise = 2e-13\n").unwrap_err();
        match &err {
            ConfigError::Syntax { line, message, .. } => {
                assert_eq!(*line, 4);
                assert!(message.contains("noise"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(err.code(), "config-syntax");
    }

    #[test]
    fn unknown_keys_and_modes_are_rejected() {
        assert!(matches!(
            parse_config_str("mode = \"overlay-iwf\"\n[radio]\nbandwidth = 3\n"),
            Err(ConfigError::Syntax { .. })
        ));
        assert!(matches!(parse_config_str("mode = \"scale\"\n"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(parse_config_str("mode = [\"overlay-iwf\"\n"), Err(ConfigError::Syntax { .. })));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = parse_config(Path::new("/nonexistent/campaign.toml")).unwrap_err();
        assert_eq!(err.code(), "config-io");
    }

    #[test]
    fn seeds_and_modes_accept_lists() {
        let c = parse_config_str("mode = [\"overlay-iadrmp\", \"overlay-iwf\"]\nseeds = [3, 5]\n").unwrap();
        assert_eq!(c.modes(), vec![Mode::OverlayIadrmp, Mode::OverlayIwf]);
        assert_eq!(c.seed_list(), vec![3, 5]);
        let c = parse_config_str("mode = \"overlay-iwf\"\nseeds = 3\n").unwrap();
        assert_eq!(c.seed_list(), vec![0, 1, 2]);
    }

    #[test]
    fn dedicated_share_must_leave_cellular_subcarriers() {
        let text = "mode = \"mode-comparison\"\n[radio]\nnum_subcarriers = 8\n[comparison]\ndedicated_subcarriers = [8]\n";
        match parse_config_str(text) {
            Err(ConfigError::Invalid { key, line, .. }) => {
                assert_eq!(key, "comparison.dedicated_subcarriers");
                assert_eq!(line, Some(5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn resolved_config_round_trips() {
        let text = "mode = \"overlay-iadrmp\"\nseeds = 4\n[sweep]\np_budget = [0.01, 0.1]\n";
        let c = parse_config_str(text).unwrap().resolved();
        let back = parse_config_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.seeds, Seeds::List(vec![0, 1, 2, 3]));
    }
}
