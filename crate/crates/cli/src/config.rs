//! Experiment configuration, named presets and flag overrides.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use tbrw_core::engine::{EngineMode, Horizon, ThresholdPolicy, DEFAULT_FALLBACK_CAP, DEFAULT_FAST_COEFFICIENT};
use tbrw_core::laws::{BurstIndex, LawSequence, LawSpec, SeqSpec};
use tbrw_core::tree::TreeSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {msg}")]
    Read { path: PathBuf, msg: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("unknown experiment or preset {0:?}")]
    UnknownExperiment(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    DegreeDist,
    RecurrenceWindows,
    GrowthTimes,
    RedFraction,
    LeafFraction,
    TransienceDemo,
    ModeCrossval,
    OracleCheck,
    Conditions,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::DegreeDist,
        ExperimentKind::RecurrenceWindows,
        ExperimentKind::GrowthTimes,
        ExperimentKind::RedFraction,
        ExperimentKind::LeafFraction,
        ExperimentKind::TransienceDemo,
        ExperimentKind::ModeCrossval,
        ExperimentKind::OracleCheck,
        ExperimentKind::Conditions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DegreeDist => "degree-dist",
            ExperimentKind::RecurrenceWindows => "recurrence-windows",
            ExperimentKind::GrowthTimes => "growth-times",
            ExperimentKind::RedFraction => "red-fraction",
            ExperimentKind::LeafFraction => "leaf-fraction",
            ExperimentKind::TransienceDemo => "transience-demo",
            ExperimentKind::ModeCrossval => "mode-crossval",
            ExperimentKind::OracleCheck => "oracle-check",
            ExperimentKind::Conditions => "conditions",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError::UnknownExperiment(s.to_string()))
    }
}

/// Window length rule for root-visit windows `[n, n + length(n)]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum WindowLength {
    /// `n^g_exponent * M_n^2` with `M_n` the cumulative mean leaf count.
    GrowthScaled { g_exponent: f64 },
    /// `n^exponent`.
    Power { exponent: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowGrid {
    /// Windows start at `j * anchor` for every anchor and multiple `j`.
    pub anchors: Vec<u64>,
    pub multiples: Vec<u64>,
    pub length: WindowLength,
    /// Whether the window fraction counts toward pass/fail.
    pub gate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransienceParams {
    /// Auxiliary times `a_i`.
    pub a: SeqSpec,
    pub i_max: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    pub max_tree_size: usize,
    pub excursions: u64,
    pub random_trees: usize,
    pub max_random_tree: usize,
    pub mixing_epsilon: f64,
    pub pb_vectors: usize,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            max_tree_size: 8,
            excursions: 1_000_000,
            random_trees: 50,
            max_random_tree: 200,
            mixing_epsilon: 0.01,
            pb_vectors: 300,
        }
    }
}

/// Pass/fail tolerances, one group per experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub degree_abs: f64,
    pub degree_ds: Vec<u64>,
    pub degree_tv: f64,
    pub crossval_se: f64,
    pub crossval_d_max: u64,
    pub growth_ratio: f64,
    pub growth_low_k: u64,
    pub red_max: f64,
    pub leaf_min: f64,
    pub distance_min: f64,
    pub distance_early_k: u64,
    pub window_min: f64,
    pub condition_tail: f64,
    pub condition_from_i: u64,
    pub oracle_abs: f64,
    pub oracle_mc_rel: f64,
    pub oracle_spot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            degree_abs: 0.01,
            degree_ds: vec![1, 2, 3, 4, 5],
            degree_tv: 0.02,
            crossval_se: 3.0,
            crossval_d_max: 5,
            growth_ratio: 1e-2,
            growth_low_k: 100,
            red_max: 0.10,
            leaf_min: 0.95,
            distance_min: 5.0,
            distance_early_k: 10,
            window_min: 0.95,
            condition_tail: 1e-3,
            condition_from_i: 40,
            oracle_abs: 1e-9,
            oracle_mc_rel: 0.02,
            oracle_spot: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Good-interval exponent: `Δτ_k >= k^(2+delta) + 1`.
    pub delta: f64,
    pub checkpoints: Vec<u64>,
    pub d_max: u64,
    pub windows: Option<WindowGrid>,
    /// Growth indices whose new vertices have their degree histories kept.
    pub tracked: Vec<u64>,
    /// Second engine mode for cross-validation.
    pub reference_mode: Option<EngineMode>,
    pub transience: Option<TransienceParams>,
    /// Horizon of the recurrence-condition checker; 0 skips it.
    pub recurrence_horizon: u64,
    pub oracle: OracleParams,
    pub tolerances: Tolerances,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            delta: 0.1,
            checkpoints: Vec::new(),
            d_max: 50,
            windows: None,
            tracked: Vec::new(),
            reference_mode: None,
            transience: None,
            recurrence_horizon: 0,
            oracle: OracleParams::default(),
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    pub law: LawSequence,
    pub mode: EngineMode,
    pub initial: TreeSpec,
    pub horizon: Horizon,
    pub replicas: u64,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub params: Params,
}

/// Command-line values that replace file values.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<u64>,
    pub out: Option<PathBuf>,
}

pub const PRESETS: [&str; 10] = [
    "degree-dist",
    "recurrence-windows",
    "recurrence-windows-sublinear",
    "growth-times",
    "red-fraction",
    "leaf-fraction",
    "transience-demo",
    "mode-crossval",
    "oracle-check",
    "conditions",
];

fn bernoulli(gamma: f64) -> LawSequence {
    LawSequence::new(LawSpec::BernoulliPower { c: 1.0, gamma }).expect("valid preset law")
}

fn fast(epsilon: f64) -> EngineMode {
    EngineMode::Shortcut {
        epsilon,
        policy: ThresholdPolicy::Fast {
            coefficient: DEFAULT_FAST_COEFFICIENT,
        },
        fallback_cap: DEFAULT_FALLBACK_CAP,
        lumped: None,
    }
}

fn transience_law() -> LawSequence {
    LawSequence::new(LawSpec::WeightedBurst {
        p: SeqSpec::Harmonic { offset: 1.0 },
        w: SeqSpec::ExpPower {
            base: 2.0,
            exponent: 1.1,
            ceil: true,
        },
        w_index: BurstIndex::Growth,
    })
    .expect("valid preset law")
}

fn windows(anchors: Vec<u64>, length: WindowLength, gate: bool) -> WindowGrid {
    WindowGrid {
        anchors,
        multiples: (1..=9).collect(),
        length,
        gate,
    }
}

impl ExperimentConfig {
    /// The named preset, with every acceptance tolerance filled in.
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let base = |experiment, law, mode, horizon, replicas, params| ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            experiment,
            law,
            mode,
            initial: TreeSpec::SingleEdge,
            horizon,
            replicas,
            seed: 20_240_601,
            out: None,
            params,
        };
        let p = Params::default();
        Ok(match name {
            "degree-dist" => base(
                ExperimentKind::DegreeDist,
                bernoulli(0.75),
                fast(0.01),
                Horizon::GrowthEvents(100_000),
                5,
                Params {
                    checkpoints: vec![1_000, 10_000, 100_000],
                    ..p
                },
            ),
            "recurrence-windows" => base(
                ExperimentKind::RecurrenceWindows,
                bernoulli(0.8),
                EngineMode::Exact,
                Horizon::Steps(10_000_000),
                10,
                Params {
                    windows: Some(windows(
                        vec![10_000, 100_000, 1_000_000],
                        WindowLength::GrowthScaled { g_exponent: 0.05 },
                        true,
                    )),
                    recurrence_horizon: 1_000_000,
                    ..p
                },
            ),
            "recurrence-windows-sublinear" => base(
                ExperimentKind::RecurrenceWindows,
                bernoulli(0.6),
                EngineMode::Exact,
                Horizon::Steps(10_000_000),
                10,
                Params {
                    windows: Some(windows(
                        vec![10_000, 100_000, 1_000_000],
                        WindowLength::Power { exponent: 0.9 },
                        false,
                    )),
                    ..p
                },
            ),
            "growth-times" => base(
                ExperimentKind::GrowthTimes,
                bernoulli(0.8),
                EngineMode::Exact,
                Horizon::GrowthEvents(10_000),
                20,
                Params {
                    checkpoints: vec![100, 1_000, 10_000],
                    ..p
                },
            ),
            "red-fraction" => base(
                ExperimentKind::RedFraction,
                bernoulli(0.75),
                fast(0.01),
                Horizon::GrowthEvents(100_000),
                10,
                Params {
                    checkpoints: vec![1_000, 10_000, 100_000],
                    ..p
                },
            ),
            "leaf-fraction" => base(
                ExperimentKind::LeafFraction,
                LawSequence::new(LawSpec::LogBurst { delta: 0.8 }).expect("valid preset law"),
                fast(0.01),
                Horizon::GrowthEvents(2_000),
                10,
                Params {
                    checkpoints: vec![250, 500, 1_000, 2_000],
                    ..p
                },
            ),
            "transience-demo" => base(
                ExperimentKind::TransienceDemo,
                transience_law(),
                EngineMode::Lumped { max_states: 400 },
                Horizon::GrowthEvents(60),
                10,
                Params {
                    checkpoints: (1..=60).collect(),
                    ..p
                },
            ),
            "mode-crossval" => base(
                ExperimentKind::ModeCrossval,
                bernoulli(0.75),
                EngineMode::Exact,
                Horizon::GrowthEvents(500),
                20,
                Params {
                    reference_mode: Some(EngineMode::Shortcut {
                        epsilon: 0.01,
                        policy: ThresholdPolicy::Rigorous,
                        fallback_cap: DEFAULT_FALLBACK_CAP,
                        lumped: None,
                    }),
                    ..p
                },
            ),
            "oracle-check" => base(
                ExperimentKind::OracleCheck,
                bernoulli(0.75),
                EngineMode::Exact,
                Horizon::GrowthEvents(0),
                1,
                p,
            ),
            "conditions" => base(
                ExperimentKind::Conditions,
                transience_law(),
                EngineMode::Exact,
                Horizon::GrowthEvents(0),
                1,
                Params {
                    transience: Some(TransienceParams {
                        a: SeqSpec::ExpPower {
                            base: 2.0,
                            exponent: 1.05,
                            ceil: false,
                        },
                        i_max: 80,
                    }),
                    ..p
                },
            ),
            other => return Err(ConfigError::UnknownExperiment(other.to_string())),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(ConfigError::Schema(v as u32)),
            None => return Err(ConfigError::Parse("missing schema_version".into())),
        }
        serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.replicas {
            self.replicas = r;
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
    }

    /// Growth exponent of a Bernoulli power law.
    pub fn gamma(&self) -> Option<f64> {
        match self.law.spec() {
            LawSpec::BernoulliPower { gamma, .. } => Some(*gamma),
            _ => None,
        }
    }

    fn single_leaf(&self) -> bool {
        match self.law.spec() {
            LawSpec::BernoulliPower { .. } => true,
            LawSpec::Constant { z, .. } => *z == 1,
            LawSpec::Table { entries, .. } => entries.iter().all(|e| e.value <= 1),
            _ => false,
        }
    }

    /// Rejects observer/mode combinations before anything runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        self.mode.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.replicas == 0 {
            return bad("replicas must be positive");
        }
        let needs_growth_horizon = !matches!(
            self.experiment,
            ExperimentKind::RecurrenceWindows | ExperimentKind::OracleCheck | ExperimentKind::Conditions
        );
        if needs_growth_horizon && !matches!(self.horizon, Horizon::GrowthEvents(k) if k > 0) {
            return bad("this experiment needs a positive growth_events horizon");
        }
        match self.experiment {
            ExperimentKind::RecurrenceWindows => {
                if !self.mode.is_exact() {
                    return bad("the root-visit window observer requires exact mode");
                }
                if !matches!(self.horizon, Horizon::Steps(_)) {
                    return bad("recurrence-windows needs a steps horizon");
                }
                if self.params.windows.is_none() {
                    return bad("recurrence-windows needs params.windows");
                }
            }
            ExperimentKind::RedFraction => {
                if !self.single_leaf() {
                    return bad("the coloring observer requires a single-leaf law");
                }
                if self.initial == TreeSpec::SingleVertex {
                    return bad("the coloring needs an initial edge");
                }
            }
            ExperimentKind::GrowthTimes => {
                if self.gamma().is_none() {
                    return bad("growth-times needs a bernoulli-power law");
                }
            }
            ExperimentKind::ModeCrossval => match &self.params.reference_mode {
                None => return bad("mode-crossval needs params.reference_mode"),
                Some(m) => m.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?,
            },
            ExperimentKind::Conditions => {
                if self.params.transience.is_some() && !matches!(self.law.spec(), LawSpec::WeightedBurst { .. }) {
                    return bad("transience conditions need a weighted-burst law");
                }
            }
            _ => {}
        }
        Ok(())
    }
}
