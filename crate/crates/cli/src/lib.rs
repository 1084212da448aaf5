//! Experiment runner: named experiment presets over the core simulator,
//! replica-parallel execution, and tidy CSV/JSON outputs.

pub mod conditions;
pub mod config;
pub mod experiments;
pub mod oracle_check;
pub mod summary;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use tbrw_core::engine::{EngineMode, ThresholdPolicy, DEFAULT_FALLBACK_CAP, DEFAULT_FAST_COEFFICIENT};
use tbrw_core::laws::{LawSequence, LawSpec};

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};
use crate::experiments::{checks, pool, run_replica, stats, ReplicaMeta};
use crate::summary::Summary;

pub const SEED_RULE: &str =
    "seed_i = splitmix64(master + (i + 1) * 0x9E3779B97F4A7C15); reference runs of mode-crossval use i + replicas";

/// Process exit codes.
pub const EXIT_PASS: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub config: ExperimentConfig,
    pub seed_rule: String,
    pub replicas: Vec<ReplicaMeta>,
    pub version: String,
    pub threads: usize,
    pub wall_time_secs: f64,
}

/// Results of one experiment, before anything is written.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub summary: Summary,
    /// `(path relative to the output directory, contents)`.
    pub files: Vec<(PathBuf, String)>,
    pub meta: Meta,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.summary.pass {
            EXIT_PASS
        } else {
            EXIT_TOLERANCE
        }
    }

    /// Writes the data files, `summary.json` and `meta.json` under `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (rel, contents) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, contents)?;
        }
        std::fs::write(dir.join("summary.json"), self.summary.to_json() + "\n")?;
        let meta = serde_json::to_string_pretty(&self.meta).expect("meta serializes");
        std::fs::write(dir.join("meta.json"), meta + "\n")
    }
}

/// Validates and runs `cfg`. Replicas run on the current rayon pool; their
/// outputs are joined in index order, so results do not depend on it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome, ConfigError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut files = Vec::new();
    let mut replica_meta = Vec::new();
    let summary = match cfg.experiment {
        ExperimentKind::OracleCheck => {
            let report = oracle_check::run_oracle_check(cfg);
            files.push((PathBuf::from("oracle_check.csv"), report.csv()));
            let mut s = Summary::new(
                cfg.experiment.name(),
                1,
                cfg.seed,
                report.checks(),
                Default::default(),
                Vec::new(),
            );
            s.details = serde_json::to_value(&report).ok();
            s
        }
        ExperimentKind::Conditions => {
            let out = conditions::run_conditions(cfg).map_err(ConfigError::Invalid)?;
            for (name, contents) in out.csv() {
                files.push((PathBuf::from(name), contents));
            }
            let mut s = Summary::new(cfg.experiment.name(), 1, cfg.seed, out.checks(cfg), Default::default(), Vec::new());
            s.details = serde_json::to_value(&out).ok();
            s
        }
        _ => {
            let replicas: Vec<_> = (0..cfg.replicas)
                .into_par_iter()
                .map(|i| run_replica(cfg, i))
                .collect();
            let mut failures = Vec::new();
            for r in &replicas {
                let dir = PathBuf::from(format!("replica_{:03}", r.index));
                for (name, contents) in &r.files {
                    files.push((dir.join(name), contents.clone()));
                }
                if let Some(e) = &r.error {
                    failures.push(format!("replica {}: {e}", r.index));
                }
                replica_meta.push(r.meta());
            }
            let pooled = pool(&replicas);
            let mut s = Summary::new(
                cfg.experiment.name(),
                cfg.replicas,
                cfg.seed,
                checks(cfg, &pooled),
                stats(&pooled),
                failures,
            );
            if cfg.experiment == ExperimentKind::RecurrenceWindows && cfg.params.recurrence_horizon > 0 {
                let out = conditions::run_conditions(cfg).map_err(ConfigError::Invalid)?;
                s.checks.extend(out.checks(cfg));
                s.details = serde_json::to_value(&out).ok();
            }
            s
        }
    };
    Ok(Outcome {
        summary,
        files,
        meta: Meta {
            config: cfg.clone(),
            seed_rule: SEED_RULE.to_string(),
            replicas: replica_meta,
            version: env!("CARGO_PKG_VERSION").to_string(),
            threads: rayon::current_num_threads(),
            wall_time_secs: start.elapsed().as_secs_f64(),
        },
    })
}

/// Parameters a sweep can vary.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Gamma,
    Delta,
    Seed,
    Mode,
}

impl std::str::FromStr for SweepParam {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "gamma" => Ok(SweepParam::Gamma),
            "delta" => Ok(SweepParam::Delta),
            "seed" => Ok(SweepParam::Seed),
            "mode" => Ok(SweepParam::Mode),
            _ => Err(ConfigError::Invalid(format!("cannot sweep over {s:?}"))),
        }
    }
}

fn mode_named(name: &str, cfg: &ExperimentConfig) -> Result<EngineMode, ConfigError> {
    let epsilon = match &cfg.mode {
        EngineMode::Shortcut { epsilon, .. } => *epsilon,
        _ => 0.01,
    };
    let shortcut = |policy| EngineMode::Shortcut {
        epsilon,
        policy,
        fallback_cap: DEFAULT_FALLBACK_CAP,
        lumped: None,
    };
    match name {
        "exact" => Ok(EngineMode::Exact),
        "shortcut" | "shortcut-fast" => Ok(shortcut(ThresholdPolicy::Fast {
            coefficient: DEFAULT_FAST_COEFFICIENT,
        })),
        "shortcut-rigorous" => Ok(shortcut(ThresholdPolicy::Rigorous)),
        "lumped" => Ok(EngineMode::Lumped { max_states: 400 }),
        _ => Err(ConfigError::Invalid(format!("unknown mode {name:?}"))),
    }
}

/// `cfg` with one parameter replaced.
pub fn with_param(cfg: &ExperimentConfig, param: SweepParam, value: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut c = cfg.clone();
    let number = || {
        value
            .parse::<f64>()
            .map_err(|_| ConfigError::Invalid(format!("not a number: {value:?}")))
    };
    match param {
        SweepParam::Gamma => {
            let LawSpec::BernoulliPower { c: coef, .. } = *cfg.law.spec() else {
                return Err(ConfigError::Invalid("gamma sweeps need a bernoulli-power law".into()));
            };
            let law = LawSequence::new(LawSpec::BernoulliPower { c: coef, gamma: number()? })
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            c.law = law.shifted(cfg.law.shift());
        }
        SweepParam::Delta => {
            let d = number()?;
            if let LawSpec::LogBurst { .. } = cfg.law.spec() {
                let law = LawSequence::new(LawSpec::LogBurst { delta: d })
                    .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                c.law = law.shifted(cfg.law.shift());
            } else {
                c.params.delta = d;
            }
        }
        SweepParam::Seed => {
            c.seed = value
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("not a seed: {value:?}")))?;
        }
        SweepParam::Mode => c.mode = mode_named(value, cfg)?,
    }
    Ok(c)
}

/// One grid point of a sweep; `outcome` is `Err` when the point failed to
/// configure.
pub struct SweepPoint {
    pub value: String,
    pub outcome: Result<Outcome, ConfigError>,
}

pub struct SweepOutcome {
    pub param: SweepParam,
    pub points: Vec<SweepPoint>,
}

pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[String]) -> SweepOutcome {
    let points = values
        .iter()
        .map(|v| SweepPoint {
            value: v.clone(),
            outcome: with_param(cfg, param, v).and_then(|c| run_experiment(&c)),
        })
        .collect();
    SweepOutcome { param, points }
}

impl SweepOutcome {
    pub fn pass(&self) -> bool {
        self.points
            .iter()
            .all(|p| p.outcome.as_ref().is_ok_and(|o| o.summary.pass))
    }

    pub fn any_config_error(&self) -> bool {
        self.points.iter().any(|p| p.outcome.is_err())
    }

    /// Cross-point table: one row per point, one column per check.
    pub fn table(&self) -> String {
        let mut names: Vec<String> = Vec::new();
        for p in &self.points {
            if let Ok(o) = &p.outcome {
                for c in &o.summary.checks {
                    if !names.contains(&c.name) {
                        names.push(c.name.clone());
                    }
                }
            }
        }
        let mut s = format!("{:?},pass,error", self.param).to_lowercase();
        for n in &names {
            let _ = write!(s, ",{n}");
        }
        s.push('\n');
        for p in &self.points {
            match &p.outcome {
                Ok(o) => {
                    let _ = write!(s, "{},{},", p.value, u8::from(o.summary.pass));
                    for n in &names {
                        let v = o.summary.check(n).map_or(String::new(), |c| c.value.to_string());
                        let _ = write!(s, ",{v}");
                    }
                }
                Err(e) => {
                    let _ = write!(s, "{},0,\"{}\"", p.value, e.to_string().replace('"', "'"));
                    for _ in &names {
                        s.push(',');
                    }
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (i, p) in self.points.iter().enumerate() {
            if let Ok(o) = &p.outcome {
                o.write(&dir.join(format!("point_{i:02}")))?;
            }
        }
        std::fs::write(dir.join("sweep.csv"), self.table())
    }
}
