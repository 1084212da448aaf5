//! Replica runners for the simulation experiments and their pooled checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use tbrw_core::count::ExtCount;
use tbrw_core::engine::{run, EngineMode, Horizon, Observer, ProcessState, RunReport};
use tbrw_core::laws::LawSequence;
use tbrw_core::observables::{
    Checkpoints, DegreeCheckpoints, DistanceLog, LeafFraction, RedBlueObserver, RootVisits, TauLog,
    TrackedVertices, WindowSpec,
};
use tbrw_core::oracles::pa_target;
use tbrw_core::rng::{split_seed, stream};

use crate::config::{ExperimentConfig, ExperimentKind, WindowGrid, WindowLength};
use crate::summary::{median, variance, Check, Relation, Stat};

/// Everything one replica produced.
#[derive(Clone, Debug, Default)]
pub struct ReplicaOutput {
    pub index: u64,
    pub seed: u64,
    /// `(file name, contents)` pairs written under the replica directory.
    pub files: Vec<(String, String)>,
    pub metrics: BTreeMap<String, f64>,
    pub reports: Vec<(String, RunReport)>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplicaMeta {
    pub index: u64,
    pub seed: u64,
    pub reports: BTreeMap<String, RunReport>,
    pub error: Option<String>,
}

impl ReplicaOutput {
    pub fn meta(&self) -> ReplicaMeta {
        ReplicaMeta {
            index: self.index,
            seed: self.seed,
            reports: self.reports.iter().cloned().collect(),
            error: self.error.clone(),
        }
    }
}

/// Seed of the `i`-th replica. Cross-validation reference runs use the
/// indices `replicas..2*replicas`.
pub fn replica_seed(master: u64, index: u64) -> u64 {
    split_seed(master, index)
}

fn final_growths(cfg: &ExperimentConfig) -> u64 {
    match cfg.horizon {
        Horizon::GrowthEvents(k) => k,
        _ => 0,
    }
}

fn checkpoints_with_final(cfg: &ExperimentConfig) -> Vec<u64> {
    let mut ks = cfg.params.checkpoints.clone();
    let last = final_growths(cfg);
    if last > 0 && !ks.contains(&last) {
        ks.push(last);
    }
    ks.sort_unstable();
    ks
}

fn simulate(
    cfg: &ExperimentConfig,
    mode: &EngineMode,
    seed: u64,
    observers: &mut [&mut dyn Observer],
) -> Result<RunReport, String> {
    let mut state = ProcessState::new(&cfg.initial, cfg.law.clone(), seed).map_err(|e| e.to_string())?;
    run(&mut state, mode, cfg.horizon, observers).map_err(|e| e.to_string())
}

/// Runs replica `index` of a simulation experiment.
pub fn run_replica(cfg: &ExperimentConfig, index: u64) -> ReplicaOutput {
    let seed = replica_seed(cfg.seed, index);
    let mut out = ReplicaOutput {
        index,
        seed,
        ..Default::default()
    };
    let result = match cfg.experiment {
        ExperimentKind::DegreeDist => degree_dist(cfg, &mut out),
        ExperimentKind::ModeCrossval => mode_crossval(cfg, &mut out),
        ExperimentKind::GrowthTimes => growth_times(cfg, &mut out),
        ExperimentKind::RedFraction => red_fraction(cfg, &mut out),
        ExperimentKind::LeafFraction => leaf_fraction(cfg, &mut out),
        ExperimentKind::TransienceDemo => transience_demo(cfg, &mut out),
        ExperimentKind::RecurrenceWindows => recurrence_windows(cfg, &mut out),
        ExperimentKind::OracleCheck | ExperimentKind::Conditions => {
            Err(format!("{} has no replicas", cfg.experiment))
        }
    };
    if let Err(e) = result {
        out.error = Some(e);
    }
    out
}

fn degree_metrics(prefix: &str, obs: &DegreeCheckpoints, out: &mut ReplicaOutput) {
    for (k, snap) in &obs.snapshots {
        out.metrics.insert(format!("{prefix}tv@{k}"), snap.tv_to_target);
        for r in snap.degrees.iter().filter(|r| r.d <= obs.d_max) {
            out.metrics.insert(format!("{prefix}fraction_d{}@{k}", r.d), r.fraction);
        }
    }
}

fn degree_dist(cfg: &ExperimentConfig, out: &mut ReplicaOutput) -> Result<(), String> {
    let mut obs = DegreeCheckpoints::new(Checkpoints::at(&checkpoints_with_final(cfg)), cfg.params.d_max);
    let mut tracked = TrackedVertices::new(&cfg.params.tracked);
    let report = simulate(cfg, &cfg.mode, out.seed, &mut [&mut obs, &mut tracked])?;
    out.reports.push(("main".into(), report));
    degree_metrics("", &obs, out);
    out.files.push(("degree_dist.csv".into(), obs.csv()));
    if !cfg.params.tracked.is_empty() {
        out.files.push(("tracked.csv".into(), tracked_csv(&tracked)));
    }
    Ok(())
}

fn tracked_csv(tracked: &TrackedVertices) -> String {
    let mut s = String::from("k,time,degree\n");
    for t in &tracked.tracked {
        for (time, d) in &t.history {
            let _ = writeln!(s, "{},{time},{d}", t.k);
        }
    }
    s
}

fn mode_crossval(cfg: &ExperimentConfig, out: &mut ReplicaOutput) -> Result<(), String> {
    let reference = cfg.params.reference_mode.as_ref().ok_or("missing reference_mode")?;
    let last = final_growths(cfg);
    let runs = [
        ("primary", &cfg.mode, out.seed),
        ("reference", reference, replica_seed(cfg.seed, cfg.replicas + out.index)),
    ];
    for (label, mode, seed) in runs {
        let mut obs = DegreeCheckpoints::new(Checkpoints::at(&[last]), cfg.params.d_max);
        let report = simulate(cfg, mode, seed, &mut [&mut obs])?;
        out.reports.push((label.into(), report));
        degree_metrics(&format!("{label}_"), &obs, out);
        out.files.push((format!("degree_{label}.csv"), obs.csv()));
    }
    Ok(())
}

fn growth_times(cfg: &ExperimentConfig, out: &mut ReplicaOutput) -> Result<(), String> {
    let gamma = cfg.gamma().ok_or("growth-times needs a bernoulli-power law")?;
    let delta = cfg.params.delta;
    let ks = checkpoints_with_final(cfg);
    let last = final_growths(cfg);
    let law: &LawSequence = &cfg.law;
    let mut rng = stream(out.seed);
    let mut clock = ExtCount::ZERO;
    let mut csv = String::from("k,tau_k,statistic\n");
    for k in 1..=last {
        clock = law
            .next_growth_time(clock, &mut rng)
            .ok_or_else(|| format!("growth stopped before k = {k}"))?;
        if ks.binary_search(&k).is_ok() {
            let stat = TauLog::statistic(k, clock, delta, gamma);
            let _ = writeln!(csv, "{k},{clock},{stat}");
            out.metrics.insert(format!("statistic@{k}"), stat);
            out.metrics.insert(format!("log2_tau@{k}"), clock.log2());
        }
    }
    out.files.push(("tau.csv".into(), csv));
    Ok(())
}

fn red_fraction(cfg: &ExperimentConfig, out: &mut ReplicaOutput) -> Result<(), String> {
    let ks = cfg.params.checkpoints.clone();
    let mut obs = RedBlueObserver::new(Checkpoints::at(&ks), cfg.params.delta);
    let report = simulate(cfg, &cfg.mode, out.seed, &mut [&mut obs])?;
    out.reports.push(("main".into(), report));
    for &k in &ks {
        if let Some(f) = obs.red_fraction_at(k) {
            out.metrics.insert(format!("red@{k}"), f);
        }
    }
    out.files.push(("redblue.csv".into(), obs.csv()));
    Ok(())
}

fn leaf_fraction(cfg: &ExperimentConfig, out: &mut ReplicaOutput) -> Result<(), String> {
    let mut obs = LeafFraction::new(Checkpoints::at(&checkpoints_with_final(cfg)));
    let report = simulate(cfg, &cfg.mode, out.seed, &mut [&mut obs])?;
    out.metrics.insert("bound_checks".into(), obs.bound_checks as f64);
    out.metrics.insert("growth_events".into(), report.growth_events as f64);
    out.reports.push(("main".into(), report));
    for (k, _, _, f) in &obs.rows {
        out.metrics.insert(format!("leaf@{k}"), *f);
    }
    out.files.push(("leaf_fraction.csv".into(), obs.csv()));
    Ok(())
}

fn transience_demo(cfg: &ExperimentConfig, out: &mut ReplicaOutput) -> Result<(), String> {
    let mut obs = DistanceLog::new(Checkpoints::Every);
    let report = simulate(cfg, &cfg.mode, out.seed, &mut [&mut obs])?;
    out.reports.push(("main".into(), report));
    for &k in &checkpoints_with_final(cfg) {
        if let Some(d) = obs.distance_at(k) {
            out.metrics.insert(format!("distance@{k}"), d as f64);
        }
    }
    out.files.push(("distance.csv".into(), obs.csv()));
    Ok(())
}

/// Windows `[j a, j a + length(j a)]` for every anchor `a` and multiple `j`.
pub fn build_windows(law: &LawSequence, grid: &WindowGrid) -> Result<Vec<WindowSpec>, String> {
    let mut starts: Vec<(u64, u64)> = Vec::new();
    for &a in &grid.anchors {
        for &j in &grid.multiples {
            starts.push((a, j * a));
        }
    }
    let mut cumulative: BTreeMap<u64, f64> = BTreeMap::new();
    if let WindowLength::GrowthScaled { .. } = grid.length {
        let mut ns: Vec<u64> = starts.iter().map(|s| s.1).collect();
        ns.sort_unstable();
        ns.dedup();
        let mut total = 0.0;
        let mut m = 0u64;
        for n in ns {
            while m < n {
                m += 1;
                total += law.moments(m).map_err(|e| e.to_string())?.mean;
            }
            cumulative.insert(n, total);
        }
    }
    Ok(starts
        .into_iter()
        .map(|(a, n)| {
            let nf = n as f64;
            let len = match grid.length {
                WindowLength::GrowthScaled { g_exponent } => nf.powf(g_exponent) * cumulative[&n].powi(2),
                WindowLength::Power { exponent } => nf.powf(exponent),
            };
            WindowSpec {
                start: n,
                length: len.ceil().max(1.0) as u64,
                kind: format!("anchor-{a}"),
            }
        })
        .collect())
}

fn recurrence_windows(cfg: &ExperimentConfig, out: &mut ReplicaOutput) -> Result<(), String> {
    let grid = cfg.params.windows.as_ref().ok_or("missing params.windows")?;
    let windows = build_windows(&cfg.law, grid)?;
    let mut obs = RootVisits::new(windows.clone());
    let report = simulate(cfg, &cfg.mode, out.seed, &mut [&mut obs])?;
    out.reports.push(("main".into(), report));
    let outcome = obs.outcome();
    let hits = outcome.flags.iter().filter(|f| f.1).count();
    out.metrics.insert("hits".into(), hits as f64);
    out.metrics.insert("evaluated".into(), outcome.evaluated as f64);
    out.metrics.insert("skipped".into(), outcome.skipped.len() as f64);
    out.metrics.insert("fraction".into(), outcome.fraction);
    for &a in &grid.anchors {
        let kind = format!("anchor-{a}");
        let flags: Vec<bool> = outcome
            .flags
            .iter()
            .filter(|f| windows[f.0].kind == kind)
            .map(|f| f.1)
            .collect();
        if !flags.is_empty() {
            let f = flags.iter().filter(|&&v| v).count() as f64 / flags.len() as f64;
            out.metrics.insert(format!("fraction@{a}"), f);
        }
    }
    out.files.push(("windows.csv".into(), obs.csv()));
    Ok(())
}

/// Per-metric values across the replicas that reported them.
pub fn pool(replicas: &[ReplicaOutput]) -> BTreeMap<String, Vec<f64>> {
    let mut pooled: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in replicas {
        for (k, v) in &r.metrics {
            pooled.entry(k.clone()).or_default().push(*v);
        }
    }
    pooled
}

pub fn stats(pooled: &BTreeMap<String, Vec<f64>>) -> BTreeMap<String, Stat> {
    pooled.iter().map(|(k, v)| (k.clone(), Stat::of(v))).collect()
}

fn med(pooled: &BTreeMap<String, Vec<f64>>, key: &str) -> f64 {
    pooled.get(key).map_or(f64::NAN, |v| median(v))
}

/// Pass/fail checks of a simulation experiment, computed from pooled
/// replica metrics only.
pub fn checks(cfg: &ExperimentConfig, pooled: &BTreeMap<String, Vec<f64>>) -> Vec<Check> {
    let tol = &cfg.params.tolerances;
    let last = final_growths(cfg);
    let mut out = Vec::new();
    match cfg.experiment {
        ExperimentKind::DegreeDist => {
            for &d in &tol.degree_ds {
                let target = pa_target(d).unwrap_or(f64::NAN);
                let m = med(pooled, &format!("fraction_d{d}@{last}"));
                out.push(Check::new(
                    format!("abs_error_d{d}"),
                    (m - target).abs(),
                    Relation::AtMost,
                    tol.degree_abs,
                ));
            }
            out.push(Check::new("tv_to_target", med(pooled, &format!("tv@{last}")), Relation::AtMost, tol.degree_tv));
        }
        ExperimentKind::ModeCrossval => {
            for d in 1..=tol.crossval_d_max {
                let empty = Vec::new();
                let a = pooled.get(&format!("primary_fraction_d{d}@{last}")).unwrap_or(&empty);
                let b = pooled.get(&format!("reference_fraction_d{d}@{last}")).unwrap_or(&empty);
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                let se = (variance(a) / a.len() as f64 + variance(b) / b.len() as f64).sqrt();
                let diff = (mean(a) - mean(b)).abs();
                // difference in units of the pooled standard error
                let z = if diff == 0.0 { 0.0 } else { diff / se };
                out.push(Check::new(format!("standard_errors_d{d}"), z, Relation::AtMost, tol.crossval_se));
            }
        }
        ExperimentKind::GrowthTimes => {
            let low = med(pooled, &format!("statistic@{}", tol.growth_low_k));
            let high = med(pooled, &format!("statistic@{last}"));
            out.push(Check::new("statistic_ratio", high / low, Relation::Below, tol.growth_ratio));
        }
        ExperimentKind::RedFraction => {
            let ks = &cfg.params.checkpoints;
            let meds: Vec<f64> = ks.iter().map(|k| med(pooled, &format!("red@{k}"))).collect();
            out.push(Check::new(
                "red_fraction_final",
                meds.last().copied().unwrap_or(f64::NAN),
                Relation::AtMost,
                tol.red_max,
            ));
            out.push(Check::holds(
                "red_fraction_nonincreasing",
                meds.iter().all(|m| m.is_finite()) && meds.windows(2).all(|w| w[1] <= w[0]),
            ));
        }
        ExperimentKind::LeafFraction => {
            let ks = checkpoints_with_final(cfg);
            let meds: Vec<f64> = ks.iter().map(|k| med(pooled, &format!("leaf@{k}"))).collect();
            out.push(Check::new("leaf_fraction_final", med(pooled, &format!("leaf@{last}")), Relation::AtLeast, tol.leaf_min));
            out.push(Check::holds(
                "leaf_fraction_increasing",
                meds.iter().all(|m| m.is_finite()) && meds.windows(2).all(|w| w[1] > w[0]),
            ));
            let checks = pooled.get("bound_checks").cloned().unwrap_or_default();
            let events = pooled.get("growth_events").cloned().unwrap_or_default();
            out.push(Check::holds(
                "leaf_bound_every_event",
                checks.len() as u64 == cfg.replicas && checks == events,
            ));
        }
        ExperimentKind::TransienceDemo => {
            let end = med(pooled, &format!("distance@{last}"));
            let early = med(pooled, &format!("distance@{}", tol.distance_early_k));
            out.push(Check::new("distance_final", end, Relation::AtLeast, tol.distance_min));
            out.push(Check::new("distance_final_minus_early", end - early, Relation::AtLeast, 0.0));
        }
        ExperimentKind::RecurrenceWindows => {
            let sum = |k: &str| pooled.get(k).map_or(0.0, |v| v.iter().sum::<f64>());
            let fraction = sum("hits") / sum("evaluated");
            let c = Check::new("window_visit_fraction", fraction, Relation::AtLeast, tol.window_min);
            let gate = cfg.params.windows.as_ref().is_some_and(|g| g.gate);
            out.push(if gate { c } else { c.ungated() });
        }
        ExperimentKind::OracleCheck | ExperimentKind::Conditions => {}
    }
    out
}
