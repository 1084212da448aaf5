//! Advancing the coupled tree/walker chain.
//!
//! `Exact` moves the walker one step at a time. `Shortcut` jumps from one
//! growth time to the next and, when the inter-growth interval exceeds a
//! mixing threshold, draws the walker from the stationary law of the frozen
//! tree. `Lumped` transports the walker exactly across each interval with
//! powers of the lumped transition matrix.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::count::ExtCount;
use crate::laws::LawSequence;
use crate::oracles::{mat_mul, vec_mat};
use crate::rng::{stream, Stream};
use crate::tree::{CompressedTree, GrowthEvent, TreeError, TreeSpec, VertexRef, WalkTarget};

use rand::Rng;

pub const DEFAULT_FALLBACK_CAP: u64 = 1_000_000_000;
pub const DEFAULT_FAST_COEFFICIENT: f64 = 8.0;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid engine mode: {0}")]
    InvalidMode(String),
    #[error("lumped chain has {states} states, limit is {max}")]
    StateExplosion { states: usize, max: usize },
    #[error("interval of {steps} steps exceeds the fallback cap {cap}")]
    BudgetExceeded { steps: ExtCount, cap: u64 },
    #[error("observer `{0}` needs per-step events, which only exact mode emits")]
    StepObserverOutsideExact(String),
    #[error("observer `{name}` failed: {msg}")]
    Observer { name: String, msg: String },
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("event writer: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    /// `ceil(2 |V|^2 ln(1/eps))`.
    Rigorous,
    /// `ceil(c |V| log2(|V|)^2 ln(1/eps))`.
    Fast { coefficient: f64 },
}

fn default_fallback_cap() -> u64 {
    DEFAULT_FALLBACK_CAP
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum EngineMode {
    Exact,
    Shortcut {
        epsilon: f64,
        policy: ThresholdPolicy,
        #[serde(default = "default_fallback_cap")]
        fallback_cap: u64,
        /// Lumped transport for intervals beyond the cap, with this state limit.
        #[serde(default)]
        lumped: Option<usize>,
    },
    Lumped {
        max_states: usize,
    },
}

impl EngineMode {
    pub fn validate(&self) -> Result<(), EngineError> {
        match self {
            EngineMode::Exact => Ok(()),
            EngineMode::Shortcut {
                epsilon, fallback_cap, ..
            } => {
                if !(*epsilon > 0.0 && *epsilon < 1.0) {
                    return Err(EngineError::InvalidMode(format!("epsilon {epsilon} not in (0, 1)")));
                }
                if *fallback_cap < 1 {
                    return Err(EngineError::InvalidMode("fallback cap must be >= 1".into()));
                }
                Ok(())
            }
            EngineMode::Lumped { max_states } => {
                if *max_states == 0 {
                    return Err(EngineError::InvalidMode("max_states must be >= 1".into()));
                }
                Ok(())
            }
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, EngineMode::Exact)
    }
}

/// The chain `(T_n, X_n)` together with its random stream.
#[derive(Clone, Debug)]
pub struct ProcessState {
    pub tree: CompressedTree,
    pub position: VertexRef,
    /// Process time `n`.
    pub clock: ExtCount,
    pub law: LawSequence,
    pub rng: Stream,
    pub seed: u64,
    /// Number of growth events so far.
    pub growth_index: u64,
    /// Time of the latest growth event (zero before the first).
    pub last_growth: ExtCount,
    /// Vertex count of the initial tree.
    pub initial_vertices: ExtCount,
}

impl ProcessState {
    /// Walker starts at the root at time zero.
    pub fn new(spec: &TreeSpec, law: LawSequence, seed: u64) -> Result<Self, EngineError> {
        let tree = CompressedTree::init(spec)?;
        Ok(Self::from_tree(tree, law, seed))
    }

    pub fn from_tree(tree: CompressedTree, law: LawSequence, seed: u64) -> Self {
        ProcessState {
            position: VertexRef::Vertex(tree.root()),
            initial_vertices: tree.vertex_count(),
            tree,
            clock: ExtCount::ZERO,
            law,
            rng: stream(seed),
            seed,
            growth_index: 0,
            last_growth: ExtCount::ZERO,
        }
    }
}

/// What one call to [`step_exact`] did.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub growth: Option<GrowthEvent>,
    pub from: VertexRef,
    pub to: VertexRef,
}

fn grow_here(state: &mut ProcessState, z: ExtCount, time: ExtCount) -> Result<GrowthEvent, EngineError> {
    let event = state.tree.grow(state.position, z, time)?;
    state.position = VertexRef::Vertex(event.parent);
    state.growth_index += 1;
    state.last_growth = time;
    Ok(event)
}

/// One transition: draw `Z`, grow `Z` leaves at the walker, then move to a
/// uniform neighbour in the updated tree.
pub fn step_exact(state: &mut ProcessState) -> Result<StepOutcome, EngineError> {
    let time = state.clock + 1;
    let z = state
        .law
        .sample_at(time.to_f64(), Some(state.growth_index + 1), &mut state.rng);
    let growth = if z.is_zero() {
        None
    } else {
        Some(grow_here(state, z, time)?)
    };
    let from = state.position;
    let to = state.tree.random_neighbor(from, &mut state.rng);
    state.position = to;
    state.clock = time;
    Ok(StepOutcome { growth, from, to })
}

/// Samples `(gap, z)`: the distance from the clock to the next growth time
/// and the number of leaves it adds. `None` when growth has stopped for good.
pub fn sample_next_growth(state: &mut ProcessState) -> Option<(ExtCount, ExtCount)> {
    let t = state.law.next_growth_time(state.clock, &mut state.rng)?;
    let z = state.law.leaf_count(t.to_f64(), state.growth_index + 1);
    Some((t.saturating_sub(state.clock), z))
}

/// Number of walk steps after which the frozen walk is treated as mixed.
pub fn mixing_threshold(vertex_count: ExtCount, epsilon: f64, policy: ThresholdPolicy) -> ExtCount {
    let log_eps = (1.0 / epsilon).ln();
    let lv = vertex_count.log2();
    let log2_t = match policy {
        ThresholdPolicy::Rigorous => 1.0 + 2.0 * lv + log_eps.log2(),
        ThresholdPolicy::Fast { coefficient } => {
            coefficient.log2() + lv + 2.0 * lv.max(0.0).log2() + log_eps.log2()
        }
    };
    if log2_t > 60.0 {
        return ExtCount::from_log2(log2_t);
    }
    let v = vertex_count.to_f64();
    let t = match policy {
        ThresholdPolicy::Rigorous => 2.0 * v * v * log_eps,
        ThresholdPolicy::Fast { coefficient } => coefficient * v * v.log2().powi(2) * log_eps,
    };
    ExtCount::from_f64((t * (1.0 - 1e-15)).ceil())
}

/// How the walker crossed one inter-growth interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transport {
    None,
    Exact,
    Stationary,
    Lumped,
}

/// The lumped walk: one state per materialized vertex and one per live
/// bundle, whose members are exchangeable.
#[derive(Clone, Debug)]
pub struct LumpedChain {
    pub states: Vec<VertexRef>,
    pub matrix: Vec<Vec<f64>>,
}

impl LumpedChain {
    pub fn build(tree: &CompressedTree, max_states: usize) -> Result<Self, EngineError> {
        let n = tree.lumped_state_count();
        if n > max_states {
            return Err(EngineError::StateExplosion {
                states: n,
                max: max_states,
            });
        }
        let mut states: Vec<VertexRef> = (0..tree.materialized_count()).map(VertexRef::Vertex).collect();
        let mut bundle_state = vec![usize::MAX; tree.bundle_slots()];
        for (b, _) in tree.live_bundles() {
            bundle_state[b] = states.len();
            states.push(VertexRef::Member(b));
        }
        let mut matrix = vec![vec![0.0; n]; n];
        for (i, &s) in states.iter().enumerate() {
            let total = tree.walk_degree(s);
            for opt in tree.walk_options(s) {
                let j = match opt.target {
                    WalkTarget::SelfLoop => i,
                    WalkTarget::Vertex(v) => v,
                    WalkTarget::Bundle(b) => bundle_state[b],
                };
                matrix[i][j] += opt.weight.ratio(&total);
            }
        }
        Ok(LumpedChain { states, matrix })
    }

    pub fn index_of(&self, at: VertexRef) -> Option<usize> {
        self.states.iter().position(|&s| s == at)
    }

    /// Exact `steps`-step law from state `start`, by binary powering with
    /// row renormalisation after each squaring.
    pub fn distribution(&self, start: usize, steps: ExtCount) -> Vec<f64> {
        let n = self.states.len();
        let mut dist = vec![0.0; n];
        dist[start] = 1.0;
        if steps.is_zero() {
            return dist;
        }
        let (mant, shift) = binary_digits(&steps);
        let top = shift + (64 - mant.leading_zeros());
        let mut power = self.matrix.clone();
        for bit in 0..top {
            if bit >= shift && (mant >> (bit - shift)) & 1 == 1 {
                dist = vec_mat(&dist, &power);
                normalize(&mut dist);
            }
            if bit + 1 == top {
                break;
            }
            let next = mat_mul(&power, &power);
            let converged = rows_agree(&next, 1e-15);
            power = next;
            power.iter_mut().for_each(|row| normalize(row));
            if converged {
                // every further power is the same rank-one projector
                dist = vec_mat(&dist, &power);
                normalize(&mut dist);
                break;
            }
        }
        dist
    }
}

/// `steps` as `mant * 2^shift` with a 53-bit mantissa.
fn binary_digits(steps: &ExtCount) -> (u64, u32) {
    match steps.as_u64() {
        Some(s) => (s, 0),
        None => {
            let shift = steps.log2().floor() as u32 - 52;
            let mant = steps.ratio(&ExtCount::from_log2(shift as f64)).round() as u64;
            (mant, shift)
        }
    }
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

fn rows_agree(m: &[Vec<f64>], tol: f64) -> bool {
    let first = &m[0];
    m.iter()
        .skip(1)
        .all(|row| row.iter().zip(first).all(|(a, b)| (a - b).abs() <= tol))
}

fn sample_index<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * dist.iter().sum::<f64>();
    let mut acc = 0.0;
    for (i, &p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    dist.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn lumped_transport(state: &mut ProcessState, steps: ExtCount, max_states: usize) -> Result<(), EngineError> {
    let chain = LumpedChain::build(&state.tree, max_states)?;
    let start = chain.index_of(state.position).expect("walker is a lumped state");
    let dist = chain.distribution(start, steps);
    state.position = chain.states[sample_index(&dist, &mut state.rng)];
    Ok(())
}

fn walk_exact(state: &mut ProcessState, steps: u64) {
    state.position = state.tree.walk(state.position, steps, &mut state.rng);
}

/// Places the walker at time `tau - 1` for the next growth time `tau` and
/// sets the clock there. Returns `(gap, z, transport)`, or `None` once
/// growth has stopped.
pub fn advance_to_next_growth(
    state: &mut ProcessState,
    mode: &EngineMode,
) -> Result<Option<(ExtCount, ExtCount, Transport)>, EngineError> {
    let Some((gap, z)) = sample_next_growth(state) else {
        return Ok(None);
    };
    let steps = gap.saturating_sub(ExtCount::ONE);
    let transport = if steps.is_zero() {
        Transport::None
    } else {
        match mode {
            EngineMode::Exact => {
                let s = steps.as_u64().ok_or(EngineError::BudgetExceeded {
                    steps,
                    cap: u64::MAX,
                })?;
                walk_exact(state, s);
                Transport::Exact
            }
            EngineMode::Shortcut {
                epsilon,
                policy,
                fallback_cap,
                lumped,
            } => {
                let threshold = mixing_threshold(state.tree.vertex_count(), *epsilon, *policy);
                if steps >= threshold {
                    state.position = state.tree.sample_stationary(&mut state.rng);
                    Transport::Stationary
                } else if steps <= ExtCount::from_u64(*fallback_cap) {
                    walk_exact(state, steps.as_u64().expect("below the cap"));
                    Transport::Exact
                } else if let Some(max_states) = lumped {
                    lumped_transport(state, steps, *max_states)?;
                    Transport::Lumped
                } else {
                    return Err(EngineError::BudgetExceeded {
                        steps,
                        cap: *fallback_cap,
                    });
                }
            }
            EngineMode::Lumped { max_states } => {
                lumped_transport(state, steps, *max_states)?;
                Transport::Lumped
            }
        }
    };
    state.clock = state.clock + steps;
    Ok(Some((gap, z, transport)))
}

/// The growth half of a step at an already sampled growth time, followed by
/// the move.
pub fn apply_growth_step(state: &mut ProcessState, z: ExtCount) -> Result<StepOutcome, EngineError> {
    let time = state.clock + 1;
    let growth = Some(grow_here(state, z, time)?);
    let from = state.position;
    let to = state.tree.random_neighbor(from, &mut state.rng);
    state.position = to;
    state.clock = time;
    Ok(StepOutcome { growth, from, to })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Horizon {
    Steps(u64),
    GrowthEvents(u64),
    Vertices(u64),
}

/// Context handed to observers at each growth event.
#[derive(Clone, Debug)]
pub struct GrowthContext<'a> {
    pub event: &'a GrowthEvent,
    /// `tau_k - tau_{k-1}`, with `tau_0 = 0`.
    pub gap: ExtCount,
    /// One-based index `k` of this growth.
    pub k: u64,
    pub transport: Transport,
    /// Walker position after the move that follows the growth.
    pub walker_after: VertexRef,
}

pub trait Observer {
    fn name(&self) -> &str;

    /// Whether the observer needs one callback per walk step.
    fn wants_steps(&self) -> bool {
        false
    }

    fn on_start(&mut self, _state: &ProcessState) -> Result<(), String> {
        Ok(())
    }

    /// After the move to `state.position` at time `state.clock`.
    fn on_step(&mut self, _state: &ProcessState, _from: VertexRef) -> Result<(), String> {
        Ok(())
    }

    /// After the growth and the move that follows it.
    fn on_growth(&mut self, _state: &ProcessState, _ctx: &GrowthContext<'_>) -> Result<(), String> {
        Ok(())
    }

    fn on_finish(&mut self, _state: &ProcessState) -> Result<(), String> {
        Ok(())
    }
}

/// Counts of how inter-growth intervals were crossed.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub growth_events: u64,
    pub final_clock: ExtCount,
    pub vertex_count: ExtCount,
    pub exact_intervals: u64,
    pub exact_steps: ExtCount,
    pub stationary_intervals: u64,
    pub lumped_intervals: u64,
    /// Growth stopped for good before the horizon.
    pub growth_exhausted: bool,
}

fn notify<F>(observers: &mut [&mut dyn Observer], mut f: F) -> Result<(), EngineError>
where
    F: FnMut(&mut dyn Observer) -> Result<(), String>,
{
    for o in observers.iter_mut() {
        f(&mut **o).map_err(|msg| EngineError::Observer {
            name: o.name().to_string(),
            msg,
        })?;
    }
    Ok(())
}

fn done(state: &ProcessState, horizon: Horizon) -> bool {
    match horizon {
        Horizon::Steps(n) => state.clock >= ExtCount::from_u64(n),
        Horizon::GrowthEvents(k) => state.growth_index >= k,
        Horizon::Vertices(v) => state.tree.vertex_count() >= ExtCount::from_u64(v),
    }
}

/// Drives the chain to the horizon, feeding every observer.
///
/// In exact mode the next growth time is pre-sampled by thinning and the
/// walker is stepped individually up to it, which has the same law as
/// drawing `Z_n` at every step.
pub fn run(
    state: &mut ProcessState,
    mode: &EngineMode,
    horizon: Horizon,
    observers: &mut [&mut dyn Observer],
) -> Result<RunReport, EngineError> {
    mode.validate()?;
    if !mode.is_exact() {
        if let Some(o) = observers.iter().find(|o| o.wants_steps()) {
            return Err(EngineError::StepObserverOutsideExact(o.name().to_string()));
        }
        if matches!(horizon, Horizon::Steps(_)) {
            return Err(EngineError::InvalidMode(
                "a step horizon needs exact mode".into(),
            ));
        }
    }
    let mut report = RunReport::default();
    notify(observers, |o| o.on_start(state))?;
    let step_observers = observers.iter().any(|o| o.wants_steps());
    while !done(state, horizon) {
        if mode.is_exact() {
            let next = state.law.next_growth_time(state.clock, &mut state.rng);
            let limit = match horizon {
                Horizon::Steps(n) => Some(ExtCount::from_u64(n)),
                _ => None,
            };
            let Some(tau) = next.filter(|&t| limit.is_none_or(|l| t <= l)) else {
                // no growth before the horizon: walk out the remaining steps
                match limit {
                    Some(l) => {
                        let steps = l.saturating_sub(state.clock).as_u64().expect("u64 horizon");
                        walk_observed(state, steps, step_observers, observers)?;
                        report.exact_steps += steps;
                    }
                    None => report.growth_exhausted = true,
                }
                break;
            };
            let steps = (tau.saturating_sub(state.clock) - ExtCount::ONE)
                .as_u64()
                .ok_or(EngineError::BudgetExceeded {
                    steps: tau,
                    cap: u64::MAX,
                })?;
            walk_observed(state, steps, step_observers, observers)?;
            if steps > 0 {
                report.exact_intervals += 1;
                report.exact_steps += steps;
            }
            let z = state.law.leaf_count(tau.to_f64(), state.growth_index + 1);
            let prev = state.last_growth;
            let out = apply_growth_step(state, z)?;
            report.exact_steps += 1;
            let ctx = GrowthContext {
                event: out.growth.as_ref().expect("growth step"),
                gap: state.clock.saturating_sub(prev),
                k: state.growth_index,
                transport: if steps > 0 { Transport::Exact } else { Transport::None },
                walker_after: state.position,
            };
            notify(observers, |o| o.on_growth(state, &ctx))?;
            let from = out.from;
            if step_observers {
                notify(observers, |o| if o.wants_steps() { o.on_step(state, from) } else { Ok(()) })?;
            }
        } else {
            let prev = state.last_growth;
            let Some((gap, z, transport)) = advance_to_next_growth(state, mode)? else {
                report.growth_exhausted = true;
                break;
            };
            match transport {
                Transport::Exact => {
                    report.exact_intervals += 1;
                    report.exact_steps += gap.saturating_sub(ExtCount::ONE);
                }
                Transport::Stationary => report.stationary_intervals += 1,
                Transport::Lumped => report.lumped_intervals += 1,
                Transport::None => {}
            }
            let out = apply_growth_step(state, z)?;
            let ctx = GrowthContext {
                event: out.growth.as_ref().expect("growth step"),
                gap: state.clock.saturating_sub(prev),
                k: state.growth_index,
                transport,
                walker_after: state.position,
            };
            notify(observers, |o| o.on_growth(state, &ctx))?;
        }
    }
    notify(observers, |o| o.on_finish(state))?;
    report.growth_events = state.growth_index;
    report.final_clock = state.clock;
    report.vertex_count = state.tree.vertex_count();
    Ok(report)
}

fn walk_observed(
    state: &mut ProcessState,
    steps: u64,
    step_observers: bool,
    observers: &mut [&mut dyn Observer],
) -> Result<(), EngineError> {
    if !step_observers {
        walk_exact(state, steps);
        state.clock = state.clock + steps;
        return Ok(());
    }
    for _ in 0..steps {
        let from = state.position;
        state.position = state.tree.random_neighbor(from, &mut state.rng);
        state.clock += 1;
        notify(observers, |o| if o.wants_steps() { o.on_step(state, from) } else { Ok(()) })?;
    }
    Ok(())
}

/// Line-oriented event stream: `step <n> <from> <to>` and
/// `growth <k> <time> <parent> <count>`.
pub struct EventWriter<W: Write> {
    out: W,
    steps: bool,
}

impl<W: Write> EventWriter<W> {
    pub fn new(out: W, steps: bool) -> Self {
        EventWriter { out, steps }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Observer for EventWriter<W> {
    fn name(&self) -> &str {
        "event-writer"
    }

    fn wants_steps(&self) -> bool {
        self.steps
    }

    fn on_step(&mut self, state: &ProcessState, from: VertexRef) -> Result<(), String> {
        writeln!(self.out, "step {} {} {}", state.clock, from, state.position).map_err(|e| e.to_string())
    }

    fn on_growth(&mut self, _state: &ProcessState, ctx: &GrowthContext<'_>) -> Result<(), String> {
        writeln!(
            self.out,
            "growth {} {} {} {}",
            ctx.k,
            ctx.event.time,
            VertexRef::Vertex(ctx.event.parent),
            ctx.event.leaf_count
        )
        .map_err(|e| e.to_string())
    }

    fn on_finish(&mut self, _state: &ProcessState) -> Result<(), String> {
        self.out.flush().map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::LawSpec;
    use crate::oracles::{exact_walk_distribution, tv_distance, Distribution, SimpleTree};

    fn constant(p: f64, z: u64) -> LawSequence {
        LawSequence::new(LawSpec::Constant { p, z }).unwrap()
    }

    fn bp(gamma: f64, shift: u64) -> LawSequence {
        LawSequence::new(LawSpec::BernoulliPower { c: 1.0, gamma })
            .unwrap()
            .shifted(shift)
    }

    #[test]
    fn thresholds() {
        let e1 = (-1.0f64).exp();
        assert_eq!(
            mixing_threshold(ExtCount::from_u64(10), e1, ThresholdPolicy::Rigorous),
            ExtCount::from_u64(200)
        );
        let t1 = mixing_threshold(ExtCount::ONE, 0.01, ThresholdPolicy::Rigorous);
        assert_eq!(t1, ExtCount::from_u64((2.0 * 100f64.ln()).ceil() as u64));
        let fast = mixing_threshold(
            ExtCount::from_u64(1024),
            0.01,
            ThresholdPolicy::Fast { coefficient: 8.0 },
        );
        assert_eq!(fast, ExtCount::from_u64((8.0 * 1024.0 * 100.0 * 100f64.ln()).ceil() as u64));
        let huge = mixing_threshold(ExtCount::from_log2(200.0), 0.01, ThresholdPolicy::Rigorous);
        assert!((huge.log2() - (401.0 + 100f64.ln().log2())).abs() < 1e-9);
    }

    #[test]
    fn single_vertex_unit_growth_first_step() {
        let mut leaf = 0;
        let n = 100_000;
        for seed in 0..n {
            let mut s = ProcessState::new(&TreeSpec::SingleVertex, constant(1.0, 1), seed).unwrap();
            let out = step_exact(&mut s).unwrap();
            assert!(out.growth.is_some());
            assert_eq!(s.tree.vertex_count(), ExtCount::from_u64(2));
            if s.position != VertexRef::Vertex(0) {
                leaf += 1;
            }
        }
        let f = leaf as f64 / n as f64;
        assert!((f - 0.5).abs() < 0.006, "{f}");
    }

    #[test]
    fn leaf_moves_to_root() {
        let mut s = ProcessState::new(&TreeSpec::SingleEdge, constant(0.0, 1), 3).unwrap();
        s.position = VertexRef::Vertex(1);
        step_exact(&mut s).unwrap();
        assert_eq!(s.position, VertexRef::Vertex(0));
    }

    #[test]
    fn gap_examples() {
        let mut s = ProcessState::new(&TreeSpec::SingleVertex, constant(1.0, 1), 1).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_next_growth(&mut s).unwrap().0, ExtCount::ONE);
        }
        let mut s = ProcessState::new(&TreeSpec::SingleVertex, bp(0.8, 0), 1).unwrap();
        for _ in 0..100 {
            assert_eq!(sample_next_growth(&mut s).unwrap().0, ExtCount::ONE);
        }
        let mut s = ProcessState::new(&TreeSpec::SingleVertex, bp(0.8, 1), 1).unwrap();
        let n = 200_000;
        let ones = (0..n)
            .filter(|_| sample_next_growth(&mut s).unwrap().0 == ExtCount::ONE)
            .count();
        let f = ones as f64 / n as f64;
        assert!((f - 2f64.powf(-0.8)).abs() < 0.005, "{f}");
        let mut s = ProcessState::new(&TreeSpec::SingleVertex, constant(0.0, 1), 1).unwrap();
        assert!(sample_next_growth(&mut s).is_none());
    }

    #[test]
    fn lumped_two_steps_on_single_edge() {
        let t = CompressedTree::init(&TreeSpec::SingleEdge).unwrap();
        let chain = LumpedChain::build(&t, 10).unwrap();
        let d = chain.distribution(0, ExtCount::from_u64(2));
        assert!((d[0] - 0.75).abs() < 1e-15 && (d[1] - 0.25).abs() < 1e-15);
        assert!(matches!(
            LumpedChain::build(&t, 1),
            Err(EngineError::StateExplosion { states: 2, max: 1 })
        ));
    }

    #[test]
    fn lumped_huge_power_is_stationary() {
        let mut t = CompressedTree::init(&TreeSpec::SingleVertex).unwrap();
        t.grow(VertexRef::Vertex(0), ExtCount::from_log2(80.0), ExtCount::ONE).unwrap();
        let chain = LumpedChain::build(&t, 10).unwrap();
        let d = chain.distribution(0, ExtCount::from_log2(100.0));
        // root weight 2^80 + 1 against 2^81 + 1 in total
        assert!((d[0] - 0.5).abs() < 1e-12, "{d:?}");
    }

    #[test]
    fn lumped_matches_full_chain() {
        let mut t = CompressedTree::init(&TreeSpec::SingleEdge).unwrap();
        t.grow(VertexRef::Vertex(1), ExtCount::from_u64(3), ExtCount::ONE).unwrap();
        t.grow(VertexRef::Member(0), ExtCount::from_u64(2), ExtCount::from_u64(2)).unwrap();
        let chain = LumpedChain::build(&t, 50).unwrap();
        let exp = SimpleTree::from_compressed(&t, 100).unwrap();
        for steps in [1u64, 2, 7, 33, 64] {
            let lumped = chain.distribution(0, ExtCount::from_u64(steps));
            let full = exact_walk_distribution(&exp.tree, 0, steps, 100).unwrap();
            let mut collapsed = vec![0.0; chain.states.len()];
            for (v, origin) in exp.origin.iter().enumerate() {
                collapsed[chain.index_of(*origin).unwrap()] += full.mass[v];
            }
            let tv = tv_distance(&Distribution { mass: lumped }, &Distribution { mass: collapsed });
            assert!(tv < 1e-12, "{steps}: {tv}");
        }
    }

    #[test]
    fn growth_precedes_the_move() {
        // single edge, walker at the root (degree 1, plus the loop), grow 3
        let n = 200_000;
        let mut fresh = 0;
        for seed in 0..n {
            let mut s = ProcessState::new(&TreeSpec::SingleEdge, constant(1.0, 3), seed).unwrap();
            step_exact(&mut s).unwrap();
            if matches!(s.position, VertexRef::Member(_)) {
                fresh += 1;
            }
        }
        let f = fresh as f64 / n as f64;
        assert!((f - 3.0 / 5.0).abs() < 0.005, "{f}");
    }

    fn run_log(mode: &EngineMode, horizon: Horizon, seed: u64, steps: bool) -> String {
        let mut s = ProcessState::new(&TreeSpec::SingleEdge, bp(0.75, 0), seed).unwrap();
        let mut w = EventWriter::new(Vec::new(), steps);
        run(&mut s, mode, horizon, &mut [&mut w]).unwrap();
        String::from_utf8(w.into_inner()).unwrap()
    }

    #[test]
    fn run_counts_and_determinism() {
        let mut s = ProcessState::new(
            &TreeSpec::Edges {
                root: 0,
                edges: vec![(0, 1), (1, 2)],
            },
            constant(0.0, 1),
            9,
        )
        .unwrap();
        let mut w = EventWriter::new(Vec::new(), true);
        run(&mut s, &EngineMode::Exact, Horizon::Steps(100), &mut [&mut w]).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("step")).count(), 100);
        assert_eq!(text.lines().filter(|l| l.starts_with("growth")).count(), 0);

        let shortcut = EngineMode::Shortcut {
            epsilon: 0.01,
            policy: ThresholdPolicy::Fast { coefficient: 8.0 },
            fallback_cap: DEFAULT_FALLBACK_CAP,
            lumped: None,
        };
        let a = run_log(&shortcut, Horizon::GrowthEvents(1000), 4, false);
        assert_eq!(a.lines().count(), 1000);
        assert_eq!(a, run_log(&shortcut, Horizon::GrowthEvents(1000), 4, false));
        let e = run_log(&EngineMode::Exact, Horizon::Steps(20_000), 4, true);
        assert_eq!(e, run_log(&EngineMode::Exact, Horizon::Steps(20_000), 4, true));
        assert_eq!(e.lines().filter(|l| l.starts_with("step")).count(), 20_000);
    }

    #[test]
    fn step_observers_need_exact_mode() {
        let mut s = ProcessState::new(&TreeSpec::SingleEdge, bp(0.75, 0), 1).unwrap();
        let mut w = EventWriter::new(Vec::new(), true);
        let err = run(
            &mut s,
            &EngineMode::Lumped { max_states: 50 },
            Horizon::GrowthEvents(3),
            &mut [&mut w],
        );
        assert!(matches!(err, Err(EngineError::StepObserverOutsideExact(_))));
    }

    #[test]
    fn budget_is_enforced() {
        let mut s = ProcessState::new(&TreeSpec::SingleEdge, bp(0.5, 1000), 1).unwrap();
        let mode = EngineMode::Shortcut {
            epsilon: 0.01,
            policy: ThresholdPolicy::Rigorous,
            fallback_cap: 1,
            lumped: None,
        };
        let mut hit = false;
        for _ in 0..50 {
            match advance_to_next_growth(&mut s, &mode) {
                Err(EngineError::BudgetExceeded { .. }) => {
                    hit = true;
                    break;
                }
                Ok(Some((_, z, _))) => {
                    apply_growth_step(&mut s, z).unwrap();
                }
                other => panic!("{other:?}"),
            }
        }
        assert!(hit);
    }
}
