//! Leaf-law sequences `L_1, L_2, ...`: sampling, moments, shifts, and the
//! analytic condition checkers.
//!
//! Every built-in variant has the form "`Z_n = v_n` with probability `p_n`,
//! else 0", so a law is fully described by its growth probability and its
//! conditional leaf count. Indices are *global* (`shift + n`).

mod conditions;
mod sequence;

pub use conditions::{
    check_recurrence_conditions, check_transience_conditions, series_trend, ConditionReport,
    SeriesTrend, TransienceOptions, TransienceReport, Verdict,
};
pub use sequence::{Approx, SeqSpec, DIRECT_SUM_LIMIT};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::count::ExtCount;

/// Probabilities below this are treated as exact zero by the samplers.
pub const PROBABILITY_FLOOR: f64 = 1.0 / (1u64 << 60) as f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LawError {
    #[error("invalid law parameters: {0}")]
    InvalidParameters(String),
    #[error("table law is undefined at index {0} and has no tail rule")]
    UndefinedIndex(u64),
    #[error("burst sizes indexed by growth count have no per-time moments")]
    NotTimeIndexed,
    #[error("argument error: {0}")]
    Argument(String),
}

/// Which index the burst size `w` of a [`LawSpec::WeightedBurst`] follows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BurstIndex {
    /// `Z_n = w_n`: the size follows process time.
    #[default]
    Time,
    /// The k-th growth adds `w_k` leaves.
    Growth,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub value: u64,
    pub prob: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailRule {
    /// Indices past the table are undefined.
    #[default]
    None,
    /// No growth past the table.
    Zero,
    /// The last entry repeats forever.
    RepeatLast,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum LawSpec {
    /// One leaf with probability `min(1, c n^-gamma)`.
    BernoulliPower { c: f64, gamma: f64 },
    /// `ceil(ln n)` leaves with probability `n^-delta`.
    LogBurst { delta: f64 },
    /// `w` leaves with probability `p_n`.
    WeightedBurst {
        p: SeqSpec,
        w: SeqSpec,
        #[serde(default)]
        w_index: BurstIndex,
    },
    /// `z` leaves with probability `p`.
    Constant { p: f64, z: u64 },
    /// `entries[n-1].value` leaves with probability `entries[n-1].prob`.
    Table {
        entries: Vec<TableEntry>,
        #[serde(default)]
        tail: TailRule,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Moments {
    /// `m_n = E[Z_n]`.
    pub mean: f64,
    /// `q_n = P(Z_n = 0)`.
    pub zero_prob: f64,
}

/// A leaf-law sequence with its shift. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawWire", into = "LawWire")]
pub struct LawSequence {
    spec: LawSpec,
    shift: u64,
    table_suffix_max: Vec<f64>,
}

#[derive(Clone, Serialize, Deserialize)]
struct LawWire {
    #[serde(flatten)]
    spec: LawSpec,
    #[serde(default)]
    shift: u64,
}

impl TryFrom<LawWire> for LawSequence {
    type Error = LawError;

    fn try_from(w: LawWire) -> Result<Self, LawError> {
        Ok(LawSequence::new(w.spec)?.shifted(w.shift))
    }
}

impl From<LawSequence> for LawWire {
    fn from(l: LawSequence) -> Self {
        LawWire {
            spec: l.spec,
            shift: l.shift,
        }
    }
}

fn floor_prob(p: f64) -> f64 {
    if p < PROBABILITY_FLOOR || p.is_nan() {
        0.0
    } else {
        p.min(1.0)
    }
}

fn log_burst_size(m: f64) -> f64 {
    if m <= 1.0 {
        0.0
    } else {
        m.ln().ceil()
    }
}

impl LawSequence {
    pub fn new(spec: LawSpec) -> Result<Self, LawError> {
        let bad = |msg: &str| Err(LawError::InvalidParameters(msg.to_string()));
        match &spec {
            LawSpec::BernoulliPower { c, gamma } => {
                if !(*c > 0.0 && c.is_finite()) || !(*gamma > 0.0 && gamma.is_finite()) {
                    return bad("bernoulli-power needs c > 0 and gamma > 0");
                }
            }
            LawSpec::LogBurst { delta } => {
                if !(*delta > 0.0 && *delta <= 1.0) {
                    return bad("log-burst needs delta in (0, 1]");
                }
            }
            LawSpec::WeightedBurst { w, .. } => {
                if !w.is_nondecreasing() {
                    return bad("burst sizes w must be nondecreasing");
                }
                if w.count(1.0).is_zero() {
                    return bad("burst sizes w must be at least 1");
                }
            }
            LawSpec::Constant { p, .. } => {
                if !(0.0..=1.0).contains(p) {
                    return bad("constant law needs p in [0, 1]");
                }
            }
            LawSpec::Table { entries, tail } => {
                if entries.iter().any(|e| !(0.0..=1.0).contains(&e.prob)) {
                    return bad("table probabilities must lie in [0, 1]");
                }
                if entries.is_empty() && *tail == TailRule::RepeatLast {
                    return bad("repeat-last tail needs at least one entry");
                }
            }
        }
        let table_suffix_max = match &spec {
            LawSpec::Table { entries, tail } => {
                let tail_p = match tail {
                    TailRule::RepeatLast => {
                        let last = entries.last().expect("validated");
                        if last.value == 0 {
                            0.0
                        } else {
                            last.prob
                        }
                    }
                    _ => 0.0,
                };
                let mut out = vec![0.0; entries.len() + 1];
                out[entries.len()] = tail_p;
                for (i, e) in entries.iter().enumerate().rev() {
                    let p = if e.value == 0 { 0.0 } else { e.prob };
                    out[i] = out[i + 1].max(p);
                }
                out
            }
            _ => Vec::new(),
        };
        Ok(LawSequence {
            spec,
            shift: 0,
            table_suffix_max,
        })
    }

    pub fn spec(&self) -> &LawSpec {
        &self.spec
    }

    pub fn shift(&self) -> u64 {
        self.shift
    }

    /// `L^(m)`: local step n now draws from `L_{shift+m+n}`.
    pub fn shifted(&self, m: u64) -> LawSequence {
        let mut out = self.clone();
        out.shift += m;
        out
    }

    fn global(&self, n: f64) -> f64 {
        self.shift as f64 + n
    }

    fn table_entry(&self, m: f64) -> Option<TableEntry> {
        let LawSpec::Table { entries, tail } = &self.spec else {
            return None;
        };
        let idx = m.round() as u64;
        if idx >= 1 && idx as usize <= entries.len() {
            return Some(entries[idx as usize - 1]);
        }
        match tail {
            TailRule::None => None,
            TailRule::Zero => Some(TableEntry { value: 0, prob: 1.0 }),
            TailRule::RepeatLast => entries.last().copied(),
        }
    }

    /// Raw success probability and conditional size at global index `m`.
    fn outcome(&self, m: f64, growth_index: Option<u64>) -> (f64, ExtCount) {
        match &self.spec {
            LawSpec::BernoulliPower { c, gamma } => ((c * m.powf(-gamma)).min(1.0), ExtCount::ONE),
            LawSpec::LogBurst { delta } => {
                let size = log_burst_size(m);
                (m.powf(-delta).min(1.0), ExtCount::from_f64(size))
            }
            LawSpec::WeightedBurst { p, w, w_index } => {
                let idx = match (w_index, growth_index) {
                    (BurstIndex::Growth, Some(k)) => k as f64,
                    _ => m,
                };
                (p.value(m).clamp(0.0, 1.0), w.count(idx))
            }
            LawSpec::Constant { p, z } => (*p, ExtCount::from_u64(*z)),
            LawSpec::Table { .. } => match self.table_entry(m) {
                Some(e) => (e.prob, ExtCount::from_u64(e.value)),
                None => (0.0, ExtCount::ZERO),
            },
        }
    }

    /// `P(Z_{shift+n} >= 1)` after the precision floor.
    pub fn growth_prob(&self, n: f64) -> f64 {
        let (p, size) = self.outcome(self.global(n), None);
        if size.is_zero() {
            0.0
        } else {
            floor_prob(p)
        }
    }

    /// Number of leaves added when step `n` (the `growth_index`-th growth)
    /// does grow.
    pub fn leaf_count(&self, n: f64, growth_index: u64) -> ExtCount {
        self.outcome(self.global(n), Some(growth_index)).1
    }

    /// Supremum of [`growth_prob`](Self::growth_prob) over local indices `>= n`.
    pub fn growth_prob_bound(&self, n: f64) -> f64 {
        floor_prob(self.raw_bound(n))
    }

    fn raw_bound(&self, n: f64) -> f64 {
        let m = self.global(n);
        match &self.spec {
            LawSpec::BernoulliPower { c, gamma } => (c * m.powf(-gamma)).min(1.0),
            LawSpec::LogBurst { delta } => m.max(2.0).powf(-delta),
            LawSpec::WeightedBurst { p, .. } => p.sup_from(m).clamp(0.0, 1.0),
            LawSpec::Constant { p, z } => {
                if *z == 0 {
                    0.0
                } else {
                    *p
                }
            }
            LawSpec::Table { .. } => {
                let idx = (m.round().max(1.0) as usize - 1).min(self.table_suffix_max.len() - 1);
                self.table_suffix_max[idx]
            }
        }
    }

    /// Growth probability without the precision floor.
    fn raw_growth_prob(&self, n: f64) -> f64 {
        let (p, size) = self.outcome(self.global(n), None);
        if size.is_zero() || p.is_nan() {
            0.0
        } else {
            p.clamp(0.0, 1.0)
        }
    }

    /// One draw of `Z_{shift+n}`. Consumes exactly one uniform variate.
    pub fn sample_z<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> ExtCount {
        self.sample_at(n as f64, None, rng)
    }

    /// Draw used by the engine, which knows the growth count.
    pub fn sample_at<R: Rng + ?Sized>(
        &self,
        n: f64,
        growth_index: Option<u64>,
        rng: &mut R,
    ) -> ExtCount {
        let (p, size) = self.outcome(self.global(n), growth_index);
        let u: f64 = rng.random();
        if !size.is_zero() && u < floor_prob(p) {
            size
        } else {
            ExtCount::ZERO
        }
    }

    /// Exact `(m_n, q_n)` for the law at local index `n`.
    pub fn moments(&self, n: u64) -> Result<Moments, LawError> {
        if n == 0 {
            return Err(LawError::Argument("moments need n >= 1".into()));
        }
        if let LawSpec::WeightedBurst {
            w_index: BurstIndex::Growth,
            ..
        } = self.spec
        {
            return Err(LawError::NotTimeIndexed);
        }
        let m = self.global(n as f64);
        if matches!(self.spec, LawSpec::Table { .. }) && self.table_entry(m).is_none() {
            return Err(LawError::UndefinedIndex(self.shift + n));
        }
        let (p, size) = self.outcome(m, None);
        let p = floor_prob(p);
        if size.is_zero() {
            return Ok(Moments {
                mean: 0.0,
                zero_prob: 1.0,
            });
        }
        Ok(Moments {
            mean: p * size.to_f64(),
            zero_prob: 1.0 - p,
        })
    }

    /// `M_n = sum_{k=1}^{n} m_k` by direct summation.
    pub fn cumulative_mean(&self, n: u64) -> Result<f64, LawError> {
        let mut total = 0.0;
        for k in 1..=n {
            total += self.moments(k)?.mean;
        }
        Ok(total)
    }

    /// Samples the next growth time strictly after `clock` by thinning.
    ///
    /// Candidates come from a geometric jump with the current supremum of the
    /// growth probability; a candidate at local index `t` is accepted with
    /// probability `p_t / bound`, and the bound is re-tightened after every
    /// rejection. Returns `None` when no growth can ever occur again.
    ///
    /// The precision floor is not applied here: a per-step probability below
    /// it still carries observable mass over a jump of `1 / p` steps.
    pub fn next_growth_time<R: Rng + ?Sized>(&self, clock: ExtCount, rng: &mut R) -> Option<ExtCount> {
        let mut t = clock;
        loop {
            let bound = self.raw_bound(t.to_f64() + 1.0);
            if bound <= 0.0 || bound.is_nan() {
                return None;
            }
            let jump = if bound >= 1.0 {
                ExtCount::ONE
            } else {
                let u: f64 = 1.0 - rng.random::<f64>();
                ExtCount::from_f64(1.0 + (u.ln() / (-bound).ln_1p()).floor())
            };
            t = t + jump;
            let p = self.raw_growth_prob(t.to_f64());
            if p >= bound || rng.random::<f64>() * bound < p {
                return Some(t);
            }
        }
    }
}
