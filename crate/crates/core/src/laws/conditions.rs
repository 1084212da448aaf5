//! Finite-horizon checkers for the recurrence conditions (A1)-(A3) and the
//! three transience conditions.
//!
//! Limits cannot be certified numerically; every verdict here is a trend over
//! the tail of a trace.

use serde::Serialize;

use super::sequence::{SeqSpec, DIRECT_SUM_LIMIT};
use super::{LawError, LawSequence};
use crate::oracles::{chebyshev_bound_from_mass, poisson_cdf, RBound};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    SatisfiedTrend,
    ViolatedTrend,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionReport {
    pub verdict: Verdict,
    /// `(n, statistic)` pairs, strictly increasing in `n`.
    pub trace: Vec<(f64, f64)>,
    pub notes: String,
}

/// Shape of a partial-sum trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesTrend {
    Plateau,
    Diverging,
    Undetermined,
}

/// Classifies a partial-sum trace by its increments over the last half.
///
/// The last half of the increments is split in two; the series plateaus when
/// the later block is at most `1/factor` of the earlier one or every
/// increment in the last half is below `tail_tol`, and diverges when the later
/// block keeps at least `1 - 1/(2 factor)` of the earlier one.
pub fn series_trend(partial_sums: &[f64], factor: f64, tail_tol: f64) -> SeriesTrend {
    if partial_sums.len() < 5 {
        return SeriesTrend::Undetermined;
    }
    if partial_sums.iter().any(|s| !s.is_finite()) {
        return SeriesTrend::Diverging;
    }
    let inc: Vec<f64> = partial_sums.windows(2).map(|w| w[1] - w[0]).collect();
    let tail = &inc[inc.len() / 2..];
    let (early, late) = tail.split_at(tail.len() / 2);
    let early_sum: f64 = early.iter().sum();
    let late_sum: f64 = late.iter().sum();
    if tail.iter().all(|d| d.abs() < tail_tol) {
        return SeriesTrend::Plateau;
    }
    if early_sum <= 0.0 {
        return if late_sum <= 0.0 {
            SeriesTrend::Plateau
        } else {
            SeriesTrend::Diverging
        };
    }
    let ratio = late_sum / early_sum * (early.len() as f64 / late.len() as f64);
    if ratio <= 1.0 / factor {
        SeriesTrend::Plateau
    } else if ratio >= 1.0 - 0.5 / factor {
        SeriesTrend::Diverging
    } else {
        SeriesTrend::Undetermined
    }
}

fn log_grid(horizon: u64) -> Vec<u64> {
    let mut grid = Vec::new();
    let mut x = 1.0f64;
    while (x.ceil() as u64) < horizon {
        let n = x.ceil() as u64;
        if grid.last() != Some(&n) {
            grid.push(n);
        }
        x *= 1.25;
    }
    grid.push(horizon);
    grid
}

/// Evaluates `s_n = (1 - q_n) M_n^2` (A3) on a log-spaced grid, and checks
/// (A1) finite means and (A2) eventually nondecreasing `q_n`.
pub fn check_recurrence_conditions(seq: &LawSequence, horizon: u64) -> Result<ConditionReport, LawError> {
    check_recurrence_conditions_with(seq, horizon, 2.0)
}

pub fn check_recurrence_conditions_with(
    seq: &LawSequence,
    horizon: u64,
    factor: f64,
) -> Result<ConditionReport, LawError> {
    if horizon < 10 {
        return Err(LawError::Argument(format!("horizon {horizon} < 10")));
    }
    let grid = log_grid(horizon);
    let mut trace = Vec::with_capacity(grid.len());
    let mut cumulative = 0.0f64;
    let mut all_finite = true;
    let mut last_q_drop = 0u64;
    let mut prev_q = f64::NEG_INFINITY;
    let mut next = 0usize;
    for n in 1..=horizon {
        let m = seq.moments(n)?;
        all_finite &= m.mean.is_finite();
        if m.zero_prob < prev_q {
            last_q_drop = n;
        }
        prev_q = m.zero_prob;
        cumulative += m.mean;
        if grid[next] == n {
            trace.push((n as f64, (1.0 - m.zero_prob) * cumulative * cumulative));
            next += 1;
        }
    }
    let tail: Vec<f64> = trace[trace.len() / 2..].iter().map(|p| p.1).collect();
    let first = tail[0];
    let last = *tail.last().unwrap();
    let later = &tail[tail.len() / 2..];
    let later_max = later.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let later_min = later.iter().copied().fold(f64::INFINITY, f64::min);
    let mut notes = Vec::new();
    let mut verdict = if tail.iter().all(|&s| s == 0.0) {
        notes.push("A3 statistic identically zero on the tail".to_string());
        Verdict::SatisfiedTrend
    } else if later_max <= first && (last == 0.0 || first / last >= factor) {
        notes.push(format!("A3 statistic decreasing by {:.3}x over the tail", first / last));
        Verdict::SatisfiedTrend
    } else if later_min >= first && last >= factor * first {
        notes.push(format!("A3 statistic increasing by {:.3}x over the tail", last / first));
        Verdict::ViolatedTrend
    } else {
        notes.push(format!(
            "A3 statistic has no {factor}x trend over the tail ({first:.4} -> {last:.4})"
        ));
        Verdict::Inconclusive
    };
    if !all_finite {
        notes.push("A1 violated: some m_n is infinite".into());
        verdict = Verdict::ViolatedTrend;
    } else {
        notes.push("A1 holds: every m_n finite".into());
    }
    if last_q_drop > horizon / 2 {
        notes.push(format!("A2 violated: q_n decreases at n = {last_q_drop}"));
        verdict = Verdict::ViolatedTrend;
    } else if last_q_drop > 0 {
        notes.push(format!(
            "A2 holds eventually: last decrease of q_n at n = {last_q_drop}"
        ));
    } else {
        notes.push("A2 holds: q_n nondecreasing".into());
    }
    notes.push("finite-horizon trend, not a proof".into());
    Ok(ConditionReport {
        verdict,
        trace,
        notes: notes.join("; "),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransienceOptions {
    pub factor: f64,
    /// Increments below this count as a plateau.
    pub tail_tol: f64,
    /// Largest `a_i` evaluated by the exact Poisson-Binomial recursion.
    pub dp_limit: u64,
}

impl Default for TransienceOptions {
    fn default() -> Self {
        TransienceOptions {
            factor: 2.0,
            tail_tol: 1e-3,
            dp_limit: DIRECT_SUM_LIMIT,
        }
    }
}

/// How the `i`-th term of condition 1 was evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TermMethod {
    /// Exact Poisson-Binomial tail.
    Exact,
    /// Chebyshev bound `P/(P - i + 1)^2`.
    Chebyshev,
    /// Exact head convolved with a Poisson tail, plus the Le Cam error.
    PoissonTail,
    /// No upper bound available; the term is taken as 1.
    Inapplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionOneTerm {
    pub i: u64,
    pub log2_a: f64,
    pub growth_mass: f64,
    pub chebyshev: Option<f64>,
    pub value: f64,
    pub method: TermMethod,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransienceReport {
    pub condition1: ConditionReport,
    pub condition2: ConditionReport,
    pub condition3: ConditionReport,
    pub terms: Vec<ConditionOneTerm>,
}

/// Evaluates the three transience conditions for growth probabilities `p`,
/// burst sizes `w` and auxiliary times `a` up to `i_max`:
///
/// 1. `sum_i r_{i, a_i}` with `r_{i,j} = P(fewer than i growths by time j)`;
/// 2. `sum_i (a_i - a_{i-1}) / (w_{i-1} + 1)` with `a_0 = w_0 = 0`;
/// 3. `sum_n min(p_n, p_{n+1})` up to `a_{i_max}`.
pub fn check_transience_conditions(
    p: &SeqSpec,
    w: &SeqSpec,
    a: &SeqSpec,
    i_max: u64,
    opts: TransienceOptions,
) -> Result<TransienceReport, LawError> {
    if i_max < 2 {
        return Err(LawError::Argument("i_max must be at least 2".into()));
    }
    if !w.is_nondecreasing() || w.count(1.0).is_zero() {
        return Err(LawError::Argument("w must be nondecreasing and at least 1".into()));
    }
    let log2_a: Vec<f64> = (1..=i_max).map(|i| a.log2_value(i as f64)).collect();
    if log2_a.windows(2).any(|x| x[1] <= x[0]) || !(log2_a[0] > f64::NEG_INFINITY) {
        return Err(LawError::Argument("a must be strictly increasing and positive".into()));
    }
    let prob = |k: f64| p.value(k).clamp(0.0, 1.0);

    // Running exact distribution of the growth count, truncated at i_max
    // outcomes; mass beyond is implicit.
    let cap = i_max as usize;
    let mut pmf = vec![0.0f64; cap];
    pmf[0] = 1.0;
    let mut dp_len = 0u64;
    let advance = |pmf: &mut Vec<f64>, upto: u64, dp_len: &mut u64| {
        while *dp_len < upto {
            *dp_len += 1;
            let q = prob(*dp_len as f64);
            for c in (1..pmf.len()).rev() {
                pmf[c] = pmf[c] * (1.0 - q) + pmf[c - 1] * q;
            }
            pmf[0] *= 1.0 - q;
        }
    };

    let mut terms = Vec::with_capacity(cap);
    let mut trace1 = Vec::with_capacity(cap);
    let mut sum1 = 0.0;
    let mut head_ready = false;
    for i in 1..=i_max {
        let l2 = log2_a[i as usize - 1];
        let a_i = 2f64.powf(l2).floor();
        let mass = p.partial_sum(a_i);
        let cheb = match chebyshev_bound_from_mass(mass.value + mass.error, i) {
            RBound::Applicable(_) if mass.value - mass.error <= (i - 1) as f64 => None,
            RBound::Applicable(b) => {
                // conservative: smallest denominator, largest numerator
                let d = mass.value - mass.error - (i - 1) as f64;
                Some(b.max((mass.value + mass.error) / (d * d)))
            }
            RBound::Inapplicable => None,
        };
        let (value, method) = if l2 < 63.0 && (a_i as u64) <= opts.dp_limit {
            advance(&mut pmf, a_i as u64, &mut dp_len);
            let exact: f64 = pmf[..i as usize].iter().sum();
            (exact.min(1.0), TermMethod::Exact)
        } else {
            if !head_ready {
                advance(&mut pmf, opts.dp_limit, &mut dp_len);
                head_ready = true;
            }
            let head_mass = p.partial_sum(dp_len as f64);
            let lambda = (mass.value - head_mass.value).max(0.0);
            let lambda_err = mass.error + head_mass.error;
            // Le Cam: sum of squared tail probabilities <= sup * tail mass
            let le_cam = p.sup_from(dp_len as f64 + 1.0).clamp(0.0, 1.0) * (lambda + lambda_err);
            let mut approx = 0.0;
            for (c, &h) in pmf[..i as usize].iter().enumerate() {
                approx += h * poisson_cdf(lambda, i - 1 - c as u64);
            }
            let poisson_bound = (approx + le_cam + lambda_err).min(1.0);
            match cheb {
                Some(b) if b < poisson_bound => (b, TermMethod::Chebyshev),
                _ if poisson_bound < 1.0 => (poisson_bound, TermMethod::PoissonTail),
                Some(b) => (b.min(1.0), TermMethod::Chebyshev),
                None => (1.0, TermMethod::Inapplicable),
            }
        };
        sum1 += value;
        trace1.push((i as f64, sum1));
        terms.push(ConditionOneTerm {
            i,
            log2_a: l2,
            growth_mass: mass.value,
            chebyshev: cheb,
            value,
            method,
        });
    }

    let mut trace2 = Vec::with_capacity(cap);
    let mut sum2 = 0.0;
    for i in 1..=i_max {
        let l2 = log2_a[i as usize - 1];
        let prev = if i == 1 { f64::NEG_INFINITY } else { log2_a[i as usize - 2] };
        // log2(a_i - a_{i-1}) - log2(w_{i-1} + 1)
        let log_delta = l2 + (1.0 - 2f64.powf(prev - l2)).log2();
        let log_w = if i == 1 {
            0.0
        } else {
            let lw = w.log2_value((i - 1) as f64);
            if lw > 60.0 {
                lw
            } else {
                (2f64.powf(lw).floor() + 1.0).log2()
            }
        };
        sum2 += 2f64.powf(log_delta - log_w);
        trace2.push((i as f64, sum2));
    }

    let top = log2_a[cap - 1].min(1000.0).ceil() as i32;
    let mut trace3 = Vec::new();
    let mut exact3 = true;
    for j in 1..=top.max(2) {
        let n = 2f64.powi(j);
        let s = p.min_adjacent_partial_sum(n);
        exact3 &= s.error < 1e-6;
        trace3.push((n, s.value));
    }

    let sums = |t: &[(f64, f64)]| t.iter().map(|x| x.1).collect::<Vec<_>>();
    let tail_increments = |t: &[(f64, f64)], from: usize| -> f64 {
        t.windows(2)
            .skip(from)
            .map(|w| w[1].1 - w[0].1)
            .fold(0.0, f64::max)
    };
    let summable_verdict = |t: &[(f64, f64)]| match series_trend(&sums(t), opts.factor, opts.tail_tol) {
        SeriesTrend::Plateau => Verdict::SatisfiedTrend,
        SeriesTrend::Diverging => Verdict::ViolatedTrend,
        SeriesTrend::Undetermined => Verdict::Inconclusive,
    };

    let methods = |m: TermMethod| terms.iter().filter(|t| t.method == m).count();
    let c1 = ConditionReport {
        verdict: if methods(TermMethod::Inapplicable) > cap / 2 {
            Verdict::Inconclusive
        } else {
            summable_verdict(&trace1)
        },
        notes: format!(
            "terms: {} exact, {} chebyshev, {} poisson-tail, {} inapplicable; max tail increment {:.3e}; finite-horizon trend",
            methods(TermMethod::Exact),
            methods(TermMethod::Chebyshev),
            methods(TermMethod::PoissonTail),
            methods(TermMethod::Inapplicable),
            tail_increments(&trace1, cap / 2),
        ),
        trace: trace1,
    };
    let c2 = ConditionReport {
        verdict: summable_verdict(&trace2),
        notes: format!(
            "a_0 = w_0 = 0; max tail increment {:.3e}; finite-horizon trend",
            tail_increments(&trace2, cap / 2)
        ),
        trace: trace2,
    };
    let v3 = match series_trend(&sums(&trace3), opts.factor, 0.0) {
        SeriesTrend::Diverging => Verdict::SatisfiedTrend,
        SeriesTrend::Plateau => Verdict::ViolatedTrend,
        SeriesTrend::Undetermined => Verdict::Inconclusive,
    };
    let c3 = ConditionReport {
        verdict: v3,
        notes: format!(
            "partial sums on a doubling grid up to 2^{top}{}; finite-horizon trend",
            if exact3 { "" } else { " (tail approximated)" }
        ),
        trace: trace3,
    };
    Ok(TransienceReport {
        condition1: c1,
        condition2: c2,
        condition3: c3,
        terms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::LawSpec;

    fn bp(gamma: f64) -> LawSequence {
        LawSequence::new(LawSpec::BernoulliPower { c: 1.0, gamma }).unwrap()
    }

    #[test]
    fn a3_satisfied_for_gamma_08() {
        let r = check_recurrence_conditions(&bp(0.8), 1_000_000).unwrap();
        assert_eq!(r.verdict, Verdict::SatisfiedTrend, "{}", r.notes);
        let (n, s) = *r.trace.last().unwrap();
        assert_eq!(n, 1e6);
        // (10^6)^-0.8 * 74.80712913162503^2
        assert!((s - 0.088_692_312_053_6).abs() < 1e-9, "{s}");
        assert!(r.trace.windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn a3_violated_for_gamma_06() {
        let r = check_recurrence_conditions(&bp(0.6), 1_000_000).unwrap();
        assert_eq!(r.verdict, Verdict::ViolatedTrend, "{}", r.notes);
    }

    #[test]
    fn a3_trivially_satisfied_without_growth() {
        let law = LawSequence::new(LawSpec::Constant { p: 0.0, z: 1 }).unwrap();
        let r = check_recurrence_conditions(&law, 1000).unwrap();
        assert_eq!(r.verdict, Verdict::SatisfiedTrend);
        assert!(r.trace.iter().all(|p| p.1 == 0.0));
    }

    #[test]
    fn horizon_too_small() {
        assert!(check_recurrence_conditions(&bp(0.8), 9).is_err());
    }

    #[test]
    fn log_burst_a2_holds_eventually() {
        let law = LawSequence::new(LawSpec::LogBurst { delta: 0.8 }).unwrap();
        let r = check_recurrence_conditions(&law, 10_000_000).unwrap();
        assert_eq!(r.verdict, Verdict::SatisfiedTrend, "{}", r.notes);
        assert!(r.notes.contains("A2 holds eventually"));
    }

    fn harmonic() -> SeqSpec {
        SeqSpec::Harmonic { offset: 1.0 }
    }

    #[test]
    fn first_chebyshev_term_of_the_worked_example() {
        let a = SeqSpec::ExpPower {
            base: 2.0,
            exponent: 1.5,
            ceil: false,
        };
        let w = SeqSpec::ExpPower {
            base: 2.0,
            exponent: 2.0,
            ceil: true,
        };
        let r = check_transience_conditions(&harmonic(), &w, &a, 10, TransienceOptions::default()).unwrap();
        let t1 = &r.terms[0];
        // P_2 = 1/2 + 1/3; bound = P_2 / (P_2 - 1 + 1)^2 = 1.2
        assert!((t1.growth_mass - 5.0 / 6.0).abs() < 1e-15);
        assert!((t1.chebyshev.unwrap() - 1.2).abs() < 1e-12);
        // the exact tail P(no growth in two steps) = (1/2)(2/3) = 1/3
        assert_eq!(t1.method, TermMethod::Exact);
        assert!((t1.value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mild_condition_diverges_for_constant_one() {
        let one = SeqSpec::Constant { value: 1.0 };
        let a = SeqSpec::Power { c: 1.0, exponent: 1.0 };
        let r = check_transience_conditions(&one, &one, &a, 30, TransienceOptions::default()).unwrap();
        assert_eq!(r.condition3.verdict, Verdict::SatisfiedTrend, "{}", r.condition3.notes);
    }

    #[test]
    fn mild_condition_fails_for_comb() {
        let a = SeqSpec::ExpPower {
            base: 2.0,
            exponent: 1.0,
            ceil: false,
        };
        let w = SeqSpec::ExpPower {
            base: 2.0,
            exponent: 2.0,
            ceil: true,
        };
        let r = check_transience_conditions(&SeqSpec::Comb, &w, &a, 40, TransienceOptions::default()).unwrap();
        assert_eq!(r.condition3.verdict, Verdict::ViolatedTrend, "{}", r.condition3.notes);
    }

    #[test]
    fn harmonic_probabilities_satisfy_mild_condition() {
        let a = SeqSpec::ExpPower {
            base: 2.0,
            exponent: 1.05,
            ceil: false,
        };
        let w = SeqSpec::ExpPower {
            base: 2.0,
            exponent: 1.1,
            ceil: true,
        };
        let r = check_transience_conditions(&harmonic(), &w, &a, 60, TransienceOptions::default()).unwrap();
        assert_eq!(r.condition3.verdict, Verdict::SatisfiedTrend);
        assert_eq!(r.condition2.verdict, Verdict::SatisfiedTrend, "{}", r.condition2.notes);
        assert!(r.condition1.trace.windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn rejects_non_increasing_a() {
        let a = SeqSpec::Constant { value: 4.0 };
        let one = SeqSpec::Constant { value: 1.0 };
        assert!(check_transience_conditions(&harmonic(), &one, &a, 5, TransienceOptions::default()).is_err());
    }

    #[test]
    fn trend_classifier() {
        let harmonic_sums: Vec<f64> = (1..40).map(|j| j as f64 * std::f64::consts::LN_2).collect();
        assert_eq!(series_trend(&harmonic_sums, 2.0, 0.0), SeriesTrend::Diverging);
        let geometric: Vec<f64> = (1..40).map(|j| 1.0 - 0.5f64.powi(j)).collect();
        assert_eq!(series_trend(&geometric, 2.0, 0.0), SeriesTrend::Plateau);
    }
}
