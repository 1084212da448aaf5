//! Numeric sequences indexed from 1: growth probabilities `p_n`, burst sizes
//! `w_n`, and the auxiliary times `a_i` of the transience checker.

use serde::{Deserialize, Serialize};

use crate::count::ExtCount;

/// Terms up to this index are summed directly.
pub const DIRECT_SUM_LIMIT: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SeqSpec {
    /// `value` for every n.
    Constant { value: f64 },
    /// `1 / (n + offset)`.
    Harmonic { offset: f64 },
    /// `c * n^exponent`.
    Power { c: f64, exponent: f64 },
    /// `base^(n^exponent)`, or `base^ceil(n^exponent)` when `ceil` is set.
    ExpPower {
        base: f64,
        exponent: f64,
        #[serde(default)]
        ceil: bool,
    },
    /// Harmonic terms `1/2, 1/3, ...` on odd n interleaved with `1/2, 1/4, ...`
    /// on even n: `1/2, 1/2, 1/3, 1/4, 1/4, 1/8, 1/5, 1/16, ...`.
    Comb,
    /// `values[n-1]`, then `tail` forever.
    Explicit { values: Vec<f64>, tail: f64 },
}

/// A value together with an absolute error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Approx {
    pub value: f64,
    pub error: f64,
}

impl Approx {
    pub fn exact(value: f64) -> Self {
        Approx { value, error: 0.0 }
    }
}

impl SeqSpec {
    pub fn value(&self, n: f64) -> f64 {
        match self {
            SeqSpec::Constant { value } => *value,
            SeqSpec::Harmonic { offset } => 1.0 / (n + offset),
            SeqSpec::Power { c, exponent } => c * n.powf(*exponent),
            SeqSpec::ExpPower { base, .. } => {
                let e = self.exponent_of(n);
                base.powf(e)
            }
            SeqSpec::Comb => {
                let m = n.round() as u64;
                if m % 2 == 1 {
                    1.0 / ((m + 1) / 2 + 1) as f64
                } else {
                    0.5f64.powi((m / 2).min(2000) as i32)
                }
            }
            SeqSpec::Explicit { values, tail } => {
                let m = n.round() as u64;
                if m >= 1 && (m as usize) <= values.len() {
                    values[m as usize - 1]
                } else {
                    *tail
                }
            }
        }
    }

    fn exponent_of(&self, n: f64) -> f64 {
        match self {
            SeqSpec::ExpPower { exponent, ceil, .. } => {
                let e = n.powf(*exponent);
                if *ceil {
                    // guard against 3^1 evaluating to 3.0000000000000004
                    let r = e.round();
                    if (e - r).abs() < 1e-9 * r.max(1.0) {
                        r
                    } else {
                        e.ceil()
                    }
                } else {
                    e
                }
            }
            _ => 0.0,
        }
    }

    /// `log2(value(n))`, finite for astronomically large `ExpPower` terms.
    pub fn log2_value(&self, n: f64) -> f64 {
        match self {
            SeqSpec::ExpPower { base, .. } => self.exponent_of(n) * base.log2(),
            _ => self.value(n).log2(),
        }
    }

    /// `floor(value(n))` as an extended count.
    pub fn count(&self, n: f64) -> ExtCount {
        match self {
            SeqSpec::ExpPower { .. } => ExtCount::from_log2(self.log2_value(n)),
            _ => ExtCount::from_f64(self.value(n).floor()),
        }
    }

    /// Supremum of `value(m)` over `m >= n`.
    pub fn sup_from(&self, n: f64) -> f64 {
        match self {
            SeqSpec::Constant { value } => *value,
            SeqSpec::Harmonic { .. } => self.value(n),
            SeqSpec::Power { c, exponent } => {
                if *exponent <= 0.0 {
                    self.value(n)
                } else if *c > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            SeqSpec::ExpPower { base, exponent, .. } => {
                if *base > 1.0 && *exponent > 0.0 {
                    f64::INFINITY
                } else {
                    self.value(n)
                }
            }
            // both interleaved subsequences decrease
            SeqSpec::Comb => self.value(n).max(self.value(n + 1.0)),
            SeqSpec::Explicit { values, tail } => {
                let m = n.round().max(1.0) as usize;
                values
                    .iter()
                    .skip(m - 1)
                    .fold(*tail, |acc, &v| acc.max(v))
            }
        }
    }

    pub fn is_nonincreasing(&self) -> bool {
        match self {
            SeqSpec::Constant { .. } | SeqSpec::Harmonic { .. } => true,
            SeqSpec::Power { c, exponent } => *c <= 0.0 || *exponent <= 0.0,
            SeqSpec::ExpPower { base, exponent, .. } => *base <= 1.0 || *exponent <= 0.0,
            SeqSpec::Comb => false,
            SeqSpec::Explicit { values, tail } => {
                values.windows(2).all(|w| w[1] <= w[0]) && values.last().is_none_or(|l| tail <= l)
            }
        }
    }

    pub fn is_nondecreasing(&self) -> bool {
        match self {
            SeqSpec::Constant { .. } => true,
            SeqSpec::Harmonic { .. } | SeqSpec::Comb => false,
            SeqSpec::Power { c, exponent } => *c >= 0.0 && *exponent >= 0.0,
            SeqSpec::ExpPower { base, exponent, .. } => *base >= 1.0 && *exponent >= 0.0,
            SeqSpec::Explicit { values, tail } => {
                values.windows(2).all(|w| w[1] >= w[0]) && values.last().is_none_or(|l| tail >= l)
            }
        }
    }

    /// `sum_{k=1}^{n} value(k)`.
    ///
    /// Summed directly up to [`DIRECT_SUM_LIMIT`]; beyond that the tail of a
    /// nonincreasing sequence is bracketed by integrals and the midpoint is
    /// returned with the half-width as error bound.
    pub fn partial_sum(&self, n: f64) -> Approx {
        let n = n.floor();
        if n < 1.0 {
            return Approx::exact(0.0);
        }
        match self {
            SeqSpec::Constant { value } => return Approx::exact(value * n),
            SeqSpec::Comb => {
                let odd = (n / 2.0).ceil();
                let even = (n / 2.0).floor();
                let harm = SeqSpec::Harmonic { offset: 1.0 }.partial_sum(odd);
                let geo = 1.0 - 0.5f64.powf(even);
                return Approx {
                    value: harm.value + geo,
                    error: harm.error,
                };
            }
            SeqSpec::Explicit { values, tail } => {
                let len = values.len() as f64;
                let head: f64 = values.iter().take(n as usize).sum();
                return Approx::exact(head + tail * (n - len).max(0.0));
            }
            _ => {}
        }
        let direct = (n as u64).min(DIRECT_SUM_LIMIT);
        let head = self.direct_sum(1, direct);
        if n as u64 <= DIRECT_SUM_LIMIT {
            return Approx::exact(head);
        }
        let n0 = direct as f64;
        match self.tail_integral_bounds(n0, n) {
            Some((lo, hi)) => Approx {
                value: head + 0.5 * (lo + hi),
                error: 0.5 * (hi - lo) + 1e-12 * head.abs(),
            },
            None => Approx {
                value: f64::INFINITY,
                error: f64::INFINITY,
            },
        }
    }

    fn direct_sum(&self, from: u64, to: u64) -> f64 {
        // summed smallest-first for accuracy on decreasing sequences
        (from..=to).rev().map(|k| self.value(k as f64)).sum()
    }

    /// Lower and upper bounds for `sum_{k=n0+1}^{n} value(k)` of a
    /// nonincreasing sequence.
    fn tail_integral_bounds(&self, n0: f64, n: f64) -> Option<(f64, f64)> {
        if !self.is_nonincreasing() {
            return None;
        }
        let anti = |x: f64| -> Option<f64> {
            match self {
                SeqSpec::Harmonic { offset } => Some((x + offset).ln()),
                SeqSpec::Power { c, exponent } => {
                    if (*exponent + 1.0).abs() < 1e-15 {
                        Some(c * x.ln())
                    } else {
                        Some(c * x.powf(exponent + 1.0) / (exponent + 1.0))
                    }
                }
                _ => None,
            }
        };
        let lo = anti(n + 1.0)? - anti(n0 + 1.0)?;
        let hi = anti(n)? - anti(n0)?;
        Some((lo, hi))
    }

    /// `sum_{k=1}^{n} min(value(k), value(k+1))`.
    pub fn min_adjacent_partial_sum(&self, n: f64) -> Approx {
        let n = n.floor();
        if n < 1.0 {
            return Approx::exact(0.0);
        }
        if self.is_nonincreasing() {
            let s = self.partial_sum(n + 1.0);
            return Approx {
                value: s.value - self.value(1.0),
                error: s.error,
            };
        }
        let direct = (n as u64).min(DIRECT_SUM_LIMIT);
        let head: f64 = (1..=direct)
            .rev()
            .map(|k| self.value(k as f64).min(self.value(k as f64 + 1.0)))
            .sum();
        if n as u64 <= DIRECT_SUM_LIMIT {
            return Approx::exact(head);
        }
        match self {
            SeqSpec::Comb => {
                // every adjacent pair past the head contains an even-indexed
                // term 2^(-m/2) <= 2^(-2^18)
                Approx {
                    value: head,
                    error: 0.0,
                }
            }
            SeqSpec::Explicit { tail, .. } => Approx::exact(head + tail * (n - direct as f64)),
            _ => Approx {
                value: f64::INFINITY,
                error: f64::INFINITY,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comb_prefix() {
        let c = SeqSpec::Comb;
        let got: Vec<f64> = (1..=8).map(|n| c.value(n as f64)).collect();
        assert_eq!(got, vec![0.5, 0.5, 1.0 / 3.0, 0.25, 0.25, 0.125, 0.2, 0.0625]);
        assert!((c.partial_sum(8.0).value - got.iter().sum::<f64>()).abs() < 1e-15);
    }

    #[test]
    fn harmonic_partial_sum_matches_direct() {
        let h = SeqSpec::Harmonic { offset: 1.0 };
        // sum_{k=1}^{100} 1/(k+1) = H_101 - 1
        let direct: f64 = (1..=100).map(|k| 1.0 / (k as f64 + 1.0)).sum();
        assert!((h.partial_sum(100.0).value - direct).abs() < 1e-13);
        // far tail: H_{n+1} - 1 ≈ ln(n+1) + γ_E + 1/(2(n+1)) - 1
        let n = 1e12;
        let approx = h.partial_sum(n);
        let expect = (n + 1.0).ln() + 0.577_215_664_901_532_9 + 0.5 / (n + 1.0) - 1.0;
        assert!((approx.value - expect).abs() <= approx.error + 1e-9);
        assert!(approx.error < 1e-6);
    }

    #[test]
    fn exp_power_with_ceiling() {
        let w = SeqSpec::ExpPower {
            base: 2.0,
            exponent: 1.1,
            ceil: true,
        };
        assert_eq!(w.count(1.0).as_u64(), Some(2));
        // 2^1.1 = 2.14 -> ceil 3
        assert_eq!(w.count(2.0).as_u64(), Some(8));
        let huge = w.count(60.0);
        assert_eq!(huge.log2(), (60f64.powf(1.1)).ceil());
    }

    #[test]
    fn sup_from_comb() {
        let c = SeqSpec::Comb;
        assert_eq!(c.sup_from(6.0), 0.2);
        assert_eq!(c.sup_from(5.0), 0.25);
    }

    #[test]
    fn min_adjacent_for_decreasing() {
        let h = SeqSpec::Harmonic { offset: 1.0 };
        let direct: f64 = (1..=50).map(|k| 1.0 / (k as f64 + 2.0)).sum();
        assert!((h.min_adjacent_partial_sum(50.0).value - direct).abs() < 1e-13);
    }
}
