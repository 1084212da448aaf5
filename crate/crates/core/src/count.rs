//! Extended-precision nonnegative counts.
//!
//! Values up to 2^53 are stored as exact integers. Larger values switch to a
//! `mantissa * 2^exponent` form with `mantissa` in `[1, 2)` and a 64-bit
//! exponent, which keeps bundle multiplicities such as `2^(i^1.1)` and
//! process clocks around `e^60` representable without overflow.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest value stored exactly.
pub const EXACT_LIMIT: u64 = 1 << 53;

#[derive(Clone, Copy, Debug)]
enum Repr {
    Exact(u64),
    Scaled { mant: f64, exp: i64 },
}

/// A nonnegative integer count that never overflows.
#[derive(Clone, Copy, Debug)]
pub struct ExtCount(Repr);

impl ExtCount {
    pub const ZERO: ExtCount = ExtCount(Repr::Exact(0));
    pub const ONE: ExtCount = ExtCount(Repr::Exact(1));

    pub fn from_u64(n: u64) -> Self {
        if n <= EXACT_LIMIT {
            ExtCount(Repr::Exact(n))
        } else {
            Self::from_f64(n as f64)
        }
    }

    /// Rounds a nonnegative finite float to the nearest count.
    ///
    /// Negative and NaN inputs map to zero; infinities saturate at the
    /// largest representable value.
    pub fn from_f64(x: f64) -> Self {
        if x.is_nan() || x <= 0.0 {
            return Self::ZERO;
        }
        if x.is_infinite() {
            return ExtCount(Repr::Scaled {
                mant: 2.0 - f64::EPSILON,
                exp: i64::MAX / 2,
            });
        }
        let r = x.round();
        if r <= EXACT_LIMIT as f64 {
            return ExtCount(Repr::Exact(r as u64));
        }
        let exp = r.log2().floor() as i64;
        let mut mant = r / 2f64.powi(exp as i32);
        let mut exp = exp;
        // log2 rounding can land one off at exact powers of two
        if mant >= 2.0 {
            mant /= 2.0;
            exp += 1;
        } else if mant < 1.0 {
            mant *= 2.0;
            exp -= 1;
        }
        ExtCount(Repr::Scaled { mant, exp })
    }

    /// `floor(2^log2)`, valid for arbitrarily large `log2`.
    pub fn from_log2(log2: f64) -> Self {
        if log2.is_nan() || log2 == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        if log2 < 53.0 {
            return ExtCount(Repr::Exact(2f64.powf(log2).floor() as u64));
        }
        if log2.is_infinite() {
            return Self::from_f64(f64::INFINITY);
        }
        let exp = log2.floor();
        let mant = 2f64.powf(log2 - exp);
        ExtCount(Repr::Scaled {
            mant: mant.clamp(1.0, 2.0 - f64::EPSILON),
            exp: exp as i64,
        })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Exact(0))
    }

    /// True while the value is held exactly.
    pub fn is_exact(&self) -> bool {
        matches!(self.0, Repr::Exact(_))
    }

    pub fn as_u64(&self) -> Option<u64> {
        match self.0 {
            Repr::Exact(n) => Some(n),
            Repr::Scaled { .. } => None,
        }
    }

    /// Saturating conversion, used for binary powering of step counts.
    pub fn to_u128_saturating(&self) -> u128 {
        match self.0 {
            Repr::Exact(n) => n as u128,
            Repr::Scaled { mant, exp } => {
                if exp >= 127 {
                    u128::MAX
                } else {
                    // 53 significant bits, shifted into place
                    let bits = (mant * (1u64 << 52) as f64) as u128;
                    if exp >= 52 {
                        bits << (exp - 52)
                    } else {
                        bits >> (52 - exp)
                    }
                }
            }
        }
    }

    /// Nearest `f64`; infinite once the exponent passes 1023.
    pub fn to_f64(&self) -> f64 {
        match self.0 {
            Repr::Exact(n) => n as f64,
            Repr::Scaled { mant, exp } => {
                if exp > 1023 {
                    f64::INFINITY
                } else {
                    mant * 2f64.powi(exp as i32)
                }
            }
        }
    }

    pub fn log2(&self) -> f64 {
        match self.0 {
            Repr::Exact(n) => (n as f64).log2(),
            Repr::Scaled { mant, exp } => exp as f64 + mant.log2(),
        }
    }

    pub fn ln(&self) -> f64 {
        self.log2() * std::f64::consts::LN_2
    }

    /// `self / other` as a float, finite even when both sides overflow `f64`.
    pub fn ratio(&self, other: &ExtCount) -> f64 {
        if other.is_zero() {
            return if self.is_zero() { f64::NAN } else { f64::INFINITY };
        }
        match (self.0, other.0) {
            (Repr::Exact(a), Repr::Exact(b)) => a as f64 / b as f64,
            _ => 2f64.powf(self.log2() - other.log2()),
        }
    }

    fn parts(&self) -> (f64, i64) {
        match self.0 {
            Repr::Exact(n) => {
                if n == 0 {
                    (0.0, 0)
                } else {
                    let exp = 63 - n.leading_zeros() as i64;
                    (n as f64 / 2f64.powi(exp as i32), exp)
                }
            }
            Repr::Scaled { mant, exp } => (mant, exp),
        }
    }

    fn from_parts(mant: f64, exp: i64) -> Self {
        if mant <= 0.0 {
            return Self::ZERO;
        }
        let mut mant = mant;
        let mut exp = exp;
        while mant >= 2.0 {
            mant /= 2.0;
            exp += 1;
        }
        while mant < 1.0 {
            mant *= 2.0;
            exp -= 1;
        }
        if exp < 53 {
            return Self::from_f64(mant * 2f64.powi(exp as i32));
        }
        if exp == 53 && mant == 1.0 {
            return ExtCount(Repr::Exact(EXACT_LIMIT));
        }
        ExtCount(Repr::Scaled { mant, exp })
    }

    /// Equality for exact values, relative agreement within `rel` once
    /// either side is approximate.
    pub fn approx_eq(&self, other: &ExtCount, rel: f64) -> bool {
        if self.is_exact() && other.is_exact() {
            return self == other;
        }
        (self.ratio(other) - 1.0).abs() <= rel
    }

    pub fn saturating_sub(self, other: ExtCount) -> ExtCount {
        match (self.0, other.0) {
            (Repr::Exact(a), Repr::Exact(b)) => ExtCount(Repr::Exact(a.saturating_sub(b))),
            _ => {
                if other >= self {
                    return Self::ZERO;
                }
                let (ma, ea) = self.parts();
                let (mb, eb) = other.parts();
                let shift = ea - eb;
                if shift > 64 {
                    return self;
                }
                Self::from_parts(ma - mb * 2f64.powi(-(shift as i32)), ea)
            }
        }
    }

    pub fn min(self, other: ExtCount) -> ExtCount {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl Default for ExtCount {
    fn default() -> Self {
        Self::ZERO
    }
}

impl From<u64> for ExtCount {
    fn from(n: u64) -> Self {
        Self::from_u64(n)
    }
}

impl Add for ExtCount {
    type Output = ExtCount;

    fn add(self, rhs: ExtCount) -> ExtCount {
        if let (Repr::Exact(a), Repr::Exact(b)) = (self.0, rhs.0) {
            let s = a + b;
            if s <= EXACT_LIMIT {
                return ExtCount(Repr::Exact(s));
            }
            // 2^53 + 1 rounds down to 2^53; step to the next float instead
            return match Self::from_f64(s as f64) {
                x if x.is_exact() => ExtCount(Repr::Scaled {
                    mant: 1.0 + f64::EPSILON,
                    exp: 53,
                }),
                x => x,
            };
        }
        let (hi, lo) = if self >= rhs { (self, rhs) } else { (rhs, self) };
        let (mh, eh) = hi.parts();
        let (ml, el) = lo.parts();
        if lo.is_zero() || eh - el > 64 {
            return hi;
        }
        Self::from_parts(mh + ml * 2f64.powi(-((eh - el) as i32)), eh)
    }
}

impl Add<u64> for ExtCount {
    type Output = ExtCount;

    fn add(self, rhs: u64) -> ExtCount {
        self + ExtCount::from_u64(rhs)
    }
}

impl AddAssign for ExtCount {
    fn add_assign(&mut self, rhs: ExtCount) {
        *self = *self + rhs;
    }
}

impl AddAssign<u64> for ExtCount {
    fn add_assign(&mut self, rhs: u64) {
        *self = *self + ExtCount::from_u64(rhs);
    }
}

impl Sub for ExtCount {
    type Output = ExtCount;

    /// Saturates at zero.
    fn sub(self, rhs: ExtCount) -> ExtCount {
        self.saturating_sub(rhs)
    }
}

impl PartialEq for ExtCount {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ExtCount {}

impl PartialOrd for ExtCount {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExtCount {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0, other.0) {
            (Repr::Exact(a), Repr::Exact(b)) => a.cmp(&b),
            (Repr::Exact(_), Repr::Scaled { .. }) => Ordering::Less,
            (Repr::Scaled { .. }, Repr::Exact(_)) => Ordering::Greater,
            (Repr::Scaled { mant: ma, exp: ea }, Repr::Scaled { mant: mb, exp: eb }) => {
                ea.cmp(&eb).then(ma.total_cmp(&mb))
            }
        }
    }
}

impl Hash for ExtCount {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self.0 {
            Repr::Exact(n) => {
                0u8.hash(state);
                n.hash(state);
            }
            Repr::Scaled { mant, exp } => {
                1u8.hash(state);
                mant.to_bits().hash(state);
                exp.hash(state);
            }
        }
    }
}

impl fmt::Display for ExtCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Repr::Exact(n) => write!(f, "{n}"),
            Repr::Scaled { mant, exp } if exp <= 1023 => {
                write!(f, "{:e}", mant * 2f64.powi(exp as i32))
            }
            Repr::Scaled { mant, exp } => write!(f, "{mant}p{exp}"),
        }
    }
}

impl std::str::FromStr for ExtCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(n) = s.parse::<u64>() {
            return Ok(Self::from_u64(n));
        }
        if let Some((m, e)) = s.split_once('p') {
            let mant: f64 = m.parse().map_err(|_| format!("bad count `{s}`"))?;
            let exp: i64 = e.parse().map_err(|_| format!("bad count `{s}`"))?;
            return Ok(Self::from_parts(mant, exp));
        }
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite() && *x >= 0.0)
            .map(Self::from_f64)
            .ok_or_else(|| format!("bad count `{s}`"))
    }
}

impl Serialize for ExtCount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Repr::Exact(n) => serializer.serialize_u64(n),
            Repr::Scaled { .. } => serializer.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for ExtCount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Wire {
            Int(u64),
            Float(f64),
            Text(String),
        }
        match Wire::deserialize(deserializer)? {
            Wire::Int(n) => Ok(ExtCount::from_u64(n)),
            Wire::Float(x) => Ok(ExtCount::from_f64(x)),
            Wire::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_below_limit() {
        let a = ExtCount::from_u64(EXACT_LIMIT - 1) + 1;
        assert!(a.is_exact());
        assert_eq!(a.as_u64(), Some(EXACT_LIMIT));
        let b = a + 1;
        assert!(!b.is_exact());
        assert!(b > a);
    }

    #[test]
    fn huge_powers_do_not_overflow() {
        let big = ExtCount::from_log2(90.0);
        assert!((big.log2() - 90.0).abs() < 1e-12);
        let sum = big + big;
        assert!((sum.log2() - 91.0).abs() < 1e-12);
        let huge = ExtCount::from_log2(5000.0);
        assert!(huge.to_f64().is_infinite());
        assert!((huge.log2() - 5000.0).abs() < 1e-9);
        assert_eq!(huge.to_string(), "1p5000");
        assert_eq!("1p5000".parse::<ExtCount>().unwrap(), huge);
    }

    #[test]
    fn subtraction_returns_to_exact_range() {
        let big = ExtCount::from_log2(54.0);
        let back = big - ExtCount::from_log2(53.0);
        assert!(back.is_exact());
        assert_eq!(back.as_u64(), Some(1 << 53));
        assert_eq!(ExtCount::from_u64(3) - ExtCount::from_u64(5), ExtCount::ZERO);
    }

    #[test]
    fn u128_conversion() {
        assert_eq!(ExtCount::from_log2(100.0).to_u128_saturating(), 1u128 << 100);
        assert_eq!(ExtCount::from_u64(12345).to_u128_saturating(), 12345);
    }

    #[test]
    fn serde_forms() {
        let exact = ExtCount::from_u64(42);
        assert_eq!(serde_json::to_string(&exact).unwrap(), "42");
        let big = ExtCount::from_log2(70.0);
        let text = serde_json::to_string(&big).unwrap();
        let back: ExtCount = serde_json::from_str(&text).unwrap();
        assert_eq!(back, big);
    }

    proptest! {
        #[test]
        fn order_matches_f64(a in 0f64..1e30, b in 0f64..1e30) {
            let (x, y) = (ExtCount::from_f64(a), ExtCount::from_f64(b));
            if a.round() < b.round() {
                prop_assert!(x < y);
            } else if a.round() > b.round() {
                prop_assert!(x > y);
            }
        }

        #[test]
        fn addition_close_to_f64(a in 0f64..1e25, b in 0f64..1e25) {
            let s = (ExtCount::from_f64(a) + ExtCount::from_f64(b)).to_f64();
            let expect = a.round() + b.round();
            prop_assert!((s - expect).abs() <= 1e-12 * expect.max(1.0));
        }
    }
}
