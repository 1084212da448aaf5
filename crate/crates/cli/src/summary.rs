//! Pooled statistics and pass/fail checks.

use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    /// Ungated checks are reported but never fail a run.
    pub gated: bool,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let pass = match relation {
            Relation::AtMost => value <= threshold,
            Relation::Below => value < threshold,
            Relation::AtLeast => value >= threshold,
        };
        Check {
            name: name.into(),
            value,
            relation,
            threshold,
            gated: true,
            pass,
        }
    }

    /// A yes/no property, encoded as value 1 or 0 against threshold 1.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Check::new(name, f64::from(u8::from(ok)), Relation::AtLeast, 1.0)
    }

    pub fn ungated(mut self) -> Self {
        self.gated = false;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stat {
    pub median: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub values: Vec<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        Stat {
            median: median(values),
            mean: values.iter().sum::<f64>() / n,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            values: values.to_vec(),
        }
    }
}

/// Median, averaging the two middle values; NaN for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub replicas: u64,
    pub master_seed: u64,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, Stat>,
    /// Replica or run failures, such as an exceeded step budget.
    pub failures: Vec<String>,
    /// Free-form structured results (condition verdicts, oracle tables).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
    pub pass: bool,
}

impl Summary {
    pub fn new(
        experiment: &str,
        replicas: u64,
        master_seed: u64,
        checks: Vec<Check>,
        metrics: BTreeMap<String, Stat>,
        failures: Vec<String>,
    ) -> Self {
        let pass = failures.is_empty() && checks.iter().all(|c| c.pass || !c.gated);
        Summary {
            experiment: experiment.to_string(),
            replicas,
            master_seed,
            checks,
            metrics,
            failures,
            details: None,
            pass,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn nan_never_passes() {
        assert!(!Check::new("x", f64::NAN, Relation::AtMost, 1.0).pass);
        assert!(!Check::new("x", f64::NAN, Relation::AtLeast, 1.0).pass);
    }

    #[test]
    fn ungated_failures_do_not_fail_the_summary() {
        let c = Check::new("x", 2.0, Relation::AtMost, 1.0).ungated();
        let s = Summary::new("e", 1, 0, vec![c], BTreeMap::new(), vec![]);
        assert!(s.pass);
        let s = Summary::new("e", 1, 0, vec![], BTreeMap::new(), vec!["boom".into()]);
        assert!(!s.pass);
    }

    #[test]
    fn sample_variance() {
        assert_eq!(variance(&[1.0, 3.0]), 2.0);
        assert_eq!(variance(&[5.0]), 0.0);
    }
}
