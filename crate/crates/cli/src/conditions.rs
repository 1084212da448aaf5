//! Condition checkers for a configured law.

use std::fmt::Write as _;

use serde::Serialize;

use tbrw_core::laws::{
    check_recurrence_conditions, check_transience_conditions, ConditionReport, LawSpec, TransienceOptions,
    TransienceReport, Verdict,
};

use crate::config::ExperimentConfig;
use crate::summary::{Check, Relation};

#[derive(Clone, Debug, Serialize)]
pub struct ConditionsOutput {
    pub recurrence: Option<ConditionReport>,
    pub transience: Option<TransienceReport>,
}

/// Largest partial-sum increment at indices `i >= from`.
pub fn tail_increment(trace: &[(f64, f64)], from: u64) -> f64 {
    trace
        .windows(2)
        .filter(|w| w[1].0 >= from as f64)
        .map(|w| w[1].1 - w[0].1)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn run_conditions(cfg: &ExperimentConfig) -> Result<ConditionsOutput, String> {
    let recurrence = if cfg.params.recurrence_horizon > 0 {
        Some(check_recurrence_conditions(&cfg.law, cfg.params.recurrence_horizon).map_err(|e| e.to_string())?)
    } else {
        None
    };
    let transience = match (&cfg.params.transience, cfg.law.spec()) {
        (Some(t), LawSpec::WeightedBurst { p, w, .. }) => {
            let opts = TransienceOptions {
                tail_tol: cfg.params.tolerances.condition_tail,
                ..TransienceOptions::default()
            };
            Some(check_transience_conditions(p, w, &t.a, t.i_max, opts).map_err(|e| e.to_string())?)
        }
        (Some(_), _) => return Err("transience conditions need a weighted-burst law".into()),
        (None, _) => None,
    };
    Ok(ConditionsOutput { recurrence, transience })
}

impl ConditionsOutput {
    pub fn checks(&self, cfg: &ExperimentConfig) -> Vec<Check> {
        let tol = &cfg.params.tolerances;
        let mut out = Vec::new();
        if let Some(r) = &self.recurrence {
            out.push(Check::holds("recurrence_a1_a3_satisfied", r.verdict == Verdict::SatisfiedTrend).ungated());
        }
        if let Some(t) = &self.transience {
            let from = tol.condition_from_i;
            out.push(Check::new(
                "condition1_tail_increment",
                tail_increment(&t.condition1.trace, from),
                Relation::Below,
                tol.condition_tail,
            ));
            out.push(Check::new(
                "condition2_tail_increment",
                tail_increment(&t.condition2.trace, from),
                Relation::Below,
                tol.condition_tail,
            ));
            out.push(Check::holds(
                "condition3_diverging",
                t.condition3.verdict == Verdict::SatisfiedTrend,
            ));
        }
        out
    }

    /// `condition,index,partial_sum` rows, and the per-term table.
    pub fn csv(&self) -> Vec<(String, String)> {
        let mut files = Vec::new();
        let mut traces = String::from("condition,index,value\n");
        if let Some(r) = &self.recurrence {
            for (n, s) in &r.trace {
                let _ = writeln!(traces, "a3,{n},{s}");
            }
        }
        if let Some(t) = &self.transience {
            for (name, c) in [("c1", &t.condition1), ("c2", &t.condition2), ("c3", &t.condition3)] {
                for (i, s) in &c.trace {
                    let _ = writeln!(traces, "{name},{i},{s}");
                }
            }
            let mut terms = String::from("i,log2_a,growth_mass,chebyshev,value,method\n");
            for x in &t.terms {
                let cheb = x.chebyshev.map_or(String::new(), |c| c.to_string());
                let method = serde_json::to_value(x.method)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                let _ = writeln!(terms, "{},{},{},{cheb},{},{method}", x.i, x.log2_a, x.growth_mass, x.value);
            }
            files.push(("condition1_terms.csv".to_string(), terms));
        }
        files.insert(0, ("conditions.csv".to_string(), traces));
        files
    }
}
