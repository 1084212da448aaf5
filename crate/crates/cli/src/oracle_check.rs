//! Self-check of the exact reference computations.

use rand::Rng;
use serde::Serialize;

use tbrw_core::count::ExtCount;
use tbrw_core::engine::{mixing_threshold, ThresholdPolicy};
use tbrw_core::oracles::{
    chebyshev_r_bound, exact_walk_distribution, expected_return_time, hitting_times_by_linear_solve,
    nonisomorphic_trees, pa_target, poisson_binomial_cdf, poisson_binomial_cdf_by_enumeration,
    return_time_by_linear_solve, stationary_distribution, subtree_hitting_time, tv_distance, RBound,
    SimpleTree, StationaryForm,
};
use tbrw_core::rng::{aux_stream, Stream};

use crate::config::ExperimentConfig;
use crate::summary::{Check, Relation};

const MC_TAG: u64 = 0x0AC1E;
const TREE_TAG: u64 = 0x7EE5;
const PB_TAG: u64 = 0x9B;

#[derive(Clone, Debug, Serialize)]
pub struct Identity {
    pub name: String,
    pub instances: u64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Identity {
    fn new(name: &str, instances: u64, max_deviation: f64, tolerance: f64) -> Self {
        Identity {
            name: name.to_string(),
            instances,
            max_deviation,
            tolerance,
            pass: max_deviation <= tolerance,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MonteCarloRow {
    pub instance: String,
    pub expected: f64,
    pub estimate: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub identities: Vec<Identity>,
    pub monte_carlo: Vec<MonteCarloRow>,
    pub chebyshev_spot: f64,
}

impl OracleReport {
    pub fn checks(&self) -> Vec<Check> {
        self.identities
            .iter()
            .map(|i| Check::new(i.name.clone(), i.max_deviation, Relation::AtMost, i.tolerance))
            .collect()
    }

    pub fn csv(&self) -> String {
        let mut s = String::from("identity,instances,max_deviation,tolerance,pass\n");
        for i in &self.identities {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                i.name,
                i.instances,
                i.max_deviation,
                i.tolerance,
                u8::from(i.pass)
            ));
        }
        s
    }
}

fn all_small_trees(max: usize) -> Vec<SimpleTree> {
    (2..=max).flat_map(nonisomorphic_trees).collect()
}

fn return_times(trees: &[SimpleTree], tol: f64) -> Identity {
    let mut worst = 0.0f64;
    let mut count = 0;
    for t in trees {
        for v in 0..t.len() {
            let closed = expected_return_time(t, v).expect("tree has an edge");
            let solved = return_time_by_linear_solve(t, v).expect("nonsingular system");
            worst = worst.max((closed - solved).abs());
            count += 1;
        }
    }
    Identity::new("return_time_closed_form", count, worst, tol)
}

fn hitting_times(trees: &[SimpleTree], tol: f64) -> Identity {
    let mut worst = 0.0f64;
    let mut count = 0;
    for t in trees {
        for v in 0..t.len() {
            let h = hitting_times_by_linear_solve(t, v).expect("nonsingular system");
            for &w in &t.adj[v] {
                let closed = subtree_hitting_time(t, w, v).expect("adjacent");
                worst = worst.max((closed - h[w]).abs());
                count += 1;
            }
        }
    }
    Identity::new("subtree_hitting_time_closed_form", count, worst, tol)
}

/// Mean return time to `v` of the simple random walk over `n` excursions.
fn mc_return_time(t: &SimpleTree, v: usize, n: u64, rng: &mut Stream) -> f64 {
    let mut total = 0u64;
    for _ in 0..n {
        let mut at = v;
        loop {
            at = t.adj[at][rng.random_range(0..t.adj[at].len())];
            total += 1;
            if at == v {
                break;
            }
        }
    }
    total as f64 / n as f64
}

fn monte_carlo(excursions: u64, seed: u64, tol: f64) -> (Identity, Vec<MonteCarloRow>) {
    let mut rng = aux_stream(seed, MC_TAG);
    let cases = [
        ("single-edge", SimpleTree::from_edges(2, 0, &[(0, 1)]), 0usize, 2.0),
        ("four-star-center", SimpleTree::from_edges(5, 0, &[(0, 1), (0, 2), (0, 3), (0, 4)]), 0, 2.0),
        ("three-path-end", SimpleTree::from_edges(3, 0, &[(0, 1), (1, 2)]), 0, 4.0),
    ];
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for (name, tree, v, expected) in cases {
        let tree = tree.expect("valid instance");
        let estimate = mc_return_time(&tree, v, excursions, &mut rng);
        let rel = (estimate - expected).abs() / expected;
        worst = worst.max(rel);
        rows.push(MonteCarloRow {
            instance: name.to_string(),
            expected,
            estimate,
            relative_error: rel,
        });
    }
    (Identity::new("return_time_monte_carlo", 3, worst, tol), rows)
}

/// Uniform random recursive tree on `n` vertices rooted at 0.
pub fn random_tree(n: usize, rng: &mut Stream) -> SimpleTree {
    let edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    SimpleTree::from_edges(n, 0, &edges).expect("recursive trees are trees")
}

fn farthest_from_root(t: &SimpleTree) -> usize {
    let mut dist = vec![usize::MAX; t.len()];
    dist[t.root] = 0;
    let mut queue = std::collections::VecDeque::from([t.root]);
    let mut last = t.root;
    while let Some(v) = queue.pop_front() {
        last = v;
        for &u in &t.adj[v] {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                queue.push_back(u);
            }
        }
    }
    last
}

fn mixing(count: usize, max_n: usize, eps: f64, seed: u64) -> Identity {
    let mut rng = aux_stream(seed, TREE_TAG);
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..count {
        let n = rng.random_range(2..=max_n);
        let t = random_tree(n, &mut rng);
        let steps = mixing_threshold(ExtCount::from_u64(n as u64), eps, ThresholdPolicy::Rigorous)
            .as_u64()
            .expect("small threshold");
        let pi = stationary_distribution(&t, StationaryForm::Exact);
        for start in [t.root, farthest_from_root(&t)] {
            let d = exact_walk_distribution(&t, start, steps, max_n).expect("within cap");
            worst_excess = worst_excess.max(tv_distance(&d, &pi) - eps);
        }
    }
    // deviation is the worst TV in excess of eps, floored at zero
    Identity::new("mixing_bound", count as u64, worst_excess.max(0.0), 0.0)
}

fn poisson_binomial(vectors: usize, seed: u64) -> Identity {
    let mut rng = aux_stream(seed, PB_TAG);
    let mut worst = 0.0f64;
    let mut count = 0;
    for _ in 0..vectors {
        let j = rng.random_range(0..=12);
        let ps: Vec<f64> = (0..j).map(|_| rng.random::<f64>()).collect();
        let mut prev = 0.0;
        for i in 0..=j as u64 {
            let dp = poisson_binomial_cdf(&ps, i);
            worst = worst.max((dp - poisson_binomial_cdf_by_enumeration(&ps, i)).abs());
            // monotone in i
            worst = worst.max(prev - dp);
            prev = dp;
            count += 1;
        }
        worst = worst.max((poisson_binomial_cdf(&ps, j as u64) - 1.0).abs());
    }
    Identity::new("poisson_binomial_enumeration", count, worst, 1e-12)
}

fn harmonic(j: usize) -> Vec<f64> {
    (1..=j).map(|k| 1.0 / (k as f64 + 1.0)).collect()
}

fn chebyshev_dominance(seed: u64) -> Identity {
    let mut rng = aux_stream(seed, PB_TAG + 1);
    let mut sequences = vec![harmonic(200)];
    for _ in 0..20 {
        sequences.push((0..200).map(|_| rng.random::<f64>()).collect());
    }
    let mut worst = 0.0f64;
    let mut count = 0;
    for ps in &sequences {
        for j in 1..=ps.len() {
            for i in 1..=j as u64 + 1 {
                if let RBound::Applicable(b) = chebyshev_r_bound(&ps[..j], i) {
                    let exact = poisson_binomial_cdf(&ps[..j], i - 1);
                    worst = worst.max(exact - b);
                    count += 1;
                }
            }
        }
    }
    Identity::new("chebyshev_dominates_tail", count, worst.max(0.0), 1e-12)
}

fn chebyshev_spot() -> f64 {
    match chebyshev_r_bound(&harmonic(100), 2) {
        RBound::Applicable(b) => b,
        RBound::Inapplicable => f64::NAN,
    }
}

fn pa_telescoping() -> Identity {
    let mut sum = 0.0;
    let mut worst = 0.0f64;
    for d in 1..=1000u64 {
        sum += pa_target(d).expect("d >= 1");
        let closed = 1.0 - 2.0 / ((d + 1) * (d + 2)) as f64;
        worst = worst.max((sum - closed).abs());
    }
    Identity::new("pa_target_telescoping", 1000, worst, 1e-12)
}

fn tree_counts() -> Identity {
    let expected = [1usize, 1, 1, 2, 3, 6, 11, 23];
    let worst = (1..=8)
        .map(|n| nonisomorphic_trees(n).len().abs_diff(expected[n - 1]))
        .max()
        .unwrap_or(0);
    Identity::new("nonisomorphic_tree_counts", 8, worst as f64, 0.0)
}

pub fn run_oracle_check(cfg: &ExperimentConfig) -> OracleReport {
    let p = &cfg.params.oracle;
    let tol = &cfg.params.tolerances;
    let trees = all_small_trees(p.max_tree_size);
    let (mc, rows) = monte_carlo(p.excursions, cfg.seed, tol.oracle_mc_rel);
    let spot = chebyshev_spot();
    let identities = vec![
        tree_counts(),
        return_times(&trees, tol.oracle_abs),
        hitting_times(&trees, tol.oracle_abs),
        mc,
        mixing(p.random_trees, p.max_random_tree, p.mixing_epsilon, cfg.seed),
        poisson_binomial(p.pb_vectors, cfg.seed),
        chebyshev_dominance(cfg.seed),
        Identity::new("chebyshev_spot_value", 1, (spot - 0.411).abs(), tol.oracle_spot),
        pa_telescoping(),
    ];
    OracleReport {
        identities,
        monte_carlo: rows,
        chebyshev_spot: spot,
    }
}
