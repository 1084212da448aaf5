//! Exact reference computations: the preferential-attachment target law,
//! return and hitting times on fixed trees, exact walk distributions,
//! stationary laws, and Poisson-Binomial tails.
//!
//! Everything here is a pure function of its inputs. Trees are plain,
//! fully materialized [`SimpleTree`]s; [`SimpleTree::from_compressed`]
//! expands leaf bundles.

use std::collections::{HashSet, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::tree::{CompressedTree, VertexRef};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate tree: {0}")]
    DegenerateTree(String),
    #[error("vertices {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("tree has {size} vertices, cap is {cap}")]
    TooLarge { size: usize, cap: usize },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("singular linear system")]
    Singular,
}

/// Default vertex cap for [`exact_walk_distribution`].
pub const DEFAULT_WALK_CAP: usize = 2000;

/// `4 / (d (d+1) (d+2))`, the limiting degree law of linear preferential
/// attachment trees.
pub fn pa_target(d: u64) -> Result<f64, OracleError> {
    if d == 0 {
        return Err(OracleError::Domain("pa_target needs d >= 1".into()));
    }
    let d = d as f64;
    Ok(4.0 / (d * (d + 1.0) * (d + 2.0)))
}

/// A finite rooted tree with explicit adjacency. The root carries a
/// self-loop for the walk-distribution oracles; the return/hitting oracles
/// ignore it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimpleTree {
    pub root: usize,
    pub adj: Vec<Vec<usize>>,
}

/// Result of expanding a compressed tree.
#[derive(Clone, Debug)]
pub struct Expansion {
    pub tree: SimpleTree,
    /// For each expanded vertex, the compressed reference it came from.
    /// Bundle members all map to `VertexRef::Member(b)`.
    pub origin: Vec<VertexRef>,
}

impl SimpleTree {
    pub fn from_edges(n: usize, root: usize, edges: &[(usize, usize)]) -> Result<Self, OracleError> {
        if n == 0 || root >= n {
            return Err(OracleError::InvalidTree("root out of range".into()));
        }
        if edges.len() + 1 != n {
            return Err(OracleError::InvalidTree(format!(
                "{} edges for {n} vertices",
                edges.len()
            )));
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n || a == b {
                return Err(OracleError::InvalidTree(format!("bad edge ({a}, {b})")));
            }
            adj[a].push(b);
            adj[b].push(a);
        }
        let tree = SimpleTree { root, adj };
        if tree.bfs_order().len() != n {
            return Err(OracleError::InvalidTree("disconnected".into()));
        }
        Ok(tree)
    }

    /// Expands every bundle into individual leaves. Materialized vertices
    /// keep their ids; bundle members are appended.
    pub fn from_compressed(tree: &CompressedTree, cap: usize) -> Result<Expansion, OracleError> {
        let total = tree.vertex_count();
        let size = total.as_u64().filter(|&n| n as usize <= cap).ok_or(OracleError::TooLarge {
            size: total.as_u64().map_or(usize::MAX, |n| n as usize),
            cap,
        })? as usize;
        let mut adj = vec![Vec::new(); tree.materialized_count()];
        let mut origin: Vec<VertexRef> = (0..adj.len()).map(VertexRef::Vertex).collect();
        for v in 0..tree.materialized_count() {
            if let Some(p) = tree.vertex(v).parent() {
                adj[v].push(p);
                adj[p].push(v);
            }
        }
        for (b, bundle) in tree.live_bundles() {
            let m = bundle.multiplicity().as_u64().expect("bounded by cap");
            for _ in 0..m {
                let id = adj.len();
                adj.push(vec![bundle.parent()]);
                adj[bundle.parent()].push(id);
                origin.push(VertexRef::Member(b));
            }
        }
        debug_assert_eq!(adj.len(), size);
        Ok(Expansion {
            tree: SimpleTree {
                root: tree.root(),
                adj,
            },
            origin,
        })
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    fn bfs_order(&self) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut order = Vec::with_capacity(self.len());
        let mut queue = VecDeque::from([self.root]);
        seen[self.root] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &u in &self.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        order
    }

    /// Size of the component containing `w` after deleting the edge `(v, w)`.
    fn side_size(&self, w: usize, v: usize) -> usize {
        let mut count = 0;
        let mut stack = vec![(w, v)];
        while let Some((x, from)) = stack.pop() {
            count += 1;
            for &y in &self.adj[x] {
                if y != from {
                    stack.push((y, x));
                }
            }
        }
        count
    }
}

/// Expected return time `E_v[H_v^+] = 2(|T| - 1) / deg(v)` of the simple
/// random walk (no self-loop).
pub fn expected_return_time(tree: &SimpleTree, v: usize) -> Result<f64, OracleError> {
    if tree.len() <= 1 {
        return Err(OracleError::DegenerateTree("return time needs |T| >= 2".into()));
    }
    Ok(2.0 * (tree.len() - 1) as f64 / tree.degree(v) as f64)
}

/// Expected hitting time of `v` from a neighbour `w`: `2 |T_v(w)| - 1`.
pub fn subtree_hitting_time(tree: &SimpleTree, w: usize, v: usize) -> Result<f64, OracleError> {
    if !tree.adj[w].contains(&v) {
        return Err(OracleError::NotAdjacent(w, v));
    }
    Ok(2.0 * tree.side_size(w, v) as f64 - 1.0)
}

/// Solves `h(u) = 1 + mean_{x ~ u} h(x)`, `h(target) = 0` for the simple
/// random walk by dense elimination.
pub fn hitting_times_by_linear_solve(tree: &SimpleTree, target: usize) -> Result<Vec<f64>, OracleError> {
    let n = tree.len();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for u in 0..n {
        a[u][u] = 1.0;
        if u == target {
            continue;
        }
        let d = tree.degree(u) as f64;
        for &x in &tree.adj[u] {
            a[u][x] -= 1.0 / d;
        }
        b[u] = 1.0;
    }
    solve_linear(a, b)
}

/// Return time by first-step analysis over the linear-solve hitting times.
pub fn return_time_by_linear_solve(tree: &SimpleTree, v: usize) -> Result<f64, OracleError> {
    if tree.len() <= 1 {
        return Err(OracleError::DegenerateTree("return time needs |T| >= 2".into()));
    }
    let h = hitting_times_by_linear_solve(tree, v)?;
    let d = tree.degree(v) as f64;
    Ok(1.0 + tree.adj[v].iter().map(|&u| h[u]).sum::<f64>() / d)
}

/// Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, OracleError> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(OracleError::Singular);
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Cover-time bound `2 m^2` for a tree on `m` vertices.
pub fn cover_time_bound(m: u64) -> u64 {
    2 * m * m
}

/// A probability vector indexed by vertex id.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Distribution {
    pub mass: Vec<f64>,
}

impl Distribution {
    pub fn point(n: usize, at: usize) -> Self {
        let mut mass = vec![0.0; n];
        mass[at] = 1.0;
        Distribution { mass }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }
}

/// One step of the walk with the root self-loop: `next[u] += cur[v] / (deg v + [v = root])`.
fn walk_step(tree: &SimpleTree, cur: &[f64], next: &mut [f64]) {
    next.iter_mut().for_each(|x| *x = 0.0);
    for (v, &m) in cur.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let loop_w = usize::from(v == tree.root);
        let share = m / (tree.degree(v) + loop_w) as f64;
        for &u in &tree.adj[v] {
            next[u] += share;
        }
        if loop_w == 1 {
            next[v] += share;
        }
    }
}

fn dense_transition(tree: &SimpleTree) -> Vec<Vec<f64>> {
    let n = tree.len();
    let mut p = vec![vec![0.0; n]; n];
    for (v, row) in p.iter_mut().enumerate() {
        let loop_w = usize::from(v == tree.root);
        let share = 1.0 / (tree.degree(v) + loop_w) as f64;
        for &u in &tree.adj[v] {
            row[u] += share;
        }
        if loop_w == 1 {
            row[v] += share;
        }
    }
    p
}

pub(crate) fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for (i, row) in a.iter().enumerate() {
        let out_row = &mut out[i];
        for (k, &aik) in row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            for (o, &bkj) in out_row.iter_mut().zip(&b[k]) {
                *o += aik * bkj;
            }
        }
    }
    out
}

pub(crate) fn vec_mat(v: &[f64], m: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (k, &vk) in v.iter().enumerate() {
        if vk == 0.0 {
            continue;
        }
        for (o, &mkj) in out.iter_mut().zip(&m[k]) {
            *o += vk * mkj;
        }
    }
    out
}

/// Exact `t`-step law of the walk (root self-loop included) from `start`.
///
/// Sparse iteration, or repeated squaring of the dense operator once
/// `t > 1000 |V|`.
pub fn exact_walk_distribution(
    tree: &SimpleTree,
    start: usize,
    t: u64,
    cap: usize,
) -> Result<Distribution, OracleError> {
    let n = tree.len();
    if n > cap {
        return Err(OracleError::TooLarge { size: n, cap });
    }
    let mut cur = Distribution::point(n, start).mass;
    if t > 1000 * n as u64 {
        let mut power = dense_transition(tree);
        let mut rest = t;
        while rest > 0 {
            if rest & 1 == 1 {
                cur = vec_mat(&cur, &power);
            }
            rest >>= 1;
            if rest > 0 {
                power = mat_mul(&power, &power);
            }
        }
    } else {
        let mut next = vec![0.0; n];
        for _ in 0..t {
            walk_step(tree, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
    }
    Ok(Distribution { mass: cur })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StationaryForm {
    /// Proportional to walk options: degree, plus one at the root for the loop.
    Exact,
    /// `deg(v) / 2k` with `k` the number of edges, ignoring the loop.
    DegreeShorthand,
}

pub fn stationary_distribution(tree: &SimpleTree, form: StationaryForm) -> Distribution {
    let weights: Vec<f64> = (0..tree.len())
        .map(|v| {
            let loop_w = match form {
                StationaryForm::Exact => usize::from(v == tree.root),
                StationaryForm::DegreeShorthand => 0,
            };
            (tree.degree(v) + loop_w) as f64
        })
        .collect();
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Distribution::point(tree.len(), tree.root);
    }
    Distribution {
        mass: weights.into_iter().map(|w| w / total).collect(),
    }
}

/// `(1/2) sum |p - q|`, padding the shorter support with zeros.
pub fn tv_distance(p: &Distribution, q: &Distribution) -> f64 {
    let n = p.mass.len().max(q.mass.len());
    let get = |d: &Distribution, i: usize| d.mass.get(i).copied().unwrap_or(0.0);
    0.5 * (0..n).map(|i| (get(p, i) - get(q, i)).abs()).sum::<f64>()
}

/// Exact `P(K <= i)` for `K` a sum of independent Bernoulli(`p_k`), by the
/// `O(j i)` convolution recursion truncated above `i`.
pub fn poisson_binomial_cdf(ps: &[f64], i: u64) -> f64 {
    let cap = (i as usize + 1).min(ps.len() + 1);
    let mut pmf = vec![0.0f64; cap];
    pmf[0] = 1.0;
    for &p in ps {
        for c in (1..cap).rev() {
            pmf[c] = pmf[c] * (1.0 - p) + pmf[c - 1] * p;
        }
        pmf[0] *= 1.0 - p;
    }
    pmf.iter().sum::<f64>().min(1.0)
}

/// Brute-force `P(K <= i)` by enumerating all `2^j` outcomes.
pub fn poisson_binomial_cdf_by_enumeration(ps: &[f64], i: u64) -> f64 {
    assert!(ps.len() <= 24, "enumeration is exponential");
    let mut total = 0.0;
    for mask in 0u32..(1u32 << ps.len()) {
        if mask.count_ones() as u64 > i {
            continue;
        }
        let mut prob = 1.0;
        for (k, &p) in ps.iter().enumerate() {
            prob *= if mask >> k & 1 == 1 { p } else { 1.0 - p };
        }
        total += prob;
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RBound {
    Applicable(f64),
    Inapplicable,
}

/// Chebyshev bound on `r_{i,j} = P(K_j <= i - 1)`: `P_j / (P_j - i + 1)^2`
/// where `P_j = sum_{k <= j} p_k`, valid when `P_j > i - 1`.
pub fn chebyshev_r_bound(ps: &[f64], i: u64) -> RBound {
    let mass: f64 = ps.iter().rev().sum();
    chebyshev_bound_from_mass(mass, i)
}

pub fn chebyshev_bound_from_mass(mass: f64, i: u64) -> RBound {
    let gap = mass - (i as f64 - 1.0);
    if gap > 0.0 {
        RBound::Applicable(mass / (gap * gap))
    } else {
        RBound::Inapplicable
    }
}

/// `P(Poisson(lambda) <= k)`.
pub fn poisson_cdf(lambda: f64, k: u64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    // log-space terms avoid underflow of e^-lambda for large lambda
    let mut log_term = -lambda;
    let mut total = log_term.exp();
    for c in 1..=k {
        log_term += lambda.ln() - (c as f64).ln();
        total += log_term.exp();
    }
    total.min(1.0)
}

/// All trees on `n` vertices up to isomorphism, rooted at vertex 0.
///
/// Generated from Prüfer sequences and deduplicated by the canonical
/// encoding of the tree rooted at its center(s).
pub fn nonisomorphic_trees(n: usize) -> Vec<SimpleTree> {
    assert!((1..=10).contains(&n), "enumeration supports 1..=10 vertices");
    if n == 1 {
        return vec![SimpleTree {
            root: 0,
            adj: vec![Vec::new()],
        }];
    }
    if n == 2 {
        return vec![SimpleTree::from_edges(2, 0, &[(0, 1)]).unwrap()];
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut seq = vec![0usize; n - 2];
    loop {
        let edges = prufer_edges(&seq, n);
        let tree = SimpleTree::from_edges(n, 0, &edges).expect("Prüfer sequences encode trees");
        if seen.insert(canonical_form(&tree)) {
            out.push(tree);
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == seq.len() {
                return out;
            }
            seq[pos] += 1;
            if seq[pos] < n {
                break;
            }
            seq[pos] = 0;
            pos += 1;
        }
    }
}

fn prufer_edges(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &x in seq {
        degree[x] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &x in seq {
        let leaf = (0..n).find(|&v| degree[v] == 1).unwrap();
        edges.push((leaf, x));
        degree[leaf] -= 1;
        degree[x] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

fn canonical_form(tree: &SimpleTree) -> String {
    // peel leaves to find the center(s)
    let n = tree.len();
    let mut degree: Vec<usize> = (0..n).map(|v| tree.degree(v)).collect();
    let mut layer: Vec<usize> = (0..n).filter(|&v| degree[v] <= 1).collect();
    let mut remaining = n;
    while remaining > 2 {
        remaining -= layer.len();
        let mut next = Vec::new();
        for &v in &layer {
            for &u in &tree.adj[v] {
                degree[u] -= 1;
                if degree[u] == 1 {
                    next.push(u);
                }
            }
        }
        layer = next;
    }
    layer
        .iter()
        .map(|&c| encode(tree, c, usize::MAX))
        .min()
        .unwrap()
}

fn encode(tree: &SimpleTree, v: usize, parent: usize) -> String {
    let mut kids: Vec<String> = tree.adj[v]
        .iter()
        .filter(|&&u| u != parent)
        .map(|&u| encode(tree, u, v))
        .collect();
    kids.sort();
    format!("({})", kids.concat())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> SimpleTree {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        SimpleTree::from_edges(n, 0, &edges).unwrap()
    }

    fn star(leaves: usize) -> SimpleTree {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        SimpleTree::from_edges(leaves + 1, 0, &edges).unwrap()
    }

    #[test]
    fn pa_target_values() {
        assert!((pa_target(1).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((pa_target(2).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((pa_target(3).unwrap() - 1.0 / 15.0).abs() < 1e-15);
        assert!(pa_target(0).is_err());
        let partial: f64 = (1..=50).map(|d| pa_target(d).unwrap()).sum();
        assert!((partial - (1.0 - 2.0 / (51.0 * 52.0))).abs() < 1e-14);
        let big = 1e6f64;
        assert!((big.powi(3) * pa_target(1_000_000).unwrap() - 4.0).abs() < 1e-4);
    }

    #[test]
    fn return_times_on_designated_instances() {
        let edge = path(2);
        assert_eq!(expected_return_time(&edge, 0).unwrap(), 2.0);
        assert_eq!(expected_return_time(&edge, 1).unwrap(), 2.0);
        let s4 = star(4);
        assert_eq!(expected_return_time(&s4, 0).unwrap(), 2.0);
        assert!((return_time_by_linear_solve(&s4, 0).unwrap() - 2.0).abs() < 1e-12);
        let p3 = path(3);
        assert_eq!(expected_return_time(&p3, 2).unwrap(), 4.0);
        assert!((return_time_by_linear_solve(&p3, 2).unwrap() - 4.0).abs() < 1e-12);
        assert!(expected_return_time(&path(1), 0).is_err());
    }

    #[test]
    fn hitting_time_examples() {
        let s = star(3);
        assert_eq!(subtree_hitting_time(&s, 1, 0).unwrap(), 1.0);
        let p = path(3);
        // v = 0, w = 1, x = 2
        assert_eq!(subtree_hitting_time(&p, 1, 0).unwrap(), 3.0);
        assert!((hitting_times_by_linear_solve(&p, 0).unwrap()[1] - 3.0).abs() < 1e-12);
        assert_eq!(subtree_hitting_time(&p, 2, 0), Err(OracleError::NotAdjacent(2, 0)));
    }

    #[test]
    fn tree_counts_match_known_sequence() {
        let counts: Vec<usize> = (1..=8).map(|n| nonisomorphic_trees(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 1, 2, 3, 6, 11, 23]);
    }

    #[test]
    fn closed_forms_agree_with_linear_solves_on_small_trees() {
        let mut worst = 0.0f64;
        for n in 2..=8 {
            for t in nonisomorphic_trees(n) {
                for v in 0..n {
                    let a = expected_return_time(&t, v).unwrap();
                    let b = return_time_by_linear_solve(&t, v).unwrap();
                    worst = worst.max((a - b).abs());
                    let h = hitting_times_by_linear_solve(&t, v).unwrap();
                    for &w in &t.adj[v] {
                        worst = worst.max((subtree_hitting_time(&t, w, v).unwrap() - h[w]).abs());
                    }
                }
            }
        }
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn walk_distribution_small_cases() {
        let edge = path(2);
        let d0 = exact_walk_distribution(&edge, 0, 0, 10).unwrap();
        assert_eq!(d0.mass, vec![1.0, 0.0]);
        let d1 = exact_walk_distribution(&edge, 0, 1, 10).unwrap();
        assert_eq!(d1.mass, vec![0.5, 0.5]);
        let d2 = exact_walk_distribution(&edge, 0, 2, 10).unwrap();
        assert_eq!(d2.mass, vec![0.75, 0.25]);
        assert!(exact_walk_distribution(&path(20), 0, 1, 10).is_err());
    }

    #[test]
    fn squaring_and_iteration_agree() {
        let t = star(3);
        let a = exact_walk_distribution(&t, 1, 4001, 10).unwrap();
        let mut cur = Distribution::point(4, 1).mass;
        let mut next = vec![0.0; 4];
        for _ in 0..4001 {
            walk_step(&t, &cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        assert!(tv_distance(&a, &Distribution { mass: cur }) < 1e-12);
    }

    #[test]
    fn stationary_examples() {
        let edge = path(2);
        let exact = stationary_distribution(&edge, StationaryForm::Exact);
        assert!((exact.mass[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((exact.mass[1] - 1.0 / 3.0).abs() < 1e-15);
        let short = stationary_distribution(&edge, StationaryForm::DegreeShorthand);
        assert_eq!(short.mass, vec![0.5, 0.5]);
        let s3 = stationary_distribution(&star(3), StationaryForm::Exact);
        assert!((s3.mass[0] - 4.0 / 7.0).abs() < 1e-15);
        assert!((s3.mass[2] - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_is_invariant() {
        for t in nonisomorphic_trees(7) {
            let pi = stationary_distribution(&t, StationaryForm::Exact);
            let mut next = vec![0.0; t.len()];
            walk_step(&t, &pi.mass, &mut next);
            assert!(tv_distance(&pi, &Distribution { mass: next }) < 1e-14);
        }
    }

    #[test]
    fn tv_examples() {
        let p = Distribution { mass: vec![0.5, 0.5] };
        assert_eq!(tv_distance(&p, &p), 0.0);
        let q = Distribution { mass: vec![1.0, 0.0] };
        assert_eq!(tv_distance(&p, &q), 0.5);
        let r = Distribution { mass: vec![0.0, 0.0, 1.0] };
        assert_eq!(tv_distance(&q, &r), 1.0);
    }

    #[test]
    fn poisson_binomial_examples() {
        let ones = vec![1.0; 5];
        assert_eq!(poisson_binomial_cdf(&ones, 4), 0.0);
        assert_eq!(poisson_binomial_cdf(&ones, 5), 1.0);
        assert!((poisson_binomial_cdf(&[0.5, 1.0 / 3.0], 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((poisson_binomial_cdf(&[0.5; 4], 1) - 5.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn chebyshev_spot_value() {
        let ps: Vec<f64> = (1..=100).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        match chebyshev_r_bound(&ps, 2) {
            RBound::Applicable(b) => assert!((b - 0.411).abs() < 1e-3, "{b}"),
            RBound::Inapplicable => panic!("bound should apply"),
        }
        assert_eq!(chebyshev_r_bound(&ps, 6), RBound::Inapplicable);
    }

    #[test]
    fn poisson_cdf_values() {
        assert!((poisson_cdf(1.0, 0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((poisson_cdf(2.0, 2) - 5.0 * (-2.0f64).exp()).abs() < 1e-14);
        assert!(poisson_cdf(800.0, 10) < 1e-300);
    }
}
