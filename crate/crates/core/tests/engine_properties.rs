use rand::Rng;

use tbrw_core::count::ExtCount;
use tbrw_core::engine::{mixing_threshold, step_exact, LumpedChain, ProcessState, ThresholdPolicy};
use tbrw_core::laws::{LawSequence, LawSpec};
use tbrw_core::oracles::{
    exact_walk_distribution, stationary_distribution, tv_distance, Distribution, SimpleTree,
    StationaryForm,
};
use tbrw_core::rng::stream;
use tbrw_core::tree::{CompressedTree, TreeSpec, VertexRef};

/// All rooted unlabeled trees on `n` vertices as parent arrays, by
/// Beyer–Hedetniemi level sequences.
fn rooted_trees(n: usize) -> Vec<Vec<Option<usize>>> {
    let to_parents = |levels: &[usize]| -> Vec<Option<usize>> {
        (0..levels.len())
            .map(|i| (0..i).rev().find(|&j| levels[j] + 1 == levels[i]))
            .collect()
    };
    let mut levels: Vec<usize> = (1..=n).collect();
    let mut out = vec![to_parents(&levels)];
    loop {
        let Some(p) = (0..n).rev().find(|&i| levels[i] > 2) else {
            return out;
        };
        let q = (0..p).rev().find(|&j| levels[j] == levels[p] - 1).unwrap();
        for i in p..n {
            levels[i] = levels[i - (p - q)];
        }
        out.push(to_parents(&levels));
    }
}

/// Compressed form of a rooted shape: the children of each vertex form one
/// bundle, and children that have children of their own are materialized.
fn compress(parents: &[Option<usize>]) -> CompressedTree {
    let n = parents.len();
    let mut kids = vec![Vec::new(); n];
    for (v, p) in parents.iter().enumerate() {
        if let Some(p) = p {
            kids[*p].push(v);
        }
    }
    let mut tree = CompressedTree::init(&TreeSpec::SingleVertex).unwrap();
    let mut stack = vec![(0usize, VertexRef::Vertex(0))];
    let mut t = 0u64;
    while let Some((v, at)) = stack.pop() {
        if kids[v].is_empty() {
            continue;
        }
        t += 1;
        let ev = tree
            .grow(at, ExtCount::from_u64(kids[v].len() as u64), ExtCount::from_u64(t))
            .unwrap();
        for &c in &kids[v] {
            if !kids[c].is_empty() {
                stack.push((c, VertexRef::Member(ev.new_bundle)));
            }
        }
    }
    tree
}

#[test]
fn rooted_tree_counts() {
    let counts: Vec<usize> = (1..=12).map(|n| rooted_trees(n).len()).collect();
    assert_eq!(counts, vec![1, 1, 2, 4, 9, 20, 48, 115, 286, 719, 1842, 4766]);
}

#[test]
fn lumped_chain_is_exact_on_small_trees() {
    let steps = [1u64, 2, 3, 4, 5, 8, 13, 21, 34, 55, 63, 64];
    let mut worst = 0.0f64;
    let mut checked = 0;
    for n in 1..=12 {
        for shape in rooted_trees(n) {
            let tree = compress(&shape);
            tree.check_invariants().unwrap();
            let chain = LumpedChain::build(&tree, 64).unwrap();
            let exp = SimpleTree::from_compressed(&tree, 64).unwrap();
            let starts: Vec<usize> = (0..exp.tree.len()).step_by(5).collect();
            for &start in &starts {
                let s = chain.index_of(exp.origin[start]).unwrap();
                for &t in &steps {
                    let lumped = chain.distribution(s, ExtCount::from_u64(t));
                    let full = exact_walk_distribution(&exp.tree, start, t, 64).unwrap();
                    // expand lumped mass uniformly over bundle members
                    let mut expanded = vec![0.0; exp.tree.len()];
                    for (v, origin) in exp.origin.iter().enumerate() {
                        let i = chain.index_of(*origin).unwrap();
                        let share = match origin {
                            VertexRef::Member(b) => tree.bundle(*b).multiplicity().to_f64(),
                            VertexRef::Vertex(_) => 1.0,
                        };
                        expanded[v] = lumped[i] / share;
                    }
                    // the full chain started at one member is symmetric only
                    // after collapsing, so compare collapsed laws
                    let mut collapsed = vec![0.0; chain.states.len()];
                    for (v, origin) in exp.origin.iter().enumerate() {
                        collapsed[chain.index_of(*origin).unwrap()] += full.mass[v];
                    }
                    let tv = tv_distance(&Distribution { mass: lumped.clone() }, &Distribution { mass: collapsed });
                    worst = worst.max(tv);
                    if !matches!(exp.origin[start], VertexRef::Member(_)) {
                        let tv_full = tv_distance(&Distribution { mass: expanded }, &full);
                        worst = worst.max(tv_full);
                    }
                    checked += 1;
                }
            }
        }
    }
    assert!(worst < 1e-10, "worst TV {worst} over {checked} checks");
}

fn bernoulli_power(gamma: f64, shift: u64) -> LawSequence {
    LawSequence::new(LawSpec::BernoulliPower { c: 1.0, gamma })
        .unwrap()
        .shifted(shift)
}

fn sequential_first_growth<R: Rng>(law: &LawSequence, clock: u64, rng: &mut R) -> u64 {
    let mut t = clock;
    loop {
        t += 1;
        if rng.random::<f64>() < law.growth_prob(t as f64) {
            return t - clock;
        }
    }
}

fn ks_two_sample(a: &mut [u64], b: &mut [u64]) -> f64 {
    a.sort_unstable();
    b.sort_unstable();
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn thinned_gaps_match_sequential_bernoulli_and_exact_cdf() {
    let n = 1_000_000usize;
    let crit = (-(1e-3f64 / 2.0).ln() / 2.0).sqrt();
    for (shift, clock) in [(1u64, 0u64), (0, 1000)] {
        let law = bernoulli_power(0.75, shift);
        let mut rng = stream(11 + shift);
        let clock_c = ExtCount::from_u64(clock);
        let mut thinned: Vec<u64> = (0..n)
            .map(|_| {
                law.next_growth_time(clock_c, &mut rng)
                    .unwrap()
                    .as_u64()
                    .unwrap()
                    - clock
            })
            .collect();
        let mut rng2 = stream(99 + shift);
        let mut seq: Vec<u64> = (0..n)
            .map(|_| sequential_first_growth(&law, clock, &mut rng2))
            .collect();
        let d2 = ks_two_sample(&mut thinned, &mut seq);
        assert!(d2 < crit * (2.0 / n as f64).sqrt(), "two-sample KS {d2}");

        // exact CDF P(gap <= g) = 1 - prod_{s <= g} (1 - p_{clock+s})
        let mut survival = 1.0;
        let mut d1 = 0.0f64;
        let mut idx = 0usize;
        let max = *thinned.last().unwrap();
        for g in 1..=max {
            survival *= 1.0 - law.growth_prob((clock + g) as f64);
            while idx < n && thinned[idx] <= g {
                idx += 1;
            }
            d1 = d1.max((idx as f64 / n as f64 - (1.0 - survival)).abs());
        }
        assert!(d1 < crit / (n as f64).sqrt(), "one-sample KS {d1}");
    }
}

#[test]
fn growth_lands_on_new_leaves_with_probability_z_over_degree() {
    let reps = 200_000;
    // non-root leaf of a single edge: degree 1, grow 4
    let law = LawSequence::new(LawSpec::Constant { p: 1.0, z: 4 }).unwrap();
    let mut fresh = 0;
    for seed in 0..reps {
        let mut s = ProcessState::new(&TreeSpec::SingleEdge, law.clone(), seed).unwrap();
        s.position = VertexRef::Vertex(1);
        step_exact(&mut s).unwrap();
        fresh += usize::from(matches!(s.position, VertexRef::Member(_)));
    }
    let f = fresh as f64 / reps as f64;
    assert!((f - 4.0 / 5.0).abs() < 0.004, "{f}");
    // root of a 3-star: degree 3, loop, grow 2 -> 2 / 6
    let law = LawSequence::new(LawSpec::Constant { p: 1.0, z: 2 }).unwrap();
    let star = TreeSpec::Edges {
        root: 0,
        edges: vec![(0, 1), (0, 2), (0, 3)],
    };
    let mut fresh = 0;
    for seed in 0..reps {
        let mut s = ProcessState::new(&star, law.clone(), seed).unwrap();
        step_exact(&mut s).unwrap();
        fresh += usize::from(matches!(s.position, VertexRef::Member(_)));
    }
    let f = fresh as f64 / reps as f64;
    assert!((f - 2.0 / 6.0).abs() < 0.004, "{f}");
}

#[test]
fn stationary_shortcut_is_within_tolerance_of_exact_transport() {
    let mut rng = stream(21);
    let eps = 0.01;
    for _ in 0..3 {
        let n = rng.random_range(10..=50usize);
        let edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
        let spec = TreeSpec::Edges { root: 0, edges: edges.clone() };
        let tree = CompressedTree::init(&spec).unwrap();
        let simple = SimpleTree::from_edges(n, 0, &edges).unwrap();
        let t = mixing_threshold(ExtCount::from_u64(n as u64), eps, ThresholdPolicy::Rigorous);
        let exact = exact_walk_distribution(&simple, 0, t.as_u64().unwrap(), 100).unwrap();
        let pi = stationary_distribution(&simple, StationaryForm::Exact);
        let reps = 100_000;
        let mut counts = vec![0.0; n];
        for _ in 0..reps {
            match tree.sample_stationary(&mut rng) {
                VertexRef::Vertex(v) => counts[v] += 1.0,
                VertexRef::Member(_) => unreachable!("fully materialized"),
            }
        }
        let empirical = Distribution {
            mass: counts.iter().map(|c| c / reps as f64).collect(),
        };
        // expected TV of an n-sample empirical law: about sum sqrt(p / (2 pi reps))
        let mc: f64 = pi
            .mass
            .iter()
            .map(|p| (p * (1.0 - p) / reps as f64).sqrt())
            .sum::<f64>()
            * 0.5
            * (2.0 / std::f64::consts::PI).sqrt();
        let tv = tv_distance(&empirical, &exact);
        assert!(tv <= eps + 3.0 * mc, "tv {tv}, mc {mc}");
    }
}

#[test]
fn batched_walk_matches_lumped_chain() {
    // hub with big leaf bundles, a materialized member, and a child subtree
    let mut tree = CompressedTree::init(&TreeSpec::SingleEdge).unwrap();
    let b0 = tree.grow(VertexRef::Vertex(0), ExtCount::from_u64(12), ExtCount::from_u64(1)).unwrap();
    tree.grow(VertexRef::Member(b0.new_bundle), ExtCount::from_u64(3), ExtCount::from_u64(2)).unwrap();
    tree.grow(VertexRef::Vertex(1), ExtCount::from_u64(7), ExtCount::from_u64(3)).unwrap();
    tree.grow(VertexRef::Vertex(0), ExtCount::from_u64(20), ExtCount::from_u64(4)).unwrap();
    tree.check_invariants().unwrap();
    let chain = LumpedChain::build(&tree, 64).unwrap();
    let reps = 200_000;
    let mut rng = stream(5);
    for start in [VertexRef::Vertex(0), VertexRef::Vertex(1), VertexRef::Member(b0.new_bundle)] {
        let s = chain.index_of(start).unwrap();
        for t in [1u64, 2, 3, 7, 50, 51] {
            let exact = chain.distribution(s, ExtCount::from_u64(t));
            let mut counts = vec![0.0; exact.len()];
            for _ in 0..reps {
                let end = tree.walk(start, t, &mut rng);
                counts[chain.index_of(end).unwrap()] += 1.0;
            }
            let empirical = Distribution {
                mass: counts.iter().map(|c| c / reps as f64).collect(),
            };
            let tv = tv_distance(&empirical, &Distribution { mass: exact.clone() });
            let mc: f64 = exact.iter().map(|p| (p * (1.0 - p) / reps as f64).sqrt()).sum::<f64>() * 0.5;
            assert!(tv <= 4.0 * mc + 1e-12, "start {start} t {t}: tv {tv}, mc {mc}");
        }
    }
}
