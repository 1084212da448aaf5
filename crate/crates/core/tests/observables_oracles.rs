use proptest::prelude::*;
use rand::Rng;

use tbrw_core::count::ExtCount;
use tbrw_core::observables::{classify_interval, red_visit_count, Interval, RedBlueState, StepLog};
use tbrw_core::oracles::{
    chebyshev_r_bound, poisson_binomial_cdf, poisson_binomial_cdf_by_enumeration, RBound,
};
use tbrw_core::rng::stream;
use tbrw_core::tree::{CompressedTree, TreeSpec, VertexRef};

/// Replays single-leaf growth at the given sites, returning the `(B, R)`
/// trajectory and the final coloring.
fn replay(sites: &[usize], gaps: &[u64], coin_seed: u64) -> (Vec<(u64, u64)>, RedBlueState, CompressedTree) {
    let mut tree = CompressedTree::init(&TreeSpec::SingleEdge).unwrap();
    let mut rb = RedBlueState::new(&tree, 0.1).unwrap();
    let mut coins = stream(coin_seed);
    let mut path = Vec::new();
    for (i, (&site, &gap)) in sites.iter().zip(gaps).enumerate() {
        let mut all: Vec<VertexRef> = (0..tree.materialized_count()).map(VertexRef::Vertex).collect();
        all.extend(tree.live_bundles().map(|(b, _)| VertexRef::Member(b)));
        let at = all[site % all.len()];
        let ev = tree
            .grow(at, ExtCount::ONE, ExtCount::from_u64(i as u64 + 1))
            .unwrap();
        let interval = classify_interval(rb.k + 1, ExtCount::from_u64(gap), rb.delta);
        rb.update_coloring(ev.parent, ev.new_bundle, ev.leaf_count, ev.materialized, interval, &mut coins)
            .unwrap();
        path.push((rb.blue, rb.red));
    }
    (path, rb, tree)
}

proptest! {
    #[test]
    fn coloring_is_position_independent(
        sites in prop::collection::vec(any::<usize>(), 1..80),
        shuffled in prop::collection::vec(any::<usize>(), 80),
        gaps in prop::collection::vec(1u64..20_000, 80),
        seed in any::<u64>(),
    ) {
        let (a, rb_a, tree_a) = replay(&sites, &gaps, seed);
        let (b, _, _) = replay(&shuffled[..sites.len()], &gaps, seed);
        prop_assert_eq!(&a, &b);
        for (k, &(blue, red)) in a.iter().enumerate() {
            prop_assert_eq!(blue + red, 2 * (k as u64 + 2));
        }
        let hist = rb_a.blue_degree_histogram(&tree_a);
        let total: u64 = hist.iter().map(|(d, n)| d * n).sum();
        prop_assert_eq!(total, rb_a.blue);
        prop_assert_eq!(hist.values().sum::<u64>(), tree_a.vertex_count().as_u64().unwrap());
        for v in 0..tree_a.materialized_count() {
            let at = VertexRef::Vertex(v);
            prop_assert!(rb_a.blue_degree(at) <= tree_a.degree(at).as_u64().unwrap());
        }
    }

    #[test]
    fn poisson_binomial_dp_matches_enumeration(
        ps in prop::collection::vec(0.0f64..=1.0, 0..=12),
        i in 0u64..13,
    ) {
        let dp = poisson_binomial_cdf(&ps, i);
        let brute = poisson_binomial_cdf_by_enumeration(&ps, i);
        prop_assert!((dp - brute).abs() < 1e-12, "{} vs {}", dp, brute);
    }

    #[test]
    fn interval_threshold_is_sharp(k in 1u64..500, delta in 0.0f64..0.5) {
        let t = (k as f64).powf(2.0 + delta) + 1.0;
        let above = ExtCount::from_u64(t.ceil() as u64);
        prop_assert_eq!(classify_interval(k, above, delta), Interval::Good);
        if t.ceil() - 1.0 < t {
            let below = ExtCount::from_u64(t.ceil() as u64 - 1);
            prop_assert_eq!(classify_interval(k, below, delta), Interval::Bad);
        }
    }
}

#[test]
fn chebyshev_dominates_exact_tails_for_harmonic_probabilities() {
    let ps: Vec<f64> = (1..=200).map(|k| 1.0 / (k as f64 + 1.0)).collect();
    let mut applicable = 0;
    for j in 1..=200 {
        for i in 1..=(j as u64 + 1) {
            if let RBound::Applicable(b) = chebyshev_r_bound(&ps[..j], i) {
                let exact = poisson_binomial_cdf(&ps[..j], i - 1);
                assert!(exact <= b + 1e-12, "i={i} j={j}: {exact} > {b}");
                applicable += 1;
            }
        }
    }
    assert!(applicable > 200);
}

#[test]
fn red_visits_are_bounded_by_the_window() {
    use tbrw_core::engine::{run, EngineMode, Horizon, ProcessState};
    use tbrw_core::laws::{LawSequence, LawSpec};
    let law = LawSequence::new(LawSpec::BernoulliPower { c: 1.0, gamma: 0.6 }).unwrap();
    let mut state = ProcessState::new(&TreeSpec::SingleEdge, law, 17).unwrap();
    let mut log = StepLog::default();
    run(&mut state, &EngineMode::Exact, Horizon::Steps(5000), &mut [&mut log]).unwrap();
    assert_eq!(log.records.len(), 5001);
    let mut rng = stream(2);
    for _ in 0..200 {
        let t = rng.random_range(0..4000u64);
        let s = rng.random_range(0..1000u64);
        let n = red_visit_count(&log.records, t, s).unwrap();
        assert!(n <= s + 1);
    }
    // without growth nothing is ever red
    let still = LawSequence::new(LawSpec::Constant { p: 0.0, z: 1 }).unwrap();
    let mut state = ProcessState::new(&TreeSpec::SingleEdge, still, 17).unwrap();
    let mut log = StepLog::default();
    run(&mut state, &EngineMode::Exact, Horizon::Steps(500), &mut [&mut log]).unwrap();
    assert_eq!(red_visit_count(&log.records, 0, 500).unwrap(), 0);
}
