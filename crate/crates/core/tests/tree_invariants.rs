use proptest::prelude::*;

use tbrw_core::count::ExtCount;
use tbrw_core::engine::{run, EngineMode, Horizon, ProcessState};
use tbrw_core::laws::{LawSequence, LawSpec};
use tbrw_core::observables::LeafFraction;
use tbrw_core::observables::Checkpoints;
use tbrw_core::oracles::SimpleTree;
use tbrw_core::rng::stream;
use tbrw_core::tree::{CompressedTree, TreeSpec, VertexRef};

#[derive(Clone, Debug)]
enum Op {
    Grow { pick: usize, count: u64 },
    GrowHuge { pick: usize, log2: f64 },
    Materialize { pick: usize },
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        6 => (any::<usize>(), 1u64..6).prop_map(|(pick, count)| Op::Grow { pick, count }),
        1 => (any::<usize>(), 54.0f64..120.0).prop_map(|(pick, log2)| Op::GrowHuge { pick, log2 }),
        2 => any::<usize>().prop_map(|pick| Op::Materialize { pick }),
    ]
}

fn refs(tree: &CompressedTree) -> Vec<VertexRef> {
    let mut out: Vec<VertexRef> = (0..tree.materialized_count()).map(VertexRef::Vertex).collect();
    out.extend(tree.live_bundles().map(|(b, _)| VertexRef::Member(b)));
    out
}

fn apply(tree: &mut CompressedTree, ops: &[Op]) -> u64 {
    let mut growths = 0;
    for (t, op) in ops.iter().enumerate() {
        let all = refs(tree);
        let time = ExtCount::from_u64(t as u64 + 1);
        match *op {
            Op::Grow { pick, count } => {
                tree.grow(all[pick % all.len()], ExtCount::from_u64(count), time).unwrap();
                growths += 1;
            }
            Op::GrowHuge { pick, log2 } => {
                tree.grow(all[pick % all.len()], ExtCount::from_log2(log2), time).unwrap();
                growths += 1;
            }
            Op::Materialize { pick } => {
                let live: Vec<usize> = tree.live_bundles().map(|(b, _)| b).collect();
                if !live.is_empty() {
                    tree.materialize(live[pick % live.len()]);
                }
            }
        }
    }
    growths
}

type Histogram = std::collections::BTreeMap<ExtCount, ExtCount>;

/// Histograms agree key by key; counts past 2^53 only up to rounding.
fn same_histogram(a: &Histogram, b: &Histogram) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|((ka, va), (kb, vb))| ka.approx_eq(kb, 1e-12) && va.approx_eq(vb, 1e-12))
}

fn initial() -> impl Strategy<Value = TreeSpec> {
    prop_oneof![
        Just(TreeSpec::SingleVertex),
        Just(TreeSpec::SingleEdge),
        Just(TreeSpec::Edges {
            root: 1,
            edges: vec![(0, 1), (1, 2), (2, 3), (1, 4)],
        }),
    ]
}

proptest! {
    #[test]
    fn invariants_hold_after_any_growth(spec in initial(), ops in prop::collection::vec(op(), 0..40)) {
        let mut tree = CompressedTree::init(&spec).unwrap();
        apply(&mut tree, &ops);
        prop_assert_eq!(tree.check_invariants(), Ok(()));
    }

    #[test]
    fn materializing_preserves_histogram(ops in prop::collection::vec(op(), 1..30), pick in any::<usize>()) {
        let mut tree = CompressedTree::init(&TreeSpec::SingleVertex).unwrap();
        apply(&mut tree, &ops);
        let before = tree.degree_histogram();
        let live: Vec<usize> = tree.live_bundles().map(|(b, _)| b).collect();
        if !live.is_empty() {
            tree.materialize(live[pick % live.len()]);
        }
        prop_assert!(same_histogram(&tree.degree_histogram(), &before));
    }

    #[test]
    fn walk_weights_sum_to_walk_degree(ops in prop::collection::vec(op(), 0..30)) {
        let mut tree = CompressedTree::init(&TreeSpec::SingleEdge).unwrap();
        apply(&mut tree, &ops);
        for r in refs(&tree) {
            let total = tree
                .walk_options(r)
                .iter()
                .fold(ExtCount::ZERO, |acc, o| acc + o.weight);
            let loop_weight = u64::from(r == VertexRef::Vertex(tree.root()));
            prop_assert!(total.approx_eq(&(tree.degree(r) + loop_weight), 1e-12));
            prop_assert!(total.approx_eq(&tree.walk_degree(r), 1e-12));
        }
    }

    #[test]
    fn leaf_lower_bound(spec in initial(), ops in prop::collection::vec(op(), 0..40)) {
        let mut tree = CompressedTree::init(&spec).unwrap();
        let v0 = tree.vertex_count();
        let k = apply(&mut tree, &ops);
        let added = tree.vertex_count().saturating_sub(v0);
        let floor = added.saturating_sub(v0).saturating_sub(ExtCount::from_u64(k));
        prop_assert!(tree.leaf_count() >= floor || tree.leaf_count().approx_eq(&floor, 1e-12));
    }

    #[test]
    fn snapshot_round_trip_keeps_the_graph(ops in prop::collection::vec(op(), 0..25)) {
        let mut tree = CompressedTree::init(&TreeSpec::SingleEdge).unwrap();
        apply(&mut tree, &ops);
        let back = CompressedTree::import_snapshot(&tree.export_snapshot()).unwrap();
        prop_assert!(same_histogram(&back.degree_histogram(), &tree.degree_histogram()));
        prop_assert!(back.vertex_count().approx_eq(&tree.vertex_count(), 1e-12));
        prop_assert_eq!(back.check_invariants(), Ok(()));
    }
}

#[test]
fn expansion_matches_counts() {
    let mut tree = CompressedTree::init(&TreeSpec::SingleEdge).unwrap();
    let mut rng = stream(3);
    use rand::Rng;
    for t in 1..40u64 {
        let all = refs(&tree);
        let at = all[rng.random_range(0..all.len())];
        tree.grow(at, ExtCount::from_u64(rng.random_range(1..4)), ExtCount::from_u64(t))
            .unwrap();
    }
    let exp = SimpleTree::from_compressed(&tree, 10_000).unwrap();
    assert_eq!(Some(exp.tree.len() as u64), tree.vertex_count().as_u64());
    let mut hist = std::collections::BTreeMap::new();
    for v in 0..exp.tree.len() {
        *hist.entry(ExtCount::from_u64(exp.tree.degree(v) as u64)).or_insert(ExtCount::ZERO) += 1;
    }
    assert_eq!(hist, tree.degree_histogram());
}

#[test]
fn leaf_bound_holds_along_log_burst_runs() {
    let law = LawSequence::new(LawSpec::LogBurst { delta: 0.8 }).unwrap();
    for seed in 0..5 {
        let mut state = ProcessState::new(&TreeSpec::SingleEdge, law.clone(), seed).unwrap();
        let mut leaves = LeafFraction::new(Checkpoints::at(&[200]));
        let mode = EngineMode::Shortcut {
            epsilon: 0.01,
            policy: tbrw_core::engine::ThresholdPolicy::Fast { coefficient: 8.0 },
            fallback_cap: 1_000_000_000,
            lumped: None,
        };
        run(&mut state, &mode, Horizon::GrowthEvents(200), &mut [&mut leaves]).unwrap();
        assert_eq!(leaves.bound_checks, 200);
        state.tree.check_invariants().unwrap();
    }
}
