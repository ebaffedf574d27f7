mod common;

use common::{dataset_from, small_dataset};
use prc_forest::prc::find_split;
use prc_forest::tree::{build_tree, PrcTree, TreeNode};
use prc_forest::{Dataset, TreeParams};
use proptest::prelude::*;

fn params_strategy() -> impl Strategy<Value = (usize, usize, u64)> {
    (1usize..7, 1usize..4, any::<u64>())
}

/// Training rows routed to each node, keyed by pre-order position.
fn routed_rows(tree: &PrcTree, d: &Dataset) -> Vec<Vec<usize>> {
    let nodes: Vec<&TreeNode> = tree.root().iter().collect();
    let mut routed = vec![Vec::new(); nodes.len()];
    for i in 0..d.n_rows() {
        let path = tree.decision_path(d.row(i)).unwrap();
        for (step, node) in path.iter().enumerate() {
            assert_eq!(node.depth, step + 1);
            let pos = nodes.iter().position(|n| std::ptr::eq(*n, *node)).unwrap();
            routed[pos].push(i);
        }
        assert!(path.last().unwrap().is_leaf());
        assert!(path[..path.len() - 1].iter().all(|n| !n.is_leaf()));
    }
    routed
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn structure_and_leaf_consistency(
        (rows, positive) in small_dataset(2..=40, 1..=4),
        (max_depth, min_leaf, seed) in params_strategy(),
    ) {
        let d = dataset_from(rows, &positive);
        let pool: Vec<usize> = (0..d.n_features()).collect();
        let params = TreeParams {
            max_depth,
            min_leaf_size: min_leaf,
            n_features_per_split: d.n_features(),
            rng_seed: seed,
        };
        let tree = build_tree(&d, &pool, &params).unwrap();
        prop_assert_eq!(&tree, &build_tree(&d, &pool, &params).unwrap());
        prop_assert!(tree.depth() <= max_depth);

        let nodes: Vec<&TreeNode> = tree.root().iter().collect();
        let routed = routed_rows(&tree, &d);
        for (node, rows) in nodes.iter().zip(&routed) {
            prop_assert_eq!(node.n_samples, rows.len());
            let pos = rows.iter().filter(|&&i| d.label(i).is_positive()).count();
            prop_assert_eq!(node.score.positive, pos as f64 / rows.len() as f64);
            prop_assert_eq!(node.score.negative, (rows.len() - pos) as f64 / rows.len() as f64);
            prop_assert_eq!(node.label.is_positive(), 2 * pos >= rows.len());

            let pure = pos == 0 || pos == rows.len();
            match &node.split {
                Some(split) => {
                    prop_assert!(!pure);
                    prop_assert!(node.depth < max_depth);
                    prop_assert!(split.left.n_samples >= min_leaf);
                    prop_assert!(split.right.n_samples >= min_leaf);
                    prop_assert_eq!(split.left.n_samples + split.right.n_samples, node.n_samples);
                }
                None => {
                    if pure || node.depth >= max_depth || rows.len() < 2 * min_leaf {
                        continue;
                    }
                    // Otherwise no single feature may offer an admissible split.
                    for f in 0..d.n_features() {
                        if let Ok(c) = find_split(&d, rows, &[f]) {
                            let left = rows.iter().filter(|&&i| d.value(i, f) <= c.threshold).count();
                            prop_assert!(left < min_leaf || rows.len() - left < min_leaf);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn increasing_transform_keeps_predictions(
        (rows, positive) in small_dataset(4..=40, 1..=3),
        (max_depth, min_leaf, seed) in params_strategy(),
        feature in 0usize..3,
        n_f in 1usize..=3,
    ) {
        let d = dataset_from(rows.clone(), &positive);
        let feature = feature % d.n_features();
        let transform = |v: f64| v * v * v + 2.0 * v + 10.0;
        let moved: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r[feature] = transform(r[feature]);
                r
            })
            .collect();
        let e = dataset_from(moved.clone(), &positive);
        let pool: Vec<usize> = (0..d.n_features()).collect();
        let params = TreeParams {
            max_depth,
            min_leaf_size: min_leaf,
            n_features_per_split: n_f.min(d.n_features()),
            rng_seed: seed,
        };
        let a = build_tree(&d, &pool, &params).unwrap();
        let b = build_tree(&e, &pool, &params).unwrap();
        // Probe the training rows and points between the grid values.
        let mut probes: Vec<Vec<f64>> = rows.clone();
        probes.extend(rows.iter().map(|r| r.iter().map(|v| v + 0.5).collect()));
        for probe in probes {
            let mut shifted = probe.clone();
            shifted[feature] = transform(probe[feature]);
            prop_assert_eq!(a.predict(&probe).unwrap(), b.predict(&shifted).unwrap());
        }
    }
}

#[test]
fn perfectly_separable_data_is_fit_exactly() {
    for seed in 0..10u64 {
        let d = common::signal_dataset(120, 4, 0.3, seed);
        // Rebuild with a cleanly separating first feature.
        let rows: Vec<Vec<f64>> = d
            .rows()
            .zip(d.labels())
            .map(|(r, l)| {
                let mut r = r.to_vec();
                r[0] = if l.is_positive() {
                    5.0 + r[1]
                } else {
                    -5.0 - r[2]
                };
                r
            })
            .collect();
        let positive: Vec<bool> = d.labels().iter().map(|l| l.is_positive()).collect();
        let d = dataset_from(rows, &positive);
        let params = TreeParams {
            max_depth: 50,
            min_leaf_size: 1,
            n_features_per_split: 4,
            rng_seed: seed,
        };
        let tree = build_tree(&d, &[0, 1, 2, 3], &params).unwrap();
        for i in 0..d.n_rows() {
            assert_eq!(tree.predict(d.row(i)).unwrap().0, d.label(i), "seed {seed}");
        }
    }
}

#[test]
fn serialized_tree_round_trips() {
    let d = common::signal_dataset(200, 5, 0.2, 3);
    let params = TreeParams {
        max_depth: 8,
        min_leaf_size: 3,
        n_features_per_split: 2,
        rng_seed: 17,
    };
    let tree = build_tree(&d, &[0, 1, 2, 3, 4], &params).unwrap();
    let json = tree.to_json(d.feature_names()).unwrap();
    let back = PrcTree::from_json(&json, d.feature_names()).unwrap();
    assert_eq!(back, tree);
    assert_eq!(back.to_json(d.feature_names()).unwrap(), json);
}
