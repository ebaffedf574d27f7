//! PRC random forest: bagged PRC trees with per-split feature subsampling and
//! majority voting.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{bootstrap_indices, class_counts, Dataset, Label};
use crate::seed::derive_seed;
use crate::tree::{build_tree_on_rows, PrcTree, TreeParams, TreeRecord};
use crate::{Error, Result, SCHEMA_VERSION};

/// Bootstrap draws tried per tree before giving up on single-class samples.
pub const MAX_BOOTSTRAP_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Template for every tree; `rng_seed` is replaced by a per-tree seed.
    pub tree_params: TreeParams,
    pub master_seed: u64,
}

impl ForestParams {
    /// Seed of the bootstrap sample for tree `tree` on attempt `attempt`.
    ///
    /// `derive_seed(derive_seed(master_seed, tree), attempt)`; the tree's own
    /// feature-sampling seed is `derive_seed(bootstrap_seed, u64::MAX)`.
    pub fn bootstrap_seed(&self, tree: usize, attempt: usize) -> u64 {
        derive_seed(derive_seed(self.master_seed, tree as u64), attempt as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrcForest {
    trees: Vec<PrcTree>,
    params: ForestParams,
    feature_names: Vec<String>,
}

pub fn build_forest(dataset: &Dataset, params: &ForestParams) -> Result<PrcForest> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !dataset.has_both_classes() {
        return Err(Error::SingleClass);
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
    }
    params.tree_params.validate(dataset.n_features())?;
    let pool: Vec<usize> = (0..dataset.n_features()).collect();

    // Indexed parallel collect keeps tree order equal to sequential order.
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|j| grow_member(dataset, &pool, params, j))
        .collect::<Result<Vec<_>>>()?;

    Ok(PrcForest {
        trees,
        params: *params,
        feature_names: dataset.feature_names().to_vec(),
    })
}

fn grow_member(
    dataset: &Dataset,
    pool: &[usize],
    params: &ForestParams,
    j: usize,
) -> Result<PrcTree> {
    for attempt in 0..MAX_BOOTSTRAP_ATTEMPTS {
        let boot_seed = params.bootstrap_seed(j, attempt);
        let rows = bootstrap_indices(dataset.n_rows(), boot_seed);
        let labels: Vec<Label> = rows.iter().map(|&i| dataset.label(i)).collect();
        let (neg, pos) = class_counts(&labels);
        if neg == 0 || pos == 0 {
            continue;
        }
        let tree_params = TreeParams {
            rng_seed: derive_seed(boot_seed, u64::MAX),
            ..params.tree_params
        };
        return build_tree_on_rows(dataset, rows, pool, &tree_params);
    }
    Err(Error::SingleClassBootstrap {
        tree: j,
        attempts: MAX_BOOTSTRAP_ATTEMPTS,
    })
}

impl PrcForest {
    /// Assembles a forest from already-grown trees.
    pub fn from_trees(
        trees: Vec<PrcTree>,
        params: ForestParams,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidParameter(
                "a forest needs at least one tree".into(),
            ));
        }
        if let Some(t) = trees.iter().find(|t| t.n_features() != feature_names.len()) {
            return Err(Error::FeatureMismatch(format!(
                "tree over {} features in a forest over {}",
                t.n_features(),
                feature_names.len()
            )));
        }
        Ok(PrcForest {
            params: ForestParams {
                n_trees: trees.len(),
                ..params
            },
            trees,
            feature_names,
        })
    }

    pub fn trees(&self) -> &[PrcTree] {
        &self.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Majority vote of the trees' labels (ties go positive) and the fraction
    /// of trees voting positive.
    pub fn predict(&self, x: &[f64]) -> Result<(Label, f64)> {
        if x.len() != self.n_features() {
            return Err(Error::ColumnCount {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        let mut positive_votes = 0usize;
        for tree in &self.trees {
            if tree.leaf(x)?.label.is_positive() {
                positive_votes += 1;
            }
        }
        let label = if 2 * positive_votes >= self.trees.len() {
            Label::Positive
        } else {
            Label::Negative
        };
        Ok((label, positive_votes as f64 / self.trees.len() as f64))
    }

    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<(Label, f64)>> {
        dataset.rows().map(|row| self.predict(row)).collect()
    }

    /// Per-feature importance: over every split node of every tree,
    /// `(node rows / root rows) * node AUPRC`, normalized to sum to 1.
    /// All zeros when no tree has a split.
    pub fn feature_importance(&self) -> BTreeMap<String, f64> {
        let mut raw = vec![0.0; self.n_features()];
        for tree in &self.trees {
            let root_rows = tree.root().n_samples as f64;
            for node in tree.root().iter() {
                if let Some(split) = &node.split {
                    raw[split.feature] += node.n_samples as f64 / root_rows * split.auprc;
                }
            }
        }
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            raw.iter_mut().for_each(|v| *v /= total);
        }
        self.feature_names.iter().cloned().zip(raw).collect()
    }
}

pub fn predict_forest(forest: &PrcForest, x: &[f64]) -> Result<(Label, f64)> {
    forest.predict(x)
}

pub fn feature_importance(forest: &PrcForest) -> BTreeMap<String, f64> {
    forest.feature_importance()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestRecord {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub params: ForestParams,
    pub trees: Vec<TreeRecord>,
}

impl PrcForest {
    pub fn to_record(&self) -> ForestRecord {
        ForestRecord {
            schema_version: SCHEMA_VERSION,
            feature_names: self.feature_names.clone(),
            params: self.params,
            trees: self
                .trees
                .iter()
                .map(|t| {
                    t.to_record(&self.feature_names)
                        .expect("tree width matches forest")
                })
                .collect(),
        }
    }

    pub fn from_record(record: &ForestRecord) -> Result<Self> {
        if record.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: record.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let trees = record
            .trees
            .iter()
            .map(|t| PrcTree::from_record(t, &record.feature_names))
            .collect::<Result<Vec<_>>>()?;
        if trees.len() != record.params.n_trees {
            return Err(Error::FeatureMismatch(format!(
                "record lists {} trees but n_trees is {}",
                trees.len(),
                record.params.n_trees
            )));
        }
        Self::from_trees(trees, record.params, record.feature_names.clone())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_record())?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Self::from_record(&serde_json::from_str(json)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::build_tree;

    fn toy() -> Dataset {
        Dataset::new(
            "toy",
            vec!["x".into()],
            vec![vec![1.], vec![2.], vec![3.], vec![4.]],
            [1, 1, -1, -1]
                .iter()
                .map(|&c| Label::from_code(c).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn params(n_trees: usize) -> ForestParams {
        ForestParams {
            n_trees,
            tree_params: TreeParams {
                max_depth: 4,
                min_leaf_size: 1,
                n_features_per_split: 1,
                rng_seed: 0,
            },
            master_seed: 9,
        }
    }

    fn stump(label: Label) -> PrcTree {
        let d = Dataset::new("s", vec!["x".into()], vec![vec![0.0]], vec![label]).unwrap();
        build_tree(&d, &[0], &params(1).tree_params).unwrap()
    }

    fn voting_forest(votes: &[Label]) -> PrcForest {
        PrcForest::from_trees(
            votes.iter().map(|&l| stump(l)).collect(),
            params(votes.len()),
            vec!["x".into()],
        )
        .unwrap()
    }

    #[test]
    fn vote_examples() {
        use Label::*;
        assert_eq!(
            voting_forest(&[Positive; 4]).predict(&[0.0]).unwrap(),
            (Positive, 1.0)
        );
        assert_eq!(
            voting_forest(&[Positive, Negative, Negative])
                .predict(&[0.0])
                .unwrap(),
            (Negative, 1.0 / 3.0)
        );
        assert_eq!(
            voting_forest(&[Positive, Negative])
                .predict(&[0.0])
                .unwrap(),
            (Positive, 0.5)
        );
    }

    #[test]
    fn single_tree_forest_matches_its_tree() {
        let d = toy();
        let f = build_forest(&d, &params(1)).unwrap();
        for x in [0.0, 1.5, 2.0, 2.5, 3.5, 10.0] {
            assert_eq!(
                f.predict(&[x]).unwrap().0,
                f.trees()[0].predict(&[x]).unwrap().0
            );
        }
    }

    #[test]
    fn separable_toy_training_accuracy() {
        let d = toy();
        let f = build_forest(&d, &params(25)).unwrap();
        for (row, &label) in d.rows().zip(d.labels()) {
            assert_eq!(f.predict(row).unwrap().0, label);
        }
    }

    #[test]
    fn deterministic_and_round_trips() {
        let d = toy();
        let a = build_forest(&d, &params(7)).unwrap();
        let b = build_forest(&d, &params(7)).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let back = PrcForest::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn importance_edge_cases() {
        let leaves = voting_forest(&[Label::Positive, Label::Negative]);
        assert!(leaves.feature_importance().values().all(|&v| v == 0.0));

        let d = Dataset::new(
            "two",
            vec!["a".into(), "b".into()],
            vec![vec![1., 0.], vec![2., 0.], vec![3., 0.], vec![4., 0.]],
            toy().labels().to_vec(),
        )
        .unwrap();
        let p = TreeParams {
            max_depth: 2,
            min_leaf_size: 1,
            n_features_per_split: 1,
            rng_seed: 0,
        };
        let tree = crate::tree::build_tree(&d, &[0], &p).unwrap();
        let f = PrcForest::from_trees(vec![tree], params(1), d.feature_names().to_vec()).unwrap();
        let imp = f.feature_importance();
        assert_eq!(imp["a"], 1.0);
        assert_eq!(imp["b"], 0.0);
    }

    #[test]
    fn single_class_input_rejected() {
        let d = Dataset::new(
            "s",
            vec!["x".into()],
            vec![vec![0.0], vec![1.0]],
            vec![Label::Negative; 2],
        )
        .unwrap();
        assert!(matches!(
            build_forest(&d, &params(3)),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn retries_single_class_bootstraps_then_fails() {
        // One positive among many rows: P(no positive in a bootstrap) ~ 1/e,
        // so some trees need a retry but all eventually succeed.
        let n = 30;
        let rows = (0..n).map(|i| vec![i as f64]).collect();
        let mut labels = vec![Label::Negative; n];
        labels[0] = Label::Positive;
        let d = Dataset::new("rare", vec!["x".into()], rows, labels).unwrap();
        let f = build_forest(&d, &params(20)).unwrap();
        assert_eq!(f.trees().len(), 20);
    }
}
