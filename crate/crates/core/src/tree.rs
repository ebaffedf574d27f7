//! PRC classification tree.
//!
//! Each internal node splits on the AUPRC-best feature among `n_features_per_split`
//! features sampled for that node, at the F1-best threshold. Rows with
//! `value <= threshold` go left. The root has depth 1 and a node may only
//! split while `depth < max_depth`.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};
use crate::prc;
use crate::seed::{self, derive_seed};
use crate::{Error, Result, SCHEMA_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf_size: usize,
    pub n_features_per_split: usize,
    pub rng_seed: u64,
}

impl TreeParams {
    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.max_depth == 0 {
            return Err(Error::InvalidParameter(
                "max_depth must be at least 1".into(),
            ));
        }
        if self.min_leaf_size == 0 {
            return Err(Error::InvalidParameter(
                "min_leaf_size must be at least 1".into(),
            ));
        }
        if self.n_features_per_split == 0 || self.n_features_per_split > pool_size {
            return Err(Error::InvalidParameter(format!(
                "n_features_per_split must lie in 1..={pool_size}, got {}",
                self.n_features_per_split
            )));
        }
        Ok(())
    }
}

/// Class proportions of the training rows that reached a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeScore {
    pub negative: f64,
    pub positive: f64,
}

impl NodeScore {
    fn from_counts(negatives: usize, positives: usize) -> Self {
        let n = (negatives + positives) as f64;
        NodeScore {
            negative: negatives as f64 / n,
            positive: positives as f64 / n,
        }
    }

    /// Majority class; an even split goes to the positive class.
    pub fn majority(&self) -> Label {
        if self.positive >= self.negative {
            Label::Positive
        } else {
            Label::Negative
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub score: NodeScore,
    pub label: Label,
    /// Number of training rows (bootstrap repeats included) that reached the node.
    pub n_samples: usize,
    pub depth: usize,
    pub split: Option<Box<Split>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub auprc: f64,
    pub f1: f64,
    pub left: TreeNode,
    pub right: TreeNode,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    /// Pre-order traversal.
    pub fn iter(&self) -> impl Iterator<Item = &TreeNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            if let Some(split) = &node.split {
                stack.push(&split.right);
                stack.push(&split.left);
            }
            Some(node)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrcTree {
    root: TreeNode,
    params: TreeParams,
    n_features: usize,
    n_leaves: usize,
}

impl PrcTree {
    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn params(&self) -> &TreeParams {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn depth(&self) -> usize {
        self.root.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Nodes visited from the root to the leaf that contains `x`.
    pub fn decision_path(&self, x: &[f64]) -> Result<Vec<&TreeNode>> {
        if x.len() != self.n_features {
            return Err(Error::ColumnCount {
                expected: self.n_features,
                found: x.len(),
            });
        }
        let mut path = vec![&self.root];
        let mut node = &self.root;
        while let Some(split) = &node.split {
            node = if x[split.feature] <= split.threshold {
                &split.left
            } else {
                &split.right
            };
            path.push(node);
        }
        Ok(path)
    }

    pub fn leaf(&self, x: &[f64]) -> Result<&TreeNode> {
        Ok(self.decision_path(x)?.pop().expect("path holds the root"))
    }

    /// Leaf label and the leaf's positive-class proportion.
    pub fn predict(&self, x: &[f64]) -> Result<(Label, f64)> {
        let leaf = self.leaf(x)?;
        Ok((leaf.label, leaf.score.positive))
    }
}

pub fn predict_tree(tree: &PrcTree, x: &[f64]) -> Result<(Label, f64)> {
    tree.predict(x)
}

/// Grows a tree on every row of `dataset`, sampling split features from `feature_pool`.
pub fn build_tree(
    dataset: &Dataset,
    feature_pool: &[usize],
    params: &TreeParams,
) -> Result<PrcTree> {
    let rows: Vec<usize> = (0..dataset.n_rows()).collect();
    build_tree_on_rows(dataset, rows, feature_pool, params)
}

/// Grows a tree on the given row multiset (bootstrap indices may repeat).
pub fn build_tree_on_rows(
    dataset: &Dataset,
    rows: Vec<usize>,
    feature_pool: &[usize],
    params: &TreeParams,
) -> Result<PrcTree> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut pool = feature_pool.to_vec();
    pool.sort_unstable();
    pool.dedup();
    if let Some(&bad) = pool.iter().find(|&&f| f >= dataset.n_features()) {
        return Err(Error::InvalidParameter(format!(
            "feature index {bad} out of range for {} features",
            dataset.n_features()
        )));
    }
    params.validate(pool.len())?;

    let builder = Builder {
        dataset,
        pool: &pool,
        params,
    };
    let root = builder.grow(rows, 1, derive_seed(params.rng_seed, 0));
    let n_leaves = root.iter().filter(|n| n.is_leaf()).count();
    Ok(PrcTree {
        root,
        params: *params,
        n_features: dataset.n_features(),
        n_leaves,
    })
}

struct Builder<'a> {
    dataset: &'a Dataset,
    pool: &'a [usize],
    params: &'a TreeParams,
}

impl Builder<'_> {
    /// `node_key` identifies the node by its path from the root and seeds its
    /// feature sample, so the tree does not depend on traversal order.
    fn grow(&self, rows: Vec<usize>, depth: usize, node_key: u64) -> TreeNode {
        let positives = rows
            .iter()
            .filter(|&&i| self.dataset.label(i).is_positive())
            .count();
        let negatives = rows.len() - positives;
        let score = NodeScore::from_counts(negatives, positives);
        let mut node = TreeNode {
            score,
            label: score.majority(),
            n_samples: rows.len(),
            depth,
            split: None,
        };

        let pure = positives == 0 || negatives == 0;
        if pure || depth >= self.params.max_depth || rows.len() < 2 * self.params.min_leaf_size {
            return node;
        }

        let mut rng = seed::rng(node_key);
        let mut features: Vec<usize> =
            index::sample(&mut rng, self.pool.len(), self.params.n_features_per_split)
                .into_iter()
                .map(|k| self.pool[k])
                .collect();
        features.sort_unstable();

        // A split leaving a child below the minimum size drops that feature and
        // the next best candidate is tried.
        let (candidate, left, right) = loop {
            let Ok(candidate) = prc::find_split(self.dataset, &rows, &features) else {
                return node;
            };
            let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| {
                self.dataset.value(i, candidate.feature_index) <= candidate.threshold
            });
            if left.len() < self.params.min_leaf_size || right.len() < self.params.min_leaf_size {
                if features.len() > 1 {
                    features.retain(|&f| f != candidate.feature_index);
                    continue;
                }
                return node;
            }
            break (candidate, left, right);
        };
        drop(rows);

        let left = self.grow(left, depth + 1, derive_seed(node_key, 1));
        let right = self.grow(right, depth + 1, derive_seed(node_key, 2));
        node.split = Some(Box::new(Split {
            feature: candidate.feature_index,
            threshold: candidate.threshold,
            auprc: candidate.auprc,
            f1: candidate.f1,
            left,
            right,
        }));
        node
    }
}

/// Serialized node, listed in pre-order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub depth: usize,
    pub score: [f64; 2],
    pub label: Label,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub feature: String,
    pub feature_index: usize,
    pub threshold: f64,
    pub auprc: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeRecord {
    pub schema_version: u32,
    pub params: TreeParams,
    pub n_features: usize,
    pub nodes: Vec<NodeRecord>,
}

impl PrcTree {
    pub fn to_record(&self, feature_names: &[String]) -> Result<TreeRecord> {
        if feature_names.len() != self.n_features {
            return Err(Error::FeatureMismatch(format!(
                "{} names for a tree over {} features",
                feature_names.len(),
                self.n_features
            )));
        }
        let nodes = self
            .root
            .iter()
            .map(|node| NodeRecord {
                depth: node.depth,
                score: [node.score.negative, node.score.positive],
                label: node.label,
                n_samples: node.n_samples,
                split: node.split.as_ref().map(|s| SplitRecord {
                    feature: feature_names[s.feature].clone(),
                    feature_index: s.feature,
                    threshold: s.threshold,
                    auprc: s.auprc,
                    f1: s.f1,
                }),
            })
            .collect();
        Ok(TreeRecord {
            schema_version: SCHEMA_VERSION,
            params: self.params,
            n_features: self.n_features,
            nodes,
        })
    }

    pub fn from_record(record: &TreeRecord, feature_names: &[String]) -> Result<Self> {
        if record.schema_version != SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: record.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        if feature_names.len() != record.n_features {
            return Err(Error::FeatureMismatch(format!(
                "{} names for a tree over {} features",
                feature_names.len(),
                record.n_features
            )));
        }
        let mut nodes = record.nodes.iter();
        let root = rebuild(&mut nodes, feature_names)?;
        if nodes.next().is_some() {
            return Err(Error::FeatureMismatch(
                "trailing nodes after a complete tree".into(),
            ));
        }
        let n_leaves = root.iter().filter(|n| n.is_leaf()).count();
        Ok(PrcTree {
            root,
            params: record.params,
            n_features: record.n_features,
            n_leaves,
        })
    }

    pub fn to_json(&self, feature_names: &[String]) -> Result<String> {
        Ok(serde_json::to_string_pretty(
            &self.to_record(feature_names)?,
        )?)
    }

    pub fn from_json(json: &str, feature_names: &[String]) -> Result<Self> {
        Self::from_record(&serde_json::from_str(json)?, feature_names)
    }
}

fn rebuild<'a>(
    nodes: &mut impl Iterator<Item = &'a NodeRecord>,
    feature_names: &[String],
) -> Result<TreeNode> {
    let record = nodes
        .next()
        .ok_or_else(|| Error::FeatureMismatch("truncated node list".into()))?;
    let split = match &record.split {
        None => None,
        Some(s) => {
            if feature_names.get(s.feature_index) != Some(&s.feature) {
                return Err(Error::FeatureMismatch(format!(
                    "split on `{}` does not match column {}",
                    s.feature, s.feature_index
                )));
            }
            let left = rebuild(nodes, feature_names)?;
            let right = rebuild(nodes, feature_names)?;
            Some(Box::new(Split {
                feature: s.feature_index,
                threshold: s.threshold,
                auprc: s.auprc,
                f1: s.f1,
                left,
                right,
            }))
        }
    };
    Ok(TreeNode {
        score: NodeScore {
            negative: record.score[0],
            positive: record.score[1],
        },
        label: record.label,
        n_samples: record.n_samples,
        depth: record.depth,
        split,
    })
}
