//! Regression trees and the bagged forest built on them.
//!
//! Splits are greedy: over every candidate (a midpoint between consecutive
//! distinct sorted values of a feature) the split with the largest reduction
//! of the weighted squared error wins, ties going to the lower feature index
//! and then the lower threshold. Leaves predict the (weighted) label mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ml::DesignMatrix;
use crate::stimulus::RngState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A fitted regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
}

impl TreeModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], at: usize) -> usize {
            match &nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

/// Fit a tree on the full data with uniform weights.
pub fn fit_tree(x: &DesignMatrix, params: &TreeParams) -> Result<TreeModel> {
    if params.min_leaf < 1 {
        return Err(Error::Parameter("min_leaf must be >= 1".into()));
    }
    x.validate()?;
    let weights = vec![1.0; x.rows.len()];
    let indices: Vec<usize> = (0..x.rows.len()).collect();
    Ok(grow(x, &weights, indices, params, &mut AllFeatures))
}

/// Fit a tree on selected rows with per-row weights (used by boosting and
/// bagging).
pub(crate) fn fit_tree_on(
    x: &DesignMatrix,
    weights: &[f64],
    indices: Vec<usize>,
    params: &TreeParams,
    chooser: &mut dyn FeatureChooser,
) -> TreeModel {
    grow(x, weights, indices, params, chooser)
}

/// Picks which features a node may split on.
pub(crate) trait FeatureChooser {
    fn choose(&mut self, p: usize) -> Vec<usize>;
}

pub(crate) struct AllFeatures;

impl FeatureChooser for AllFeatures {
    fn choose(&mut self, p: usize) -> Vec<usize> {
        (0..p).collect()
    }
}

/// Draws ceil(p/2) distinct features per split, in ascending order.
pub(crate) struct RandomSubset<'a> {
    pub rng: &'a mut RngState,
}

impl FeatureChooser for RandomSubset<'_> {
    fn choose(&mut self, p: usize) -> Vec<usize> {
        let take = p.div_ceil(2);
        let mut pool: Vec<usize> = (0..p).collect();
        for i in 0..take {
            let j = i + self.rng.next_below((p - i) as u64) as usize;
            pool.swap(i, j);
        }
        let mut chosen = pool[..take].to_vec();
        chosen.sort_unstable();
        chosen
    }
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn grow(
    x: &DesignMatrix,
    weights: &[f64],
    indices: Vec<usize>,
    params: &TreeParams,
    chooser: &mut dyn FeatureChooser,
) -> TreeModel {
    let mut nodes = Vec::new();
    grow_node(x, weights, indices, 0, params, chooser, &mut nodes);
    TreeModel { nodes }
}

fn weighted_stats(x: &DesignMatrix, weights: &[f64], indices: &[usize]) -> (f64, f64, f64) {
    let mut sw = 0.0;
    let mut swy = 0.0;
    let mut swyy = 0.0;
    for &i in indices {
        let w = weights[i];
        let y = x.labels[i];
        sw += w;
        swy += w * y;
        swyy += w * y * y;
    }
    (sw, swy, swyy)
}

fn sse(sw: f64, swy: f64, swyy: f64) -> f64 {
    if sw <= 0.0 {
        0.0
    } else {
        swyy - swy * swy / sw
    }
}

fn grow_node(
    x: &DesignMatrix,
    weights: &[f64],
    indices: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    chooser: &mut dyn FeatureChooser,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let (sw, swy, swyy) = weighted_stats(x, weights, &indices);
    let mean = if sw > 0.0 { swy / sw } else { 0.0 };
    let here = nodes.len();
    nodes.push(TreeNode::Leaf { value: mean });

    if depth >= params.max_depth
        || indices.len() < 2 * params.min_leaf
        || sse(sw, swy, swyy) <= 0.0
    {
        return here;
    }
    let best = match best_split(x, weights, &indices, sse(sw, swy, swyy), params, chooser) {
        Some(b) => b,
        None => return here,
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .into_iter()
        .partition(|&i| x.rows[i][best.feature] <= best.threshold);
    let left = grow_node(x, weights, left_idx, depth + 1, params, chooser, nodes);
    let right = grow_node(x, weights, right_idx, depth + 1, params, chooser, nodes);
    nodes[here] = TreeNode::Split {
        feature: best.feature,
        threshold: best.threshold,
        left,
        right,
    };
    here
}

fn best_split(
    x: &DesignMatrix,
    weights: &[f64],
    indices: &[usize],
    parent_sse: f64,
    params: &TreeParams,
    chooser: &mut dyn FeatureChooser,
) -> Option<SplitChoice> {
    let mut best: Option<SplitChoice> = None;
    for feature in chooser.choose(x.width()) {
        let mut order: Vec<usize> = indices.to_vec();
        order.sort_by(|&a, &b| x.rows[a][feature].total_cmp(&x.rows[b][feature]));
        // Right-side stats come from their own back-to-front accumulation
        // rather than subtraction from the totals: a pure side must score an
        // exact zero so that tied candidates tie-break deterministically.
        let n = order.len();
        let mut suffix = vec![(0.0f64, 0.0f64, 0.0f64); n + 1];
        for k in (0..n).rev() {
            let i = order[k];
            let w = weights[i];
            let y = x.labels[i];
            let (sw, swy, swyy) = suffix[k + 1];
            suffix[k] = (sw + w, swy + w * y, swyy + w * y * y);
        }
        let mut sw = 0.0;
        let mut swy = 0.0;
        let mut swyy = 0.0;
        for k in 0..n - 1 {
            let i = order[k];
            let w = weights[i];
            let y = x.labels[i];
            sw += w;
            swy += w * y;
            swyy += w * y * y;
            let v = x.rows[i][feature];
            let v_next = x.rows[order[k + 1]][feature];
            if v == v_next {
                continue;
            }
            let left_n = k + 1;
            let right_n = n - left_n;
            if left_n < params.min_leaf || right_n < params.min_leaf {
                continue;
            }
            let threshold = (v + v_next) / 2.0;
            let (rw, rwy, rwyy) = suffix[k + 1];
            let score = parent_sse - sse(sw, swy, swyy) - sse(rw, rwy, rwyy);
            // Strict improvement; first candidate wins ties because features
            // and thresholds are visited in ascending order.
            let better = match &best {
                None => score > 0.0,
                Some(b) => score > b.score,
            };
            if better {
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    score,
                });
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub feature_subset: bool,
}

/// Bagged forest: each tree fits a bootstrap resample (n draws with
/// replacement) with a random half of the features available per split.
/// Prediction is the mean over trees.
pub fn fit_forest(x: &DesignMatrix, params: &ForestParams, rng: &mut RngState) -> Result<Vec<TreeModel>> {
    if params.n_trees < 1 {
        return Err(Error::Parameter("forest needs at least one tree".into()));
    }
    x.validate()?;
    let n = x.rows.len();
    let weights = vec![1.0; n];
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
    };
    let mut trees = Vec::with_capacity(params.n_trees);
    for _ in 0..params.n_trees {
        let indices: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.next_below(n as u64) as usize).collect()
        } else {
            (0..n).collect()
        };
        let tree = if params.feature_subset {
            let mut chooser = RandomSubset { rng };
            fit_tree_on(x, &weights, indices, &tree_params, &mut chooser)
        } else {
            fit_tree_on(x, &weights, indices, &tree_params, &mut AllFeatures)
        };
        trees.push(tree);
    }
    Ok(trees)
}

pub fn forest_predict(trees: &[TreeModel], x: &[f64]) -> f64 {
    trees.iter().map(|t| t.predict(x)).sum::<f64>() / trees.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn matrix(rows: Vec<Vec<f64>>, labels: Vec<f64>) -> DesignMatrix {
        DesignMatrix { rows, labels }
    }

    #[test]
    fn depth_zero_predicts_mean() {
        let x = matrix(
            vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![1.0, 2.0, 3.0, 10.0],
        );
        let tree = fit_tree(&x, &TreeParams { max_depth: 0, min_leaf: 1 }).unwrap();
        for row in &x.rows {
            assert!((tree.predict(row) - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn step_function_splits_at_midpoint() {
        let x = matrix(
            vec![vec![2.0], vec![4.0], vec![6.0], vec![8.0]],
            vec![0.0, 0.0, 1.0, 1.0],
        );
        let tree = fit_tree(&x, &TreeParams { max_depth: 1, min_leaf: 1 }).unwrap();
        match &tree.nodes[0] {
            TreeNode::Split { feature, threshold, left, right } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 5.0);
                assert_eq!(tree.nodes[*left], TreeNode::Leaf { value: 0.0 });
                assert_eq!(tree.nodes[*right], TreeNode::Leaf { value: 1.0 });
            }
            other => panic!("expected split at root, got {other:?}"),
        }
    }

    /// Independent split search: enumerate every (feature, midpoint)
    /// candidate directly and grow the tree by the same greedy policy.
    /// Sides are summed over the feature-sorted order, left front-to-back
    /// and right back-to-front, matching the evaluator's arithmetic so that
    /// exactly tied candidates tie-break identically.
    fn oracle_tree(
        x: &DesignMatrix,
        indices: Vec<usize>,
        depth: usize,
        params: &TreeParams,
        nodes: &mut Vec<TreeNode>,
    ) -> usize {
        let naive_sse = |ys: &[f64]| {
            let s: f64 = ys.iter().sum();
            let ss: f64 = ys.iter().map(|y| y * y).sum();
            if ys.is_empty() { 0.0 } else { ss - s * s / ys.len() as f64 }
        };
        let naive_sse_rev = |ys: &[f64]| {
            let s: f64 = ys.iter().rev().sum();
            let ss: f64 = ys.iter().rev().map(|y| y * y).sum();
            if ys.is_empty() { 0.0 } else { ss - s * s / ys.len() as f64 }
        };
        let ys: Vec<f64> = indices.iter().map(|&i| x.labels[i]).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let parent = naive_sse(&ys);
        let here = nodes.len();
        nodes.push(TreeNode::Leaf { value: mean });
        if depth >= params.max_depth || indices.len() < 2 * params.min_leaf || parent <= 0.0 {
            return here;
        }
        let mut best: Option<(usize, f64, f64)> = None;
        for feature in 0..x.width() {
            let mut order = indices.clone();
            order.sort_by(|&a, &b| x.rows[a][feature].total_cmp(&x.rows[b][feature]));
            let sorted_ys: Vec<f64> = order.iter().map(|&i| x.labels[i]).collect();
            let mut vals: Vec<f64> = order.iter().map(|&i| x.rows[i][feature]).collect();
            vals.dedup();
            for pair in vals.windows(2) {
                let threshold = (pair[0] + pair[1]) / 2.0;
                let split_at = order
                    .iter()
                    .position(|&i| x.rows[i][feature] > threshold)
                    .unwrap();
                if split_at < params.min_leaf || order.len() - split_at < params.min_leaf {
                    continue;
                }
                let score = parent
                    - naive_sse(&sorted_ys[..split_at])
                    - naive_sse_rev(&sorted_ys[split_at..]);
                let better = match best {
                    None => score > 0.0,
                    Some((_, _, s)) => score > s,
                };
                if better {
                    best = Some((feature, threshold, score));
                }
            }
        }
        let (feature, threshold, _) = match best {
            Some(b) => b,
            None => return here,
        };
        let (li, ri): (Vec<usize>, Vec<usize>) =
            indices.into_iter().partition(|&i| x.rows[i][feature] <= threshold);
        let left = oracle_tree(x, li, depth + 1, params, nodes);
        let right = oracle_tree(x, ri, depth + 1, params, nodes);
        nodes[here] = TreeNode::Split { feature, threshold, left, right };
        here
    }

    fn trees_match(a: &[TreeNode], b: &[TreeNode]) -> bool {
        if a.len() != b.len() {
            return false;
        }
        a.iter().zip(b).all(|(x, y)| match (x, y) {
            (TreeNode::Leaf { value: v1 }, TreeNode::Leaf { value: v2 }) => {
                (v1 - v2).abs() < 1e-9
            }
            (
                TreeNode::Split { feature: f1, threshold: t1, left: l1, right: r1 },
                TreeNode::Split { feature: f2, threshold: t2, left: l2, right: r2 },
            ) => f1 == f2 && t1 == t2 && l1 == l2 && r1 == r2,
            _ => false,
        })
    }

    #[test]
    fn depth_two_trees_match_exhaustive_enumeration() {
        let mut rng = crate::stimulus::RngState::new(61);
        let params = TreeParams { max_depth: 2, min_leaf: 1 };
        for trial in 0..100 {
            let n = 3 + (rng.next_below(6) as usize); // 3..=8 rows
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..2).map(|_| rng.next_f64() * 10.0).collect())
                .collect();
            let labels: Vec<f64> = (0..n).map(|_| rng.next_f64() * 5.0).collect();
            let x = matrix(rows, labels);
            let tree = fit_tree(&x, &params).unwrap();
            let mut oracle_nodes = Vec::new();
            oracle_tree(&x, (0..n).collect(), 0, &params, &mut oracle_nodes);
            assert!(
                trees_match(&tree.nodes, &oracle_nodes),
                "trial {trial}: {:?} vs {:?}",
                tree.nodes,
                oracle_nodes
            );
        }
    }

    #[test]
    fn single_tree_forest_without_bagging_equals_tree() {
        let mut rng = crate::stimulus::RngState::new(71);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..3).map(|_| rng.next_f64() * 4.0).collect())
            .collect();
        let labels: Vec<f64> = rows.iter().map(|r| r[0] * 2.0 - r[1]).collect();
        let x = matrix(rows, labels);
        let tree = fit_tree(&x, &TreeParams { max_depth: 4, min_leaf: 1 }).unwrap();
        let params = ForestParams {
            n_trees: 1,
            max_depth: 4,
            min_leaf: 1,
            bootstrap: false,
            feature_subset: false,
        };
        let forest = fit_forest(&x, &params, &mut crate::stimulus::RngState::new(0)).unwrap();
        assert_eq!(forest[0], tree);
    }

    #[test]
    fn forest_is_deterministic_per_seed() {
        let mut rng = crate::stimulus::RngState::new(81);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..2).map(|_| rng.next_f64()).collect())
            .collect();
        let labels: Vec<f64> = rows.iter().map(|r| r[0] + r[1]).collect();
        let x = matrix(rows, labels);
        let params = ForestParams {
            n_trees: 5,
            max_depth: 3,
            min_leaf: 1,
            bootstrap: true,
            feature_subset: true,
        };
        let f1 = fit_forest(&x, &params, &mut crate::stimulus::RngState::new(9)).unwrap();
        let f2 = fit_forest(&x, &params, &mut crate::stimulus::RngState::new(9)).unwrap();
        assert_eq!(f1, f2);
    }

    proptest! {
        /// Tree and forest predictions are convex combinations of labels.
        #[test]
        fn predictions_stay_within_label_range(
            data in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0, -5.0f64..5.0), 4..40),
            query in proptest::collection::vec(-2.0f64..12.0, 2),
        ) {
            let rows: Vec<Vec<f64>> = data.iter().map(|&(a, b, _)| vec![a, b]).collect();
            let labels: Vec<f64> = data.iter().map(|&(_, _, y)| y).collect();
            let lo = labels.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = labels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let x = matrix(rows, labels);
            let tree = fit_tree(&x, &TreeParams { max_depth: 4, min_leaf: 1 }).unwrap();
            let p = tree.predict(&query);
            prop_assert!(p >= lo - 1e-9 && p <= hi + 1e-9);
            let forest = fit_forest(
                &x,
                &ForestParams { n_trees: 4, max_depth: 3, min_leaf: 1, bootstrap: true, feature_subset: true },
                &mut crate::stimulus::RngState::new(3),
            ).unwrap();
            let fp = forest_predict(&forest, &query);
            prop_assert!(fp >= lo - 1e-9 && fp <= hi + 1e-9);
        }
    }
}
