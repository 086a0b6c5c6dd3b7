//! AdaBoost.R2 with linear loss over depth-limited trees.
//!
//! Each round fits a weighted tree, measures per-sample losses relative to
//! the worst residual, reweights samples by confidence, and stops early once
//! the weighted average loss reaches 0.5. Prediction is the weighted median
//! of the estimator outputs.

use crate::error::{Error, Result};
use crate::ml::tree::{fit_tree_on, AllFeatures, TreeModel, TreeParams};
use crate::ml::DesignMatrix;

#[derive(Debug, Clone, Copy)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
}

/// Fit the boosted ensemble. Returns the base trees and their voting
/// weights (log(1/beta) per round).
pub fn fit_adaboost_r2(x: &DesignMatrix, params: &BoostParams) -> Result<(Vec<TreeModel>, Vec<f64>)> {
    if params.n_estimators < 1 {
        return Err(Error::Parameter("need at least one estimator".into()));
    }
    x.validate()?;
    let n = x.rows.len();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
    };
    // Unit starting weights keep the first round identical to a plain tree
    // fit; the loss normalizes by the weight total instead.
    let mut weights = vec![1.0; n];
    let mut trees = Vec::new();
    let mut alphas = Vec::new();
    for _ in 0..params.n_estimators {
        let tree = fit_tree_on(x, &weights, (0..n).collect(), &tree_params, &mut AllFeatures);
        let errors: Vec<f64> = x
            .rows
            .iter()
            .zip(&x.labels)
            .map(|(row, y)| (tree.predict(row) - y).abs())
            .collect();
        let worst = errors.iter().cloned().fold(0.0f64, f64::max);
        if worst == 0.0 {
            // Perfect fit dominates the vote and ends the boosting.
            trees.push(tree);
            alphas.push(1.0);
            break;
        }
        let weight_total: f64 = weights.iter().sum();
        let avg_loss: f64 = weights
            .iter()
            .zip(&errors)
            .map(|(w, e)| w * (e / worst))
            .sum::<f64>()
            / weight_total;
        if avg_loss >= 0.5 {
            if trees.is_empty() {
                trees.push(tree);
                alphas.push(1.0);
            }
            break;
        }
        let beta = avg_loss / (1.0 - avg_loss);
        alphas.push((1.0 / beta).ln());
        for (w, e) in weights.iter_mut().zip(&errors) {
            *w *= beta.powf(1.0 - e / worst);
        }
        // Rescale to mean 1 so repeated beta powers cannot underflow.
        let mean: f64 = weights.iter().sum::<f64>() / n as f64;
        for w in &mut weights {
            *w /= mean;
        }
        trees.push(tree);
    }
    Ok((trees, alphas))
}

/// Weighted median of the estimator predictions: sort predictions, walk the
/// cumulative vote, and return the first prediction at or past half the
/// total.
pub fn boost_predict(trees: &[TreeModel], alphas: &[f64], x: &[f64]) -> f64 {
    let mut preds: Vec<(f64, f64)> = trees
        .iter()
        .zip(alphas)
        .map(|(t, &a)| (t.predict(x), a))
        .collect();
    preds.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half: f64 = alphas.iter().sum::<f64>() / 2.0;
    let mut cum = 0.0;
    for &(p, a) in &preds {
        cum += a;
        if cum >= half {
            return p;
        }
    }
    preds.last().map(|&(p, _)| p).unwrap_or(0.0)
}
