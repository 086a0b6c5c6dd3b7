//! Supervised regression suite: one model per coverbin, predicting that
//! bin's dependent stimulus field from the remaining fields plus the bin-hit
//! flag.

pub mod boost;
pub mod knn;
pub mod linear;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::dataprep::{BinAssignment, BinPrep, PreparedDataset};
use crate::error::{Error, Result};
use crate::stimulus::{derive_seed, RngState};

pub use boost::{boost_predict, fit_adaboost_r2, BoostParams};
pub use knn::{fit_knn, KnnModel};
pub use linear::{fit_lasso, fit_ols, fit_ridge, LinearCoef};
pub use tree::{fit_forest, fit_tree, forest_predict, ForestParams, TreeModel, TreeNode, TreeParams};

/// Name of the synthetic feature carrying the bin hit flag.
pub const HIT_FLAG_FEATURE: &str = "bin_hit";

/// The implemented regression algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoKind {
    Linear,
    Lasso,
    Ridge,
    Dt,
    Rf,
    AdaBoost,
    Knn,
}

impl AlgoKind {
    pub const ALL: [AlgoKind; 7] = [
        AlgoKind::Linear,
        AlgoKind::Lasso,
        AlgoKind::Ridge,
        AlgoKind::Dt,
        AlgoKind::Rf,
        AlgoKind::AdaBoost,
        AlgoKind::Knn,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            AlgoKind::Linear => "linear",
            AlgoKind::Lasso => "lasso",
            AlgoKind::Ridge => "ridge",
            AlgoKind::Dt => "dt",
            AlgoKind::Rf => "rf",
            AlgoKind::AdaBoost => "adaboost",
            AlgoKind::Knn => "knn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .find(|a| a.tag() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }

    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                return Ok(Self::ALL.to_vec());
            }
            let algo = Self::parse(part)?;
            if !out.contains(&algo) {
                out.push(algo);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("algorithm list is empty".into()));
        }
        Ok(out)
    }
}

/// Training hyperparameters; the defaults target the desk-scale datasets
/// this framework collects (hundreds to a few thousand rows).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Hyperparams {
    pub lambda: f64,
    pub knn_k: usize,
    pub tree_depth: usize,
    pub min_leaf: usize,
    pub forest_trees: usize,
    pub boost_estimators: usize,
    pub boost_depth: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            knn_k: 5,
            tree_depth: 6,
            min_leaf: 2,
            forest_trees: 20,
            boost_estimators: 20,
            boost_depth: 3,
        }
    }
}

/// Feature rows plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl DesignMatrix {
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows.is_empty() {
            return Err(Error::Data("design matrix has no rows".into()));
        }
        if self.labels.len() != self.rows.len() {
            return Err(Error::Data(format!(
                "label count {} does not match row count {}",
                self.labels.len(),
                self.rows.len()
            )));
        }
        let p = self.width();
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::Data(format!("row {i} has width {}, expected {p}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("row {i} contains a non-finite value")));
            }
        }
        if self.labels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("labels contain a non-finite value".into()));
        }
        Ok(())
    }
}

/// Algorithm-specific fitted parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Linear { weights: Vec<f64>, intercept: f64 },
    Knn(KnnModel),
    Tree(TreeModel),
    Forest { trees: Vec<TreeModel> },
    Boost { trees: Vec<TreeModel>, weights: Vec<f64> },
}

/// A fitted per-bin regressor with its training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub algorithm: AlgoKind,
    pub bin: String,
    pub dependent: String,
    /// Feature order used at fit time: independent fields, then the hit flag.
    pub features: Vec<String>,
    pub params: ModelParams,
}

impl TrainedModel {
    /// Pure prediction over a feature vector in `self.features` order.
    pub fn predict(&self, x: &[f64]) -> f64 {
        match &self.params {
            ModelParams::Linear { weights, intercept } => {
                intercept + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            }
            ModelParams::Knn(m) => m.predict(x),
            ModelParams::Tree(t) => t.predict(x),
            ModelParams::Forest { trees } => forest_predict(trees, x),
            ModelParams::Boost { trees, weights } => boost_predict(trees, weights, x),
        }
    }
}

/// Build the design matrix for one learnable bin: independent field columns
/// plus the hit flag as the final feature, labels from the dependent field.
pub fn design_matrix_for_bin(
    prepared: &PreparedDataset,
    assignment: &BinAssignment,
) -> Result<(DesignMatrix, Vec<String>)> {
    let ds = &prepared.dataset;
    let bin_idx = ds
        .bin_names
        .iter()
        .position(|b| b == &assignment.bin)
        .ok_or_else(|| Error::Config(format!("bin `{}` not in dataset", assignment.bin)))?;
    let mut feature_cols = Vec::new();
    let mut feature_names = Vec::new();
    for name in &assignment.independents {
        let fi = ds
            .field_names
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| Error::Config(format!("field `{name}` not in dataset")))?;
        feature_cols.push(ds.field_column(fi));
        feature_names.push(name.clone());
    }
    feature_cols.push(ds.flag_column(bin_idx));
    feature_names.push(HIT_FLAG_FEATURE.to_string());
    let labels = ds.field_column(assignment.dependent_index);
    let n = labels.len();
    let rows = (0..n)
        .map(|i| feature_cols.iter().map(|c| c[i]).collect())
        .collect();
    Ok((DesignMatrix { rows, labels }, feature_names))
}

/// Fit one model of the given kind on a per-bin design matrix.
pub fn fit_model(
    algo: AlgoKind,
    x: &DesignMatrix,
    hp: &Hyperparams,
    bin: &str,
) -> Result<ModelParams> {
    Ok(match algo {
        AlgoKind::Linear => {
            let c = fit_ols(x)?;
            ModelParams::Linear { weights: c.weights, intercept: c.intercept }
        }
        AlgoKind::Ridge => {
            let c = fit_ridge(x, hp.lambda)?;
            ModelParams::Linear { weights: c.weights, intercept: c.intercept }
        }
        AlgoKind::Lasso => {
            let c = fit_lasso(x, hp.lambda)?;
            ModelParams::Linear { weights: c.weights, intercept: c.intercept }
        }
        AlgoKind::Knn => ModelParams::Knn(fit_knn(x, hp.knn_k.min(x.rows.len()))?),
        AlgoKind::Dt => ModelParams::Tree(fit_tree(
            x,
            &TreeParams { max_depth: hp.tree_depth, min_leaf: hp.min_leaf },
        )?),
        AlgoKind::Rf => {
            let mut rng = RngState::new(derive_seed(0x5EED, &format!("rf:{bin}")));
            let trees = fit_forest(
                x,
                &ForestParams {
                    n_trees: hp.forest_trees,
                    max_depth: hp.tree_depth,
                    min_leaf: hp.min_leaf,
                    bootstrap: true,
                    feature_subset: true,
                },
                &mut rng,
            )?;
            ModelParams::Forest { trees }
        }
        AlgoKind::AdaBoost => {
            let (trees, weights) = fit_adaboost_r2(
                x,
                &BoostParams {
                    n_estimators: hp.boost_estimators,
                    max_depth: hp.boost_depth,
                    min_leaf: hp.min_leaf,
                },
            )?;
            ModelParams::Boost { trees, weights }
        }
    })
}

/// One bin's training outcome inside a model set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub bin: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<TrainedModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exclusion: Option<String>,
}

/// All per-bin models for one algorithm (`models_<algorithm>.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSet {
    pub algorithm: AlgoKind,
    pub entries: Vec<ModelEntry>,
}

impl ModelSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("model set: {e}")))
    }

    pub fn model_for(&self, bin: &str) -> Option<&TrainedModel> {
        self.entries
            .iter()
            .find(|e| e.bin == bin)
            .and_then(|e| e.model.as_ref())
    }
}

/// Train one model per learnable bin; excluded bins are carried through with
/// their exclusion reason.
pub fn train_per_bin(
    prepared: &PreparedDataset,
    algo: AlgoKind,
    hp: &Hyperparams,
) -> Result<ModelSet> {
    let mut entries = Vec::with_capacity(prepared.bins.len());
    for prep in &prepared.bins {
        match prep {
            BinPrep::Learnable(assignment) => {
                let (x, features) = design_matrix_for_bin(prepared, assignment)?;
                let params = fit_model(algo, &x, hp, &assignment.bin)?;
                entries.push(ModelEntry {
                    bin: assignment.bin.clone(),
                    model: Some(TrainedModel {
                        algorithm: algo,
                        bin: assignment.bin.clone(),
                        dependent: assignment.dependent.clone(),
                        features,
                        params,
                    }),
                    exclusion: None,
                });
            }
            BinPrep::Excluded { bin, reason } => entries.push(ModelEntry {
                bin: bin.clone(),
                model: None,
                exclusion: Some(reason.clone()),
            }),
        }
    }
    Ok(ModelSet {
        algorithm: algo,
        entries,
    })
}
