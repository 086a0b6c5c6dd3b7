//! K-nearest-neighbour regression over raw feature values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ml::DesignMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

/// Store the training set; prediction is the mean label of the k nearest
/// rows by Euclidean distance, distance ties broken by lower row index.
pub fn fit_knn(x: &DesignMatrix, k: usize) -> Result<KnnModel> {
    x.validate()?;
    if k < 1 || k > x.rows.len() {
        return Err(Error::Parameter(format!(
            "k must be in [1, {}], got {k}",
            x.rows.len()
        )));
    }
    Ok(KnnModel {
        k,
        points: x.rows.clone(),
        labels: x.labels.clone(),
    })
}

impl KnnModel {
    pub fn predict(&self, query: &[f64]) -> f64 {
        let mut order: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| (squared_distance(p, query), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order[..self.k]
            .iter()
            .map(|&(_, i)| self.labels[i])
            .sum::<f64>()
            / self.k as f64
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
