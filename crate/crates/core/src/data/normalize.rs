use serde::{Deserialize, Serialize};

use super::InstanceTable;
use crate::error::{Error, Result};

/// Z-score statistics fitted on the training split.
///
/// `std` is the population standard deviation. Features whose training
/// spread is zero are listed in `dropped` and removed from every split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub dropped: Vec<usize>,
}

impl NormStats {
    pub fn kept(&self) -> Vec<usize> {
        (0..self.mean.len())
            .filter(|i| self.dropped.binary_search(i).is_err())
            .collect()
    }
}

pub fn fit_normalizer(train: &InstanceTable) -> Result<NormStats> {
    if train.is_empty() {
        return Err(Error::TooFewRows(0));
    }
    let d = train.schema.features.len();
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for r in &train.rows {
        mean.iter_mut().zip(&r.features).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for r in &train.rows {
        for ((v, x), m) in var.iter_mut().zip(&r.features).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let std: Vec<f64> = var.iter().map(|v| (v / n).sqrt()).collect();
    let dropped = std
        .iter()
        .zip(&mean)
        .enumerate()
        .filter(|(_, (s, m))| **s <= 1e-12 * m.abs().max(1.0))
        .map(|(i, _)| i)
        .collect();
    Ok(NormStats {
        feature_names: train.schema.features.clone(),
        mean,
        std,
        dropped,
    })
}

/// `z = (x − μ) / s` on surviving features, using the given stats as-is.
pub fn apply_normalizer(table: &InstanceTable, stats: &NormStats) -> Result<InstanceTable> {
    if table.schema.features != stats.feature_names {
        return Err(Error::SchemaMismatch(
            "feature columns differ from the fitted normalizer".into(),
        ));
    }
    let kept = stats.kept();
    let mut out = table.clone();
    out.schema.features = kept.iter().map(|&i| stats.feature_names[i].clone()).collect();
    for r in &mut out.rows {
        r.features = kept
            .iter()
            .map(|&i| (r.features[i] - stats.mean[i]) / stats.std[i])
            .collect();
    }
    Ok(out)
}
