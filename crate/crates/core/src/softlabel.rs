//! Soft neighbor-sampled labels (SNLS) and the single-sample retrieval
//! variant.

use rand::Rng;
use rayon::prelude::*;

use crate::dataio::{EmbeddingMatrix, LabelVector, SoftLabelMatrix};
use crate::error::{Error, Result};
use crate::neighbors::{knn, Metric};
use crate::rng;

/// SNLS parameters: the neighborhood size and the trust placed in the given
/// label.
#[derive(Debug, Clone, Copy)]
pub struct SnlsConfig {
    pub k: usize,
    pub alpha: f64,
    pub metric: Metric,
}

impl Default for SnlsConfig {
    fn default() -> Self {
        Self {
            k: 100,
            alpha: 0.30,
            metric: Metric::CosineDistance,
        }
    }
}

/// Builds the soft label of every example as
/// `alpha · onehot(label) + (1 − alpha) · q`, where q is the label-frequency
/// distribution over the example's k nearest neighbors (self excluded).
pub fn snls(
    embeddings: &EmbeddingMatrix,
    noisy_labels: &LabelVector,
    config: &SnlsConfig,
) -> Result<SoftLabelMatrix> {
    let n = embeddings.rows();
    if noisy_labels.len() != n {
        return Err(Error::Argument(format!(
            "embeddings have {n} rows but labels have {}",
            noisy_labels.len()
        )));
    }
    if config.k == 0 || config.k >= n {
        return Err(Error::Argument(format!(
            "k = {} outside [1, {}]",
            config.k,
            n - 1
        )));
    }
    if !(0.0..=1.0).contains(&config.alpha) {
        return Err(Error::Argument(format!(
            "alpha {} outside [0, 1]",
            config.alpha
        )));
    }

    let c = noisy_labels.num_classes();
    let rows: Vec<Result<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let neighbors = knn(embeddings, i, config.k, config.metric, true)?;
            let mut row = vec![0.0; c];
            for j in neighbors.indices() {
                row[noisy_labels.get(j)] += 1.0;
            }
            let neighbor_weight = (1.0 - config.alpha) / config.k as f64;
            for value in &mut row {
                *value *= neighbor_weight;
            }
            row[noisy_labels.get(i)] += config.alpha;
            Ok(row)
        })
        .collect();

    let mut data = Vec::with_capacity(n * c);
    for row in rows {
        data.extend(row?);
    }
    SoftLabelMatrix::new(n, c, data)
}

/// Single-sample variant: each example takes the label of one uniformly
/// drawn member of its k-nearest neighborhood (self excluded).
pub fn lra_sample(
    embeddings: &EmbeddingMatrix,
    noisy_labels: &LabelVector,
    k: usize,
    metric: Metric,
    seed: u64,
) -> Result<LabelVector> {
    let n = embeddings.rows();
    if noisy_labels.len() != n {
        return Err(Error::Argument(format!(
            "embeddings have {n} rows but labels have {}",
            noisy_labels.len()
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::Argument(format!("k = {k} outside [1, {}]", n - 1)));
    }

    let sampled: Vec<Result<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let neighbors = knn(embeddings, i, k, metric, true)?;
            let mut r = rng::stream(seed, i as u64);
            let pick = r.random_range(0..k);
            Ok(noisy_labels.get(neighbors.entries[pick].0))
        })
        .collect();

    let labels = sampled.into_iter().collect::<Result<Vec<usize>>>()?;
    LabelVector::new(labels, noisy_labels.num_classes())
}
