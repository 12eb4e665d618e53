//! Margin-diminishing noise: flip probability grows polynomially as the
//! reference classifier's top-two margin shrinks.

use rand::Rng;
use serde_json::json;

use crate::dataio::{LabelVector, NoiseManifest, NoiseModel, SoftLabelMatrix};
use crate::error::{Error, Result};
use crate::rng;

/// Parameters for [`apply_pmd`].
///
/// The flip probability of an example with top-two posterior margin m is
/// `scale * (1 - m)^order`.
#[derive(Debug, Clone)]
pub struct PmdParams {
    /// Overall flip scale c in (0, 1].
    pub scale: f64,
    /// Polynomial order t >= 1.
    pub order: u32,
    /// Reference-classifier posteriors, one row per example.
    pub posteriors: SoftLabelMatrix,
    pub seed: u64,
}

/// Top and second classes of a posterior row, ties broken by lowest index.
pub(crate) fn top_two(row: &[f64]) -> (usize, usize) {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    let mut second = usize::MAX;
    for (j, &v) in row.iter().enumerate() {
        if j == best {
            continue;
        }
        if second == usize::MAX || v > row[second] {
            second = j;
        }
    }
    (best, second)
}

/// Applies margin-diminishing noise.
///
/// A flipped example takes the second-most-likely class when its current
/// label is the most likely one, and the most likely class otherwise.
pub fn apply_pmd(labels: &LabelVector, params: &PmdParams) -> Result<(LabelVector, NoiseManifest)> {
    if !(params.scale > 0.0 && params.scale <= 1.0) {
        return Err(Error::Argument(format!(
            "scale {} outside (0, 1]",
            params.scale
        )));
    }
    if params.order < 1 {
        return Err(Error::Argument(
            "polynomial order must be at least 1".into(),
        ));
    }
    if params.posteriors.rows() != labels.len() {
        return Err(Error::Argument(format!(
            "posteriors have {} rows but labels have {}",
            params.posteriors.rows(),
            labels.len()
        )));
    }
    if params.posteriors.cols() != labels.num_classes() {
        return Err(Error::Argument(format!(
            "posteriors have {} classes but labels have {}",
            params.posteriors.cols(),
            labels.num_classes()
        )));
    }

    let noisy: Vec<usize> = labels
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let row = params.posteriors.row(i);
            let (best, second) = top_two(row);
            let margin = row[best] - row[second];
            let tau = flip_probability(params.scale, params.order, margin);
            let mut r = rng::stream(params.seed, i as u64);
            if r.random_bool(tau) {
                if y == best {
                    second
                } else {
                    best
                }
            } else {
                y
            }
        })
        .collect();

    let flips = super::collect_flips(labels.as_slice(), &noisy);
    let mut manifest_params = serde_json::Map::new();
    manifest_params.insert("scale".into(), json!(params.scale));
    manifest_params.insert("order".into(), json!(params.order));
    let manifest = NoiseManifest::new(
        NoiseModel::Pmd,
        manifest_params,
        params.seed,
        None,
        labels.len(),
        flips,
    );
    Ok((LabelVector::new(noisy, labels.num_classes())?, manifest))
}

/// τ(margin) = scale · (1 − margin)^order, clamped into [0, 1].
pub fn flip_probability(scale: f64, order: u32, margin: f64) -> f64 {
    (scale * (1.0 - margin).powi(order as i32)).clamp(0.0, 1.0)
}
