//! Cheap learners standing in for deep networks: a deterministic k-NN
//! classifier and a multinomial logistic regression trained by SGD.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataio::{EmbeddingMatrix, LabelVector, ModelRecord, PredictionRecordSet};
use crate::error::{Error, Result};
use crate::neighbors::squared_euclidean;
use crate::rng;

use super::SubsetPlan;

/// Learning algorithm trained once per subset.
#[derive(Debug, Clone, PartialEq)]
pub enum Learner {
    /// Majority vote over the k nearest training points (euclidean metric,
    /// ties broken by ascending distance-then-index, then lowest class).
    KnnClassifier { k: usize },
    /// Multinomial logistic regression trained by per-example SGD.
    LogisticRegression {
        epochs: usize,
        learning_rate: f64,
        l2: f64,
        seed: u64,
    },
}

impl Learner {
    fn validate(&self) -> Result<()> {
        match self {
            Learner::KnnClassifier { k } if *k == 0 => {
                Err(Error::Argument("knn classifier needs k >= 1".into()))
            }
            Learner::LogisticRegression { epochs, .. } if *epochs == 0 => Err(Error::Argument(
                "logistic regression needs epochs >= 1".into(),
            )),
            Learner::LogisticRegression { learning_rate, .. } if *learning_rate <= 0.0 => {
                Err(Error::Argument("learning rate must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Majority-vote k-NN prediction for `data[query]` over `train` indices.
pub fn knn_predict(
    data: &EmbeddingMatrix,
    labels: &LabelVector,
    train: &[usize],
    k: usize,
    query: usize,
) -> usize {
    let k = k.min(train.len());
    let q = data.row(query);
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for &i in train {
        let d = squared_euclidean(q, data.row(i));
        let entry = (d, i);
        let pos = best.partition_point(|e| (e.0, e.1) < (entry.0, entry.1));
        if pos < k {
            best.insert(pos, entry);
            best.truncate(k);
        }
    }
    let mut votes = vec![0usize; labels.num_classes()];
    for &(_, i) in &best {
        votes[labels.get(i)] += 1;
    }
    // Lowest class index wins ties.
    let mut winner = 0;
    for (c, &v) in votes.iter().enumerate() {
        if v > votes[winner] {
            winner = c;
        }
    }
    winner
}

/// Softmax regression model: per-class weights plus bias.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    num_classes: usize,
    num_features: usize,
    /// Row-major (C × (d + 1)); the final column is the bias.
    weights: Vec<f64>,
}

impl LogisticModel {
    /// Trains with per-example SGD over `train` indices, shuffled each epoch.
    #[allow(clippy::too_many_arguments)]
    pub fn fit(
        data: &EmbeddingMatrix,
        labels: &LabelVector,
        train: &[usize],
        epochs: usize,
        learning_rate: f64,
        l2: f64,
        rng: &mut ChaCha8Rng,
        model_id: &str,
    ) -> Result<Self> {
        let d = data.cols();
        let c = labels.num_classes();
        let mut model = Self {
            num_classes: c,
            num_features: d,
            weights: vec![0.0; c * (d + 1)],
        };
        let mut order: Vec<usize> = train.to_vec();
        let mut probs = vec![0.0; c];

        for epoch in 0..epochs {
            order.shuffle(rng);
            let mut loss = 0.0;
            for &i in &order {
                let x = data.row(i);
                let y = labels.get(i);
                model.posterior_into(x, &mut probs);
                // A vanished or NaN posterior for the true class marks
                // divergence; f64::max would silently absorb the NaN.
                loss -= probs[y].ln();

                for (class, &p) in probs.iter().enumerate() {
                    let err = p - f64::from(u8::from(class == y));
                    let row = &mut model.weights[class * (d + 1)..(class + 1) * (d + 1)];
                    for (w, &xv) in row[..d].iter_mut().zip(x) {
                        *w -= learning_rate * (err * xv + l2 * *w);
                    }
                    row[d] -= learning_rate * err;
                }
            }
            if !loss.is_finite() {
                return Err(Error::Learner {
                    model_id: model_id.to_string(),
                    reason: format!("loss diverged to {loss} in epoch {epoch}"),
                });
            }
        }
        Ok(model)
    }

    fn posterior_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.num_features;
        for (class, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[class * (d + 1)..(class + 1) * (d + 1)];
            let mut z = row[d];
            for (w, &xv) in row[..d].iter().zip(x) {
                z += w * xv;
            }
            *slot = z;
        }
        let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in out.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in out.iter_mut() {
            *v /= sum;
        }
    }

    /// Class posteriors for a feature vector.
    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_classes];
        self.posterior_into(x, &mut out);
        out
    }

    /// Argmax class, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        let probs = self.predict_proba(x);
        let mut best = 0;
        for (c, &p) in probs.iter().enumerate().skip(1) {
            if p > probs[best] {
                best = c;
            }
        }
        best
    }
}

/// Trains one model per subset mask and records predictions for every heldout
/// example. Models run in parallel; per-model seeds derive from
/// `(learner seed, model index)` so output is order-independent.
pub fn run_learners(
    data: &EmbeddingMatrix,
    noisy_labels: &LabelVector,
    plan: &SubsetPlan,
    learner: &Learner,
) -> Result<PredictionRecordSet> {
    learner.validate()?;
    let n = data.rows();
    if noisy_labels.len() != n {
        return Err(Error::Argument(format!(
            "embeddings have {n} rows but labels have {}",
            noisy_labels.len()
        )));
    }
    if let Some(&bad) = plan.heldout_indices().iter().find(|&&i| i >= n) {
        return Err(Error::Argument(format!(
            "heldout index {bad} outside dataset of {n} examples"
        )));
    }

    let heldout = plan.heldout_indices();
    let results: Vec<Result<ModelRecord>> = plan
        .masks()
        .par_iter()
        .enumerate()
        .map(|(model_idx, mask)| {
            let model_id = format!("m{model_idx:05}");
            let excluded: std::collections::HashSet<usize> = heldout
                .iter()
                .zip(mask)
                .filter(|(_, &included)| !included)
                .map(|(&i, _)| i)
                .collect();
            let train: Vec<usize> = (0..n).filter(|i| !excluded.contains(i)).collect();

            let predictions = match learner {
                Learner::KnnClassifier { k } => heldout
                    .iter()
                    .map(|&i| knn_predict(data, noisy_labels, &train, *k, i))
                    .collect(),
                Learner::LogisticRegression {
                    epochs,
                    learning_rate,
                    l2,
                    seed,
                } => {
                    let mut model_rng = rng::stream(*seed, model_idx as u64);
                    let model = LogisticModel::fit(
                        data,
                        noisy_labels,
                        &train,
                        *epochs,
                        *learning_rate,
                        *l2,
                        &mut model_rng,
                        &model_id,
                    )?;
                    heldout
                        .iter()
                        .map(|&i| model.predict(data.row(i)))
                        .collect()
                }
            };

            Ok(ModelRecord {
                model_id,
                inclusion_mask: mask.clone(),
                predictions,
            })
        })
        .collect();

    let mut set = PredictionRecordSet::new(heldout.to_vec(), noisy_labels.num_classes())?;
    for record in results {
        set.push(record?)?;
    }
    Ok(set)
}
