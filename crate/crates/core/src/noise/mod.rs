//! Label-noising models: uniform, class-dependent, margin-based (PMD) and
//! cluster-based (CBN), plus rate measurement, transition estimation, and
//! CBN radius calibration.
//!
//! All models draw per-example randomness from `(seed, example_index)`
//! streams, so output is identical whether examples are processed serially
//! or in parallel.

mod cbn;
mod pmd;

pub use cbn::{apply_cbn, calibrate_cbn, CbnParams};
pub use pmd::{apply_pmd, PmdParams};

use rand::Rng;

use crate::dataio::{LabelVector, NoiseManifest, NoiseModel};
use crate::error::{Error, Result};
use crate::rng;

/// C×C row-stochastic matrix; entry (y, y') is the probability of y → y'.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    num_classes: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let c = rows.len();
        if c < 2 {
            return Err(Error::Data(format!(
                "transition matrix needs at least 2 classes, got {c}"
            )));
        }
        let mut data = Vec::with_capacity(c * c);
        for (y, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::Data(format!(
                    "transition row {y} has length {}, expected {c}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Data(format!(
                    "transition entry ({y}, {j}) = {} outside [0, 1]",
                    row[j]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Data(format!(
                    "transition row {y} sums to {sum}, expected 1"
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            num_classes: c,
            data,
        })
    }

    pub fn identity(num_classes: usize) -> Self {
        let mut data = vec![0.0; num_classes * num_classes];
        for y in 0..num_classes {
            data[y * num_classes + y] = 1.0;
        }
        Self { num_classes, data }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn get(&self, y: usize, y2: usize) -> f64 {
        self.data[y * self.num_classes + y2]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.num_classes..(y + 1) * self.num_classes]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data
            .chunks(self.num_classes)
            .map(<[f64]>::to_vec)
            .collect()
    }
}

pub(crate) fn collect_flips(original: &[usize], noisy: &[usize]) -> Vec<usize> {
    original
        .iter()
        .zip(noisy)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| i)
        .collect()
}

/// Flips each label independently with probability `rate`; a flipped label is
/// redrawn uniformly from the other C−1 classes.
pub fn apply_uniform(
    labels: &LabelVector,
    rate: f64,
    seed: u64,
) -> Result<(LabelVector, NoiseManifest)> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Argument(format!("rate {rate} outside [0, 1]")));
    }
    let c = labels.num_classes();
    let noisy: Vec<usize> = labels
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut r = rng::stream(seed, i as u64);
            if r.random_bool(rate) {
                let draw = r.random_range(0..c - 1);
                if draw >= y {
                    draw + 1
                } else {
                    draw
                }
            } else {
                y
            }
        })
        .collect();

    let flips = collect_flips(labels.as_slice(), &noisy);
    let mut params = serde_json::Map::new();
    params.insert("rate".into(), serde_json::json!(rate));
    let manifest = NoiseManifest::new(
        NoiseModel::Uniform,
        params,
        seed,
        Some(rate),
        labels.len(),
        flips,
    );
    Ok((LabelVector::new(noisy, c)?, manifest))
}

/// Resamples each label from the transition row of its current class.
pub fn apply_class_dependent(
    labels: &LabelVector,
    transition: &TransitionMatrix,
    seed: u64,
) -> Result<(LabelVector, NoiseManifest)> {
    let c = labels.num_classes();
    if transition.num_classes() != c {
        return Err(Error::Argument(format!(
            "transition matrix is {}x{} but labels have {c} classes",
            transition.num_classes(),
            transition.num_classes()
        )));
    }
    let noisy: Vec<usize> = labels
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut r = rng::stream(seed, i as u64);
            let u: f64 = r.random();
            let mut acc = 0.0;
            let row = transition.row(y);
            for (y2, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    return y2;
                }
            }
            c - 1 // absorb rounding slack in the last class
        })
        .collect();

    let flips = collect_flips(labels.as_slice(), &noisy);
    let mut params = serde_json::Map::new();
    params.insert("transition".into(), serde_json::json!(transition.rows()));
    let manifest = NoiseManifest::new(
        NoiseModel::ClassDependent,
        params,
        seed,
        None,
        labels.len(),
        flips,
    );
    Ok((LabelVector::new(noisy, c)?, manifest))
}

/// Empirical transition matrix: T[y][y'] = #(clean=y ∧ noisy=y') / #(clean=y).
pub fn estimate_transition(clean: &LabelVector, noisy: &LabelVector) -> Result<TransitionMatrix> {
    if clean.len() != noisy.len() {
        return Err(Error::Argument(format!(
            "label vectors have different lengths: {} vs {}",
            clean.len(),
            noisy.len()
        )));
    }
    if clean.num_classes() != noisy.num_classes() {
        return Err(Error::Argument(
            "label vectors disagree on the class count".into(),
        ));
    }
    let c = clean.num_classes();
    let mut counts = vec![0usize; c * c];
    let mut totals = vec![0usize; c];
    for (&a, &b) in clean.as_slice().iter().zip(noisy.as_slice()) {
        counts[a * c + b] += 1;
        totals[a] += 1;
    }
    if let Some(missing) = totals.iter().position(|&t| t == 0) {
        return Err(Error::Estimation { class: missing });
    }
    let rows: Vec<Vec<f64>> = (0..c)
        .map(|y| {
            (0..c)
                .map(|y2| counts[y * c + y2] as f64 / totals[y] as f64)
                .collect()
        })
        .collect();
    TransitionMatrix::new(rows)
}

/// Fraction of positions where the two label vectors differ.
pub fn measure_rate(clean: &LabelVector, noisy: &LabelVector) -> Result<f64> {
    if clean.len() != noisy.len() {
        return Err(Error::Argument(format!(
            "label vectors have different lengths: {} vs {}",
            clean.len(),
            noisy.len()
        )));
    }
    let differing = clean
        .as_slice()
        .iter()
        .zip(noisy.as_slice())
        .filter(|(a, b)| a != b)
        .count();
    Ok(differing as f64 / clean.len() as f64)
}
