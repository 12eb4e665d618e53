//! Validated in-memory forms of every on-disk artifact.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense n×d row-major matrix of per-example feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Builds a matrix, rejecting empty shapes and non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Data(format!(
                "embedding matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Data(format!(
                "embedding data length {} does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite value at row {}, col {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Convenience constructor from per-row slices.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Data("ragged rows in embedding matrix".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Length-n vector of class indices in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Data("label vector must be non-empty".into()));
        }
        if num_classes < 2 {
            return Err(Error::Data(format!(
                "num_classes must be at least 2, got {num_classes}"
            )));
        }
        if let Some(pos) = labels.iter().position(|&l| l >= num_classes) {
            return Err(Error::Data(format!(
                "label {} at position {pos} outside [0, {num_classes})",
                labels[pos]
            )));
        }
        Ok(Self {
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
}

/// n×C row-stochastic matrix of per-example label probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabelMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Row-sum slack for freshly constructed soft labels.
pub const SOFT_LABEL_ROW_SUM_TOL: f64 = 1e-9;

impl SoftLabelMatrix {
    /// Builds a soft-label matrix enforcing entries in `[0,1]` and unit row
    /// sums within [`SOFT_LABEL_ROW_SUM_TOL`].
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::with_row_sum_tolerance(rows, cols, data, SOFT_LABEL_ROW_SUM_TOL)
    }

    /// Same as [`SoftLabelMatrix::new`] with an explicit row-sum tolerance.
    /// Readers of float32 files use a wider tolerance because quantizing a
    /// normalized f64 row to f32 perturbs its sum by up to ~C·2^-24.
    pub fn with_row_sum_tolerance(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        tol: f64,
    ) -> Result<Self> {
        if rows == 0 || cols < 2 {
            return Err(Error::Data(format!(
                "soft labels need at least 1 row and 2 classes, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Data(format!(
                "soft label data length {} does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        for (i, row) in data.chunks(cols).enumerate() {
            if let Some(j) = row.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Data(format!(
                    "soft label entry {} at row {i}, col {j} outside [0, 1]",
                    row[j]
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(Error::Data(format!(
                    "soft label row {i} sums to {sum}, expected 1 within {tol}"
                )));
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Which noising model produced a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    Uniform,
    ClassDependent,
    Pmd,
    Cbn,
}

/// Full provenance record of a noising run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseManifest {
    pub noise_model: NoiseModel,
    /// Model-specific parameters (for CBN this includes the drawn centroids).
    pub params: serde_json::Map<String, serde_json::Value>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_rate: Option<f64>,
    pub achieved_rate: f64,
    pub num_examples: usize,
    pub flipped_indices: Vec<usize>,
    /// Digests of the input files, keyed by role (filled in by callers that
    /// know the files; library-level noising leaves this empty).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub source_digests: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_digest: Option<String>,
}

impl NoiseManifest {
    /// Assembles a manifest from a flip list, computing the achieved rate.
    pub fn new(
        noise_model: NoiseModel,
        params: serde_json::Map<String, serde_json::Value>,
        seed: u64,
        target_rate: Option<f64>,
        num_examples: usize,
        flipped_indices: Vec<usize>,
    ) -> Self {
        let achieved_rate = flipped_indices.len() as f64 / num_examples as f64;
        Self {
            noise_model,
            params,
            seed,
            target_rate,
            achieved_rate,
            num_examples,
            flipped_indices,
            source_digests: BTreeMap::new(),
            output_digest: None,
        }
    }

    /// Checks internal consistency: sorted in-range flips and a matching rate.
    pub fn validate(&self) -> Result<()> {
        if self.num_examples == 0 {
            return Err(Error::Data("manifest num_examples must be positive".into()));
        }
        for w in self.flipped_indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Data(
                    "manifest flipped_indices must be strictly increasing".into(),
                ));
            }
        }
        if let Some(&last) = self.flipped_indices.last() {
            if last >= self.num_examples {
                return Err(Error::Data(format!(
                    "manifest flip index {last} outside [0, {})",
                    self.num_examples
                )));
            }
        }
        let expected = self.flipped_indices.len() as f64 / self.num_examples as f64;
        if (self.achieved_rate - expected).abs() > 1e-12 {
            return Err(Error::Data(format!(
                "manifest achieved_rate {} does not equal |flips|/n = {expected}",
                self.achieved_rate
            )));
        }
        Ok(())
    }
}

/// One model's predictions over the heldout set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelRecord {
    pub model_id: String,
    /// Whether each heldout example was included in this model's training set.
    pub inclusion_mask: Vec<bool>,
    /// Predicted class for every heldout example, included or not.
    pub predictions: Vec<usize>,
}

/// Predictions of many subset-trained models over a shared heldout set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecordSet {
    heldout_indices: Vec<usize>,
    num_classes: usize,
    records: Vec<ModelRecord>,
    seen_ids: HashSet<String>,
}

impl PredictionRecordSet {
    pub fn new(heldout_indices: Vec<usize>, num_classes: usize) -> Result<Self> {
        if heldout_indices.is_empty() {
            return Err(Error::Data("heldout index list must be non-empty".into()));
        }
        for w in heldout_indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Data(
                    "heldout indices must be strictly increasing".into(),
                ));
            }
        }
        if num_classes < 2 {
            return Err(Error::Data(format!(
                "num_classes must be at least 2, got {num_classes}"
            )));
        }
        Ok(Self {
            heldout_indices,
            num_classes,
            records: Vec::new(),
            seen_ids: HashSet::new(),
        })
    }

    /// Appends one model's record, enforcing shared length and unique id.
    pub fn push(&mut self, record: ModelRecord) -> Result<()> {
        let h = self.heldout_indices.len();
        if record.inclusion_mask.len() != h {
            return Err(Error::Data(format!(
                "inclusion mask of {} has length {}, expected {h}",
                record.model_id,
                record.inclusion_mask.len()
            )));
        }
        if record.predictions.len() != h {
            return Err(Error::Data(format!(
                "predictions of {} have length {}, expected {h}",
                record.model_id,
                record.predictions.len()
            )));
        }
        if let Some(&bad) = record.predictions.iter().find(|&&p| p >= self.num_classes) {
            return Err(Error::Data(format!(
                "prediction {bad} of {} outside [0, {})",
                record.model_id, self.num_classes
            )));
        }
        if !self.seen_ids.insert(record.model_id.clone()) {
            return Err(Error::Duplicate(record.model_id));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn heldout_indices(&self) -> &[usize] {
        &self.heldout_indices
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn heldout_len(&self) -> usize {
        self.heldout_indices.len()
    }

    pub fn records(&self) -> &[ModelRecord] {
        &self.records
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_rejects_nan() {
        let err = EmbeddingMatrix::new(1, 2, vec![0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn embedding_rejects_empty() {
        assert!(EmbeddingMatrix::new(0, 2, vec![]).is_err());
        assert!(EmbeddingMatrix::new(2, 0, vec![]).is_err());
    }

    #[test]
    fn labels_reject_out_of_range() {
        let err = LabelVector::new(vec![0, 3], 3).unwrap_err();
        assert!(err.to_string().contains("outside"));
        assert!(LabelVector::new(vec![0], 1).is_err());
        assert!(LabelVector::new(vec![], 2).is_err());
    }

    #[test]
    fn soft_labels_enforce_row_sums() {
        let ok = SoftLabelMatrix::new(1, 2, vec![0.4, 0.6]);
        assert!(ok.is_ok());
        let err = SoftLabelMatrix::new(1, 2, vec![0.4, 0.58]).unwrap_err();
        assert!(err.to_string().contains("row 0"));
    }

    #[test]
    fn manifest_rate_consistency() {
        let m = NoiseManifest::new(
            NoiseModel::Uniform,
            serde_json::Map::new(),
            1,
            None,
            10,
            vec![2, 5],
        );
        assert_eq!(m.achieved_rate, 0.2);
        m.validate().unwrap();

        let mut bad = m.clone();
        bad.flipped_indices = vec![5, 2];
        assert!(bad.validate().is_err());
    }

    #[test]
    fn record_set_rejects_duplicates_and_bad_lengths() {
        let mut set = PredictionRecordSet::new(vec![0, 1, 2], 2).unwrap();
        set.push(ModelRecord {
            model_id: "m0".into(),
            inclusion_mask: vec![true, false, true],
            predictions: vec![0, 1, 0],
        })
        .unwrap();

        let dup = set.push(ModelRecord {
            model_id: "m0".into(),
            inclusion_mask: vec![true, true, true],
            predictions: vec![0, 0, 0],
        });
        assert!(matches!(dup, Err(Error::Duplicate(_))));

        let short = set.push(ModelRecord {
            model_id: "m1".into(),
            inclusion_mask: vec![true, false],
            predictions: vec![0, 1],
        });
        assert!(short.is_err());
    }
}
