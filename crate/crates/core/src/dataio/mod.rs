//! Reading and writing of every on-disk artifact.
//!
//! Tensors travel as NPY v1.0 (`<f4`/`<f8`, C-order), labels as LF-terminated
//! ASCII decimal lines, prediction records as JSON Lines, manifests as single
//! JSON documents. All writes are atomic: bytes land in a temp file in the
//! destination directory which is then renamed over the target.

mod npy;
mod types;

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::projection::Projection2D;

pub use types::{
    EmbeddingMatrix, LabelVector, ModelRecord, NoiseManifest, NoiseModel, PredictionRecordSet,
    SoftLabelMatrix, SOFT_LABEL_ROW_SUM_TOL,
};

use npy::NpyDtype;

/// Row-sum slack accepted when soft labels arrive quantized to f32.
const F32_ROW_SUM_TOL: f64 = 1e-4;

/// Writes bytes to a temp file in the destination directory, then renames it
/// over the target, so readers never observe a partial file.
pub fn write_bytes_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    write_bytes_atomic(path, bytes)
}

/// SHA-256 of a file's bytes, hex-encoded. Used for manifest provenance.
pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

fn check_finite(path: &Path, cols: usize, data: &[f64]) -> Result<()> {
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "{}: non-finite value at row {}, col {}",
            path.display(),
            pos / cols,
            pos % cols
        )));
    }
    Ok(())
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let arr = npy::read_npy_2d(path)?;
    check_finite(path, arr.cols, &arr.data)?;
    EmbeddingMatrix::new(arr.rows, arr.cols, arr.data)
}

pub fn write_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    let bytes = npy::to_npy_bytes(m.rows(), m.cols(), NpyDtype::F64, m.data());
    write_atomic(path.as_ref(), &bytes)
}

/// Reads one label per line, validating each against `[0, num_classes)`.
pub fn read_labels(path: impl AsRef<Path>, num_classes: usize) -> Result<LabelVector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let value: i64 = line.parse().map_err(|_| {
            Error::format(
                path,
                format!("line {}: {line:?} is not an integer", lineno + 1),
            )
        })?;
        if value < 0 || value as usize >= num_classes {
            return Err(Error::schema(
                path,
                format!(
                    "line {}: label {value} outside [0, {num_classes})",
                    lineno + 1
                ),
            ));
        }
        labels.push(value as usize);
    }
    if labels.is_empty() {
        return Err(Error::schema(path, "labels file is empty, need n >= 1"));
    }
    LabelVector::new(labels, num_classes)
}

pub fn write_labels(labels: &LabelVector, path: impl AsRef<Path>) -> Result<()> {
    let mut text = String::with_capacity(labels.len() * 3);
    for &l in labels.as_slice() {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    write_atomic(path.as_ref(), text.as_bytes())
}

pub fn read_soft_labels(path: impl AsRef<Path>) -> Result<SoftLabelMatrix> {
    let path = path.as_ref();
    let arr = npy::read_npy_2d(path)?;
    check_finite(path, arr.cols, &arr.data)?;
    let tol = match arr.dtype {
        NpyDtype::F32 => F32_ROW_SUM_TOL,
        NpyDtype::F64 => SOFT_LABEL_ROW_SUM_TOL,
    };
    SoftLabelMatrix::with_row_sum_tolerance(arr.rows, arr.cols, arr.data, tol)
}

/// Writes soft labels as `<f4`, the interchange dtype for probability tables.
pub fn write_soft_labels(m: &SoftLabelMatrix, path: impl AsRef<Path>) -> Result<()> {
    let bytes = npy::to_npy_bytes(m.rows(), m.cols(), NpyDtype::F32, m.data());
    write_atomic(path.as_ref(), &bytes)
}

pub fn read_projection(path: impl AsRef<Path>) -> Result<Projection2D> {
    let path = path.as_ref();
    let arr = npy::read_npy_2d(path)?;
    if arr.cols != 2 {
        return Err(Error::schema(
            path,
            format!("projection must have 2 columns, found {}", arr.cols),
        ));
    }
    check_finite(path, arr.cols, &arr.data)?;
    let points = arr.data.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    Projection2D::new(points)
}

/// Writes a projection as `<f4`, the interchange dtype for 2-D layouts.
pub fn write_projection(p: &Projection2D, path: impl AsRef<Path>) -> Result<()> {
    let flat: Vec<f64> = p.points().iter().flatten().copied().collect();
    let bytes = npy::to_npy_bytes(p.len(), 2, NpyDtype::F32, &flat);
    write_atomic(path.as_ref(), &bytes)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct RecordsHeader {
    heldout_indices: Vec<usize>,
    num_classes: usize,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct RecordLine {
    model_id: String,
    inclusion_mask: Vec<u8>,
    predictions: Vec<usize>,
}

pub fn read_prediction_records(path: impl AsRef<Path>) -> Result<PredictionRecordSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());

    let (_, header_line) = lines
        .next()
        .ok_or_else(|| Error::format(path, "missing header line"))?;
    let header: RecordsHeader = serde_json::from_str(header_line)
        .map_err(|e| Error::format(path, format!("bad header line: {e}")))?;
    let mut set = PredictionRecordSet::new(header.heldout_indices, header.num_classes)
        .map_err(|e| Error::schema(path, e.to_string()))?;

    for (lineno, line) in lines {
        let rec: RecordLine = serde_json::from_str(line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
        let mut mask = Vec::with_capacity(rec.inclusion_mask.len());
        for &bit in &rec.inclusion_mask {
            match bit {
                0 => mask.push(false),
                1 => mask.push(true),
                other => {
                    return Err(Error::schema(
                        path,
                        format!("line {}: mask bit {other} is not 0/1", lineno + 1),
                    ))
                }
            }
        }
        let record = ModelRecord {
            model_id: rec.model_id,
            inclusion_mask: mask,
            predictions: rec.predictions,
        };
        set.push(record).map_err(|e| match e {
            Error::Duplicate(id) => Error::Duplicate(id),
            other => Error::schema(path, format!("line {}: {other}", lineno + 1)),
        })?;
    }
    Ok(set)
}

pub fn write_prediction_records(set: &PredictionRecordSet, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    let header = RecordsHeader {
        heldout_indices: set.heldout_indices().to_vec(),
        num_classes: set.num_classes(),
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for rec in set.records() {
        let line = RecordLine {
            model_id: rec.model_id.clone(),
            inclusion_mask: rec.inclusion_mask.iter().map(|&b| b as u8).collect(),
            predictions: rec.predictions.clone(),
        };
        out.push_str(&serde_json::to_string(&line).expect("record serializes"));
        out.push('\n');
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<NoiseManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: NoiseManifest =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    manifest
        .validate()
        .map_err(|e| Error::schema(path, e.to_string()))?;
    Ok(manifest)
}

pub fn write_manifest(manifest: &NoiseManifest, path: impl AsRef<Path>) -> Result<()> {
    manifest.validate()?;
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(path.as_ref(), text.as_bytes())
}
