//! Synthetic isotropic-Gaussian blob datasets for demos and tests.

use rand_distr::{Distribution, Normal};

use crate::dataio::{EmbeddingMatrix, LabelVector};
use crate::error::{Error, Result};
use crate::rng;

/// One class blob: an isotropic Gaussian around `center`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBlob {
    pub center: Vec<f64>,
    pub std_dev: f64,
    pub count: usize,
}

/// Full dataset specification.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub classes: Vec<ClassBlob>,
    pub seed: u64,
}

/// Samples every blob, returning points (class blocks in spec order) and
/// labels equal to the generating class. Each class draws from its own
/// `(seed, class)` stream. A single-blob spec still yields a two-class label
/// space so downstream relabeling (e.g. by a decision boundary) stays valid.
pub fn gaussian_blobs(spec: &BlobSpec) -> Result<(EmbeddingMatrix, LabelVector)> {
    if spec.classes.is_empty() {
        return Err(Error::Argument("blob spec has no classes".into()));
    }
    let dim = spec.classes[0].center.len();
    if dim == 0 {
        return Err(Error::Argument(
            "blob centers need at least 1 dimension".into(),
        ));
    }
    for (y, blob) in spec.classes.iter().enumerate() {
        if blob.center.len() != dim {
            return Err(Error::Argument(format!(
                "class {y} center has {} dims, expected {dim}",
                blob.center.len()
            )));
        }
        if blob.count == 0 {
            return Err(Error::Argument(format!("class {y} has count 0")));
        }
        if blob.std_dev.is_nan() || blob.std_dev <= 0.0 {
            return Err(Error::Argument(format!(
                "class {y} std_dev {} must be positive",
                blob.std_dev
            )));
        }
    }

    let total: usize = spec.classes.iter().map(|b| b.count).sum();
    let mut data = Vec::with_capacity(total * dim);
    let mut labels = Vec::with_capacity(total);
    for (y, blob) in spec.classes.iter().enumerate() {
        let mut r = rng::stream(spec.seed, y as u64);
        let normal = Normal::new(0.0, blob.std_dev).expect("validated std_dev");
        for _ in 0..blob.count {
            for &c in &blob.center {
                data.push(c + normal.sample(&mut r));
            }
            labels.push(y);
        }
    }

    let num_classes = spec.classes.len().max(2);
    Ok((
        EmbeddingMatrix::new(total, dim, data)?,
        LabelVector::new(labels, num_classes)?,
    ))
}

/// Binary labels from a vertical decision boundary: 1 where the first
/// coordinate exceeds `boundary`, else 0.
pub fn label_by_vertical_boundary(points: &EmbeddingMatrix, boundary: f64) -> LabelVector {
    let labels = (0..points.rows())
        .map(|i| usize::from(points.get(i, 0) > boundary))
        .collect();
    LabelVector::new(labels, 2).expect("points matrix is non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64) -> BlobSpec {
        BlobSpec {
            classes: vec![
                ClassBlob {
                    center: vec![0.0, 0.0, 0.0],
                    std_dev: 1.0,
                    count: 500,
                },
                ClassBlob {
                    center: vec![5.0, -2.0, 1.0],
                    std_dev: 1.0,
                    count: 500,
                },
            ],
            seed,
        }
    }

    #[test]
    fn tiny_std_collapses_to_centers() {
        let spec = BlobSpec {
            classes: vec![ClassBlob {
                center: vec![2.0, -3.0],
                std_dev: 1e-12,
                count: 50,
            }],
            seed: 0,
        };
        let (points, labels) = gaussian_blobs(&spec).unwrap();
        assert_eq!(labels.num_classes(), 2);
        for i in 0..points.rows() {
            assert!((points.get(i, 0) - 2.0).abs() < 1e-6);
            assert!((points.get(i, 1) + 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn label_counts_follow_spec() {
        let (_, labels) = gaussian_blobs(&spec(1)).unwrap();
        let zeros = labels.as_slice().iter().filter(|&&y| y == 0).count();
        let ones = labels.as_slice().iter().filter(|&&y| y == 1).count();
        assert_eq!((zeros, ones), (500, 500));
    }

    #[test]
    fn sample_means_stay_within_clt_bound() {
        let (points, labels) = gaussian_blobs(&spec(7)).unwrap();
        let bound = 4.0 / (500f64).sqrt();
        for (y, blob) in spec(7).classes.iter().enumerate() {
            for dim in 0..3 {
                let values: Vec<f64> = (0..points.rows())
                    .filter(|&i| labels.get(i) == y)
                    .map(|i| points.get(i, dim))
                    .collect();
                let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
                assert!(
                    (mean - blob.center[dim]).abs() < bound,
                    "class {y} dim {dim}: mean {mean} vs center {}",
                    blob.center[dim]
                );
            }
        }
    }

    #[test]
    fn permuting_class_order_permutes_label_blocks() {
        let a = ClassBlob {
            center: vec![0.0],
            std_dev: 1.0,
            count: 30,
        };
        let b = ClassBlob {
            center: vec![9.0],
            std_dev: 1.0,
            count: 70,
        };
        let (_, forward) = gaussian_blobs(&BlobSpec {
            classes: vec![a.clone(), b.clone()],
            seed: 5,
        })
        .unwrap();
        let (_, swapped) = gaussian_blobs(&BlobSpec {
            classes: vec![b, a],
            seed: 5,
        })
        .unwrap();
        let count_of =
            |labels: &LabelVector, y: usize| labels.as_slice().iter().filter(|&&l| l == y).count();
        assert_eq!(count_of(&forward, 0), 30);
        assert_eq!(count_of(&forward, 1), 70);
        assert_eq!(count_of(&swapped, 0), 70);
        assert_eq!(count_of(&swapped, 1), 30);
    }

    #[test]
    fn determinism_given_seed() {
        let a = gaussian_blobs(&spec(42)).unwrap();
        let b = gaussian_blobs(&spec(42)).unwrap();
        assert_eq!(a, b);
        let c = gaussian_blobs(&spec(43)).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn boundary_labeling_basics() {
        let points = EmbeddingMatrix::from_rows(&[vec![-1.0, 9.0], vec![2.0, -4.0]]).unwrap();
        let labels = label_by_vertical_boundary(&points, 0.0);
        assert_eq!(labels.as_slice(), &[0, 1]);

        // Boundary beyond every point: all zero.
        let max = (0..points.rows())
            .map(|i| points.get(i, 0))
            .fold(f64::NEG_INFINITY, f64::max);
        let labels = label_by_vertical_boundary(&points, max + 1.0);
        assert_eq!(labels.as_slice(), &[0, 0]);
    }

    #[test]
    fn boundary_crossing_mass_matches_gaussian_tail() {
        // One blob at the origin with unit std, boundary at +1: the crossing
        // fraction is the upper tail 1 - Phi(1) = 0.158655...
        let spec = BlobSpec {
            classes: vec![ClassBlob {
                center: vec![0.0, 0.0],
                std_dev: 1.0,
                count: 50_000,
            }],
            seed: 99,
        };
        let (points, _) = gaussian_blobs(&spec).unwrap();
        let labels = label_by_vertical_boundary(&points, 1.0);
        let crossing = labels.as_slice().iter().filter(|&&y| y == 1).count() as f64 / 50_000.0;
        let expected = 0.158_655_253_931_457_07;
        assert!(
            (crossing - expected).abs() <= 0.01,
            "crossing {crossing} vs tail mass {expected}"
        );
    }
}
