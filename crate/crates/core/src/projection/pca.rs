//! Principal component analysis via cyclic Jacobi eigendecomposition.

use crate::dataio::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Mean-centers `data` and projects it onto its top `dims` principal axes.
///
/// Axis signs follow the usual convention: the largest-magnitude loading of
/// each axis is made positive (first such index on exact magnitude ties), so
/// the result is deterministic.
pub fn pca_project(data: &EmbeddingMatrix, dims: usize) -> Result<EmbeddingMatrix> {
    let (n, d) = (data.rows(), data.cols());
    if dims == 0 || dims > d {
        return Err(Error::Argument(format!("dims = {dims} outside [1, {d}]")));
    }

    let centered = center(data);

    // Scatter matrix XᵀX; its eigenvalues are the per-axis retained sums of
    // squares, so discarded-eigenvalue totals equal reconstruction error.
    let mut scatter = vec![0.0; d * d];
    for row in centered.chunks(d) {
        for a in 0..d {
            for b in a..d {
                scatter[a * d + b] += row[a] * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            scatter[a * d + b] = scatter[b * d + a];
        }
    }

    let (eigenvalues, mut eigenvectors) = jacobi_eigen(&scatter, d);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));

    // Columns of W = the top `dims` eigenvectors, sign-fixed.
    let mut basis = vec![0.0; d * dims];
    for (k, &col) in order.iter().take(dims).enumerate() {
        fix_sign(&mut eigenvectors, d, col);
        for r in 0..d {
            basis[r * dims + k] = eigenvectors[r * d + col];
        }
    }

    let mut projected = vec![0.0; n * dims];
    for (i, row) in centered.chunks(d).enumerate() {
        for k in 0..dims {
            let mut acc = 0.0;
            for r in 0..d {
                acc += row[r] * basis[r * dims + k];
            }
            projected[i * dims + k] = acc;
        }
    }
    EmbeddingMatrix::new(n, dims, projected)
}

fn center(data: &EmbeddingMatrix) -> Vec<f64> {
    let (n, d) = (data.rows(), data.cols());
    let mut means = vec![0.0; d];
    for i in 0..n {
        for (m, v) in means.iter_mut().zip(data.row(i)) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n {
        for (v, m) in data.row(i).iter().zip(&means) {
            out.push(v - m);
        }
    }
    out
}

fn fix_sign(vectors: &mut [f64], d: usize, col: usize) {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for r in 0..d {
        let mag = vectors[r * d + col].abs();
        if mag > best_mag {
            best_mag = mag;
            best = r;
        }
    }
    if vectors[best * d + col] < 0.0 {
        for r in 0..d {
            vectors[r * d + col] = -vectors[r * d + col];
        }
    }
}

/// Cyclic Jacobi rotations on a symmetric matrix. Returns eigenvalues and the
/// matrix of eigenvectors (column `j` pairs with eigenvalue `j`).
pub(crate) fn jacobi_eigen(sym: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut a = sym.to_vec();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale: f64 = sym.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[p * d + q] * a[p * d + q];
            }
        }
        if off.sqrt() <= 1e-13 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let eigenvalues = (0..d).map(|i| a[i * d + i]).collect();
    (eigenvalues, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn pairwise(data: &EmbeddingMatrix) -> Vec<f64> {
        let n = data.rows();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(crate::neighbors::euclidean(data.row(i), data.row(j)));
            }
        }
        out
    }

    #[test]
    fn two_dim_centered_input_is_rotated_not_distorted() {
        let mut rng = crate::rng::master(3);
        let mut rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        // Center the cloud.
        let mean: Vec<f64> = (0..2)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
            .collect();
        for r in &mut rows {
            r[0] -= mean[0];
            r[1] -= mean[1];
        }
        let data = EmbeddingMatrix::from_rows(&rows).unwrap();
        let proj = pca_project(&data, 2).unwrap();
        let before = pairwise(&data);
        let after = pairwise(&proj);
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-6, "distance changed: {a} vs {b}");
        }
    }

    #[test]
    fn rank_one_data_has_vanishing_second_axis() {
        let mut rng = crate::rng::master(4);
        let direction = [1.0, -2.0, 0.5, 3.0, 1.5];
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let t: f64 = rng.random_range(-1.0..1.0);
                direction.iter().map(|d| d * t).collect()
            })
            .collect();
        let data = EmbeddingMatrix::from_rows(&rows).unwrap();
        let proj = pca_project(&data, 2).unwrap();
        for i in 0..proj.rows() {
            assert!(proj.get(i, 1).abs() < 1e-6);
        }
    }

    #[test]
    fn reconstruction_error_matches_discarded_eigenvalues() {
        let mut rng = crate::rng::master(9);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..10).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let data = EmbeddingMatrix::from_rows(&rows).unwrap();
        let proj = pca_project(&data, 2).unwrap();

        // Independent oracle: eigendecompose the scatter matrix with a
        // test-local routine and sum the eigenvalues past the first two.
        let d = 10;
        let centered = center(&data);
        let mut scatter = vec![0.0; d * d];
        for row in centered.chunks(d) {
            for a in 0..d {
                for b in 0..d {
                    scatter[a * d + b] += row[a] * row[b];
                }
            }
        }
        let mut eigs = oracle_eigenvalues(&scatter, d);
        eigs.sort_by(|a, b| b.total_cmp(a));
        let discarded: f64 = eigs[2..].iter().sum();

        // ||Xc||² − ||Y||² is the squared reconstruction error of an
        // orthogonal projection.
        let total: f64 = centered.iter().map(|x| x * x).sum();
        let retained: f64 = proj.data().iter().map(|x| x * x).sum();
        assert!(
            ((total - retained) - discarded).abs() < 1e-6,
            "reconstruction error {} vs discarded {}",
            total - retained,
            discarded
        );
    }

    /// QL-free eigenvalue oracle for the test above: classical (pivot-order)
    /// Jacobi written independently of the implementation's cyclic sweep.
    fn oracle_eigenvalues(sym: &[f64], d: usize) -> Vec<f64> {
        let mut a = sym.to_vec();
        for _ in 0..10_000 {
            let mut p = 0;
            let mut q = 1;
            let mut biggest = 0.0;
            for i in 0..d {
                for j in (i + 1)..d {
                    if a[i * d + j].abs() > biggest {
                        biggest = a[i * d + j].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if biggest < 1e-12 {
                break;
            }
            let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * a[p * d + q]);
            let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = t * c;
            for k in 0..d {
                let akp = a[k * d + p];
                let akq = a[k * d + q];
                a[k * d + p] = c * akp - s * akq;
                a[k * d + q] = s * akp + c * akq;
            }
            for k in 0..d {
                let apk = a[p * d + k];
                let aqk = a[q * d + k];
                a[p * d + k] = c * apk - s * aqk;
                a[q * d + k] = s * apk + c * aqk;
            }
        }
        (0..d).map(|i| a[i * d + i]).collect()
    }

    #[test]
    fn dims_out_of_range_is_argument_error() {
        let data = EmbeddingMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!(matches!(pca_project(&data, 0), Err(Error::Argument(_))));
        assert!(matches!(pca_project(&data, 3), Err(Error::Argument(_))));
    }
}
