//! Exact (O(n²)) t-SNE with perplexity-matched Gaussian affinities.

use rand::Rng;
use rayon::prelude::*;

use crate::dataio::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::neighbors::squared_euclidean;
use crate::projection::{pca_project, Projection2D};

/// Hyperparameters for [`tsne`]. Defaults follow the reference conventions.
#[derive(Debug, Clone)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub early_exaggeration_factor: f64,
    pub early_phase_iters: usize,
    pub learning_rate: f64,
    pub initial_momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch_iter: usize,
    pub seed: u64,
    pub entropy_search_tolerance: f64,
    pub min_probability: f64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            early_exaggeration_factor: 12.0,
            early_phase_iters: 250,
            learning_rate: 200.0,
            initial_momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch_iter: 250,
            seed: 0,
            entropy_search_tolerance: 1e-5,
            min_probability: 1e-12,
        }
    }
}

impl TsneConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.perplexity > 1.0 && self.perplexity < n as f64 / 3.0) {
            return Err(Error::Argument(format!(
                "perplexity {} outside (1, n/3) for n = {n}",
                self.perplexity
            )));
        }
        if self.iterations < self.early_phase_iters {
            return Err(Error::Argument(format!(
                "iterations {} shorter than early phase {}",
                self.iterations, self.early_phase_iters
            )));
        }
        if self.learning_rate <= 0.0
            || self.early_exaggeration_factor <= 0.0
            || self.initial_momentum <= 0.0
            || self.final_momentum <= 0.0
            || self.entropy_search_tolerance <= 0.0
            || self.min_probability <= 0.0
        {
            return Err(Error::Argument("all t-SNE rates must be positive".into()));
        }
        Ok(())
    }
}

/// Dense n×n affinity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    n: usize,
    data: Vec<f64>,
}

impl AffinityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Sum of all entries.
    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }
}

/// Conditional affinities P(j|i): per-row Gaussian kernels whose bandwidths
/// are bisected until the row's base-2 entropy matches log2(perplexity)
/// within `tol` (at most 50 bisection steps).
///
/// Tied or duplicated distances can make the target entropy unreachable (it
/// saturates at log2 of the tie count); such rows keep their best-effort
/// distribution and are reported through a warning with the achieved entropy,
/// matching the behavior of the reference implementations.
pub fn conditional_affinities(
    data: &EmbeddingMatrix,
    perplexity: f64,
    tol: f64,
) -> Result<AffinityMatrix> {
    let n = data.rows();
    if !(perplexity > 1.0 && perplexity < n as f64 / 3.0) {
        return Err(Error::Argument(format!(
            "perplexity {perplexity} outside (1, n/3) for n = {n}"
        )));
    }
    if tol <= 0.0 {
        return Err(Error::Argument("entropy tolerance must be positive".into()));
    }

    let target_entropy = perplexity.log2();
    let sq_dist: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| squared_euclidean(data.row(i), data.row(j)))
                .collect()
        })
        .collect();

    let rows: Vec<(Vec<f64>, Option<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| affinity_row(i, &sq_dist[i], target_entropy, tol))
        .collect();

    let mut out = vec![0.0; n * n];
    for (i, (values, missed)) in rows.into_iter().enumerate() {
        if let Some(achieved) = missed {
            log::warn!(
                "bandwidth search did not converge for row {i}: \
                 achieved entropy {achieved:.6}, target {target_entropy:.6}"
            );
        }
        out[i * n..(i + 1) * n].copy_from_slice(&values);
    }
    Ok(AffinityMatrix { n, data: out })
}

/// Bisects the precision beta = 1/(2σ²) of one row. Returns the row and, if
/// the entropy target was missed, the achieved entropy.
fn affinity_row(
    i: usize,
    sq_dist: &[f64],
    target_entropy: f64,
    tol: f64,
) -> (Vec<f64>, Option<f64>) {
    let n = sq_dist.len();
    let mut beta = 1.0;
    let mut beta_min = f64::NEG_INFINITY;
    let mut beta_max = f64::INFINITY;
    let mut row = vec![0.0; n];
    let mut entropy = 0.0;

    // Shift by the smallest non-self distance so exp() stays in range.
    let shift = sq_dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);

    for _ in 0..50 {
        let mut sum = 0.0;
        for (j, &d) in sq_dist.iter().enumerate() {
            if j == i {
                row[j] = 0.0;
            } else {
                let p = (-beta * (d - shift)).exp();
                row[j] = p;
                sum += p;
            }
        }
        entropy = 0.0;
        for (j, value) in row.iter_mut().enumerate() {
            if j == i {
                continue;
            }
            *value /= sum;
            if *value > 0.0 {
                entropy -= *value * value.log2();
            }
        }

        let diff = entropy - target_entropy;
        if diff.abs() <= tol {
            return (row, None);
        }
        if diff > 0.0 {
            // Entropy too high: sharpen the kernel.
            beta_min = beta;
            beta = if beta_max.is_infinite() {
                beta * 2.0
            } else {
                (beta + beta_max) / 2.0
            };
        } else {
            beta_max = beta;
            beta = if beta_min.is_infinite() {
                beta / 2.0
            } else {
                (beta + beta_min) / 2.0
            };
        }
    }
    (row, Some(entropy))
}

/// Symmetrized joint affinities p_ij = (P(j|i) + P(i|j)) / 2n, clamped below
/// at `min_probability`.
pub fn joint_affinities(conditional: &AffinityMatrix, min_probability: f64) -> AffinityMatrix {
    let n = conditional.n;
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = (conditional.get(i, j) + conditional.get(j, i)) / (2.0 * n as f64);
            data[i * n + j] = p.max(min_probability);
        }
    }
    AffinityMatrix { n, data }
}

/// Student-t kernel weights and their total mass for a layout.
fn student_weights(layout: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = layout.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; n];
            for j in 0..n {
                if i != j {
                    let dx = layout[i][0] - layout[j][0];
                    let dy = layout[i][1] - layout[j][1];
                    row[j] = 1.0 / (1.0 + dx * dx + dy * dy);
                }
            }
            row
        })
        .collect();
    // Ordered reduction keeps the total independent of thread scheduling.
    let total: f64 = rows.iter().map(|r| r.iter().sum::<f64>()).sum();
    (rows.concat(), total)
}

/// Analytic KL gradient at `layout` for affinities `p`:
/// dC/dy_i = 4 Σ_j (p_ij − q_ij) w_ij (y_i − y_j), w_ij the Student-t weight.
pub fn kl_gradient(p: &AffinityMatrix, layout: &[[f64; 2]]) -> Vec<[f64; 2]> {
    kl_gradient_scaled(p, 1.0, layout)
}

fn kl_gradient_scaled(p: &AffinityMatrix, p_scale: f64, layout: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = layout.len();
    let (w, total) = student_weights(layout);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut g = [0.0, 0.0];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w_ij = w[i * n + j];
                let q_ij = w_ij / total;
                let factor = 4.0 * (p_scale * p.get(i, j) - q_ij) * w_ij;
                g[0] += factor * (layout[i][0] - layout[j][0]);
                g[1] += factor * (layout[i][1] - layout[j][1]);
            }
            g
        })
        .collect()
}

/// KL divergence Σ p log(p / max(q, min_probability)).
pub fn kl_divergence(p: &AffinityMatrix, layout: &[[f64; 2]], min_probability: f64) -> f64 {
    let n = layout.len();
    let (w, total) = student_weights(layout);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p_ij = p.get(i, j);
            if p_ij > 0.0 {
                let q_ij = (w[i * n + j] / total).max(min_probability);
                kl += p_ij * (p_ij / q_ij).ln();
            }
        }
    }
    kl
}

/// Final layout plus the KL-divergence trace (one value per iteration,
/// always measured against the un-exaggerated affinities).
#[derive(Debug, Clone)]
pub struct TsneEmbedding {
    pub projection: Projection2D,
    pub kl_trace: Vec<f64>,
}

/// Runs exact t-SNE. Deterministic for a fixed config.
pub fn tsne(data: &EmbeddingMatrix, config: &TsneConfig) -> Result<TsneEmbedding> {
    let n = data.rows();
    if n < 4 {
        return Err(Error::Argument(format!("t-SNE needs n >= 4, got {n}")));
    }
    config.validate(n)?;

    let conditional =
        conditional_affinities(data, config.perplexity, config.entropy_search_tolerance)?;
    let p = joint_affinities(&conditional, config.min_probability);

    let mut layout = initial_layout(data, config)?;
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut kl_trace = Vec::with_capacity(config.iterations);

    for iter in 0..config.iterations {
        let exaggeration = if iter < config.early_phase_iters {
            config.early_exaggeration_factor
        } else {
            1.0
        };
        let momentum = if iter < config.momentum_switch_iter {
            config.initial_momentum
        } else {
            config.final_momentum
        };

        let gradient = kl_gradient_scaled(&p, exaggeration, &layout);
        for i in 0..n {
            velocity[i][0] = momentum * velocity[i][0] - config.learning_rate * gradient[i][0];
            velocity[i][1] = momentum * velocity[i][1] - config.learning_rate * gradient[i][1];
            layout[i][0] += velocity[i][0];
            layout[i][1] += velocity[i][1];
        }

        // Re-center; KL is translation invariant and this keeps coordinates
        // bounded.
        let (mut mx, mut my) = (0.0, 0.0);
        for point in &layout {
            mx += point[0];
            my += point[1];
        }
        mx /= n as f64;
        my /= n as f64;
        for point in &mut layout {
            point[0] -= mx;
            point[1] -= my;
        }

        if layout
            .iter()
            .any(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::Numerical {
                iteration: iter,
                reason: "non-finite coordinate during gradient descent".into(),
            });
        }

        kl_trace.push(kl_divergence(&p, &layout, config.min_probability));
    }

    log::debug!(
        "t-SNE finished: n={n}, final KL = {:.6}",
        kl_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(TsneEmbedding {
        projection: Projection2D::new(layout)?,
        kl_trace,
    })
}

/// PCA initialization scaled so the first axis has standard deviation 1e-4.
/// A zero-variance axis (degenerate input) falls back to seeded uniform
/// jitter at the same scale so the descent can leave the subspace.
fn initial_layout(data: &EmbeddingMatrix, config: &TsneConfig) -> Result<Vec<[f64; 2]>> {
    let n = data.rows();
    let dims = data.cols().min(2);
    let pca = pca_project(data, dims)?;

    let mut layout = vec![[0.0f64; 2]; n];
    for (i, point) in layout.iter_mut().enumerate() {
        point[0] = pca.get(i, 0);
        point[1] = if dims > 1 { pca.get(i, 1) } else { 0.0 };
    }

    let std0 = column_std(&layout, 0);
    if std0 > 0.0 {
        let scale = 1e-4 / std0;
        for point in &mut layout {
            point[0] *= scale;
            point[1] *= scale;
        }
    }

    let mut rng = crate::rng::master(config.seed);
    for axis in 0..2 {
        if column_std(&layout, axis) == 0.0 {
            for point in &mut layout {
                point[axis] = rng.random_range(-0.5..0.5) * 1e-4;
            }
        }
    }
    Ok(layout)
}

fn column_std(layout: &[[f64; 2]], axis: usize) -> f64 {
    let n = layout.len() as f64;
    let mean: f64 = layout.iter().map(|p| p[axis]).sum::<f64>() / n;
    let var: f64 = layout.iter().map(|p| (p[axis] - mean).powi(2)).sum::<f64>() / n;
    var.sqrt()
}
