//! Deterministic PCA and exact t-SNE projections to 2-D.

mod pca;
mod tsne;

pub use pca::pca_project;
pub use tsne::{
    conditional_affinities, joint_affinities, kl_divergence, kl_gradient, tsne, AffinityMatrix,
    TsneConfig, TsneEmbedding,
};

use crate::error::{Error, Result};

/// n×2 layout of a dataset, one point per example.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection2D {
    points: Vec<[f64; 2]>,
}

impl Projection2D {
    pub fn new(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Data("projection must be non-empty".into()));
        }
        if let Some(pos) = points
            .iter()
            .position(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::Data(format!(
                "non-finite projection coordinate at row {pos}"
            )));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Largest distance between any two points; zero for a single point.
    pub fn max_pairwise_distance(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.points.len() {
            for j in (i + 1)..self.points.len() {
                let dx = self.points[i][0] - self.points[j][0];
                let dy = self.points[i][1] - self.points[j][1];
                best = best.max((dx * dx + dy * dy).sqrt());
            }
        }
        best
    }
}

pub(crate) fn point_distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}
