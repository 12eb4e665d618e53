//! Distance metrics and exact k-nearest-neighbor queries.
//!
//! Desk scale data only: brute-force scans, no spatial index. Ties are broken
//! by ascending index so results are identical across platforms and thread
//! counts.

use crate::dataio::EmbeddingMatrix;
use crate::error::{Error, Result};

/// Distance between feature vectors.
///
/// Cosine distance is `1 - a·b / (|a||b|)` and requires non-zero vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    Euclidean,
    #[default]
    CosineDistance,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> Result<f64> {
        match self {
            Metric::Euclidean => Ok(euclidean(a, b)),
            Metric::CosineDistance => {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    dot += x * y;
                    na += x * x;
                    nb += y * y;
                }
                if na == 0.0 || nb == 0.0 {
                    return Err(Error::Data(
                        "cosine distance undefined for zero vector".into(),
                    ));
                }
                // Rounding can push the result a hair below zero for
                // near-identical vectors; distances must be non-negative.
                Ok((1.0 - dot / (na.sqrt() * nb.sqrt())).max(0.0))
            }
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" | "cosine_distance" => Ok(Metric::CosineDistance),
            other => Err(Error::Argument(format!("unknown metric {other:?}"))),
        }
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Neighbors of one query point, ordered by ascending `(distance, index)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborList {
    pub query_index: usize,
    pub entries: Vec<(usize, f64)>,
}

impl NeighborList {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(i, _)| i)
    }
}

/// Exact k-nearest neighbors of `data[query_index]` among the rows of `data`.
pub fn knn(
    data: &EmbeddingMatrix,
    query_index: usize,
    k: usize,
    metric: Metric,
    exclude_self: bool,
) -> Result<NeighborList> {
    let n = data.rows();
    if query_index >= n {
        return Err(Error::Argument(format!(
            "query index {query_index} outside [0, {n})"
        )));
    }
    let candidates = n - usize::from(exclude_self);
    if k == 0 || k > candidates {
        return Err(Error::Argument(format!(
            "k = {k} outside [1, {candidates}] for n = {n}"
        )));
    }

    let query = data.row(query_index);
    // Max-heap of the k best (distance, index) pairs seen so far.
    let mut heap: std::collections::BinaryHeap<HeapEntry> =
        std::collections::BinaryHeap::with_capacity(k + 1);
    for i in 0..n {
        if exclude_self && i == query_index {
            continue;
        }
        let d = metric.distance(query, data.row(i))?;
        let entry = HeapEntry {
            distance: d,
            index: i,
        };
        if heap.len() < k {
            heap.push(entry);
        } else if entry < *heap.peek().expect("heap non-empty") {
            heap.pop();
            heap.push(entry);
        }
    }

    let mut entries: Vec<(usize, f64)> = heap.into_iter().map(|e| (e.index, e.distance)).collect();
    entries.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    Ok(NeighborList {
        query_index,
        entries,
    })
}

#[derive(PartialEq)]
struct HeapEntry {
    distance: f64,
    index: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Symmetric matrix with zero diagonal, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub(crate) fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }
}

/// All pairwise distances among the rows of `data`.
pub fn pairwise_distances(data: &EmbeddingMatrix, metric: Metric) -> Result<SquareMatrix> {
    let n = data.rows();
    let mut out = SquareMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric.distance(data.row(i), data.row(j))?;
            out.set(i, j, d);
            out.set(j, i, d);
        }
    }
    Ok(out)
}
