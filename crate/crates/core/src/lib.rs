//! Feature-dependent label-noise tooling for embedding datasets.
//!
//! The crate covers the full desk-scale pipeline: synthetic blob datasets,
//! PCA / exact t-SNE projection, four label-noising models (uniform,
//! class-dependent, margin-diminishing, cluster-based), soft neighbor-sampled
//! labels, subsampling-based memorization estimation with built-in cheap
//! learners, and SVG scatter rendering. Every seeded operation derives its
//! randomness from `(seed, index)` streams, so results are reproducible and
//! independent of thread count.

pub mod dataio;
pub mod error;
pub mod memorization;
pub mod neighbors;
pub mod noise;
pub mod projection;
pub mod rng;
pub mod softlabel;
pub mod synth;
pub mod viz;

pub use error::{Error, Result};

/// Caps the worker pool shared by all parallel operations. Call before the
/// first parallel computation; later calls fail because the pool is fixed.
pub fn set_worker_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Argument(format!("cannot configure {threads} worker threads: {e}")))
}
