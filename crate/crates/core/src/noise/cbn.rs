//! Cluster-based noise: flips labels inside radius-r balls around subcluster
//! centroids drawn from each class, targeting the nearest other class.

use serde_json::json;

use crate::dataio::{LabelVector, NoiseManifest, NoiseModel};
use crate::error::{Error, Result};
use crate::projection::{point_distance, Projection2D};
use crate::rng;

/// Parameters for [`apply_cbn`].
#[derive(Debug, Clone, PartialEq)]
pub struct CbnParams {
    /// Subcluster centroids drawn per class.
    pub n_centroids: usize,
    /// Flip radius in projection-space units.
    pub radius: f64,
    pub seed: u64,
}

struct ClassGeometry {
    /// Per class: member indices, mean point, and drawn subcluster centroids.
    members: Vec<Vec<usize>>,
    class_centroids: Vec<[f64; 2]>,
    subcluster_indices: Vec<Vec<usize>>,
    subcluster_centroids: Vec<Vec<[f64; 2]>>,
}

fn class_geometry(
    labels: &LabelVector,
    projection: &Projection2D,
    n_centroids: usize,
    seed: u64,
) -> Result<ClassGeometry> {
    let c = labels.num_classes();
    let mut members = vec![Vec::new(); c];
    for (i, &y) in labels.as_slice().iter().enumerate() {
        members[y].push(i);
    }
    for (y, m) in members.iter().enumerate() {
        if m.is_empty() {
            return Err(Error::Argument(format!("class {y} has no members")));
        }
        if m.len() < n_centroids {
            return Err(Error::Argument(format!(
                "class {y} has {} members, fewer than {n_centroids} centroids",
                m.len()
            )));
        }
    }

    let class_centroids: Vec<[f64; 2]> = members
        .iter()
        .map(|m| {
            let mut mean = [0.0, 0.0];
            for &i in m {
                let p = projection.point(i);
                mean[0] += p[0];
                mean[1] += p[1];
            }
            mean[0] /= m.len() as f64;
            mean[1] /= m.len() as f64;
            mean
        })
        .collect();

    // Subcluster centroids are actual class members so every ball is
    // anchored inside its class cluster. One stream per class keeps the
    // draw independent of processing order.
    let mut subcluster_indices = Vec::with_capacity(c);
    let mut subcluster_centroids = Vec::with_capacity(c);
    for (y, m) in members.iter().enumerate() {
        let mut r = rng::stream(seed, y as u64);
        let mut chosen: Vec<usize> = rand::seq::index::sample(&mut r, m.len(), n_centroids)
            .iter()
            .map(|pos| m[pos])
            .collect();
        chosen.sort_unstable();
        subcluster_centroids.push(chosen.iter().map(|&i| projection.point(i)).collect());
        subcluster_indices.push(chosen);
    }

    Ok(ClassGeometry {
        members,
        class_centroids,
        subcluster_indices,
        subcluster_centroids,
    })
}

/// Applies cluster-based noise.
///
/// Per class y: the class centroid is the mean of its projected points and
/// `n_centroids` subcluster centroids are drawn uniformly without replacement
/// from its members. Every point of class y strictly closer than `radius` to
/// some subcluster centroid takes the label of the other class whose centroid
/// is nearest to *that point* (smallest class index on ties).
pub fn apply_cbn(
    labels: &LabelVector,
    projection: &Projection2D,
    params: &CbnParams,
) -> Result<(LabelVector, NoiseManifest)> {
    if projection.len() != labels.len() {
        return Err(Error::Argument(format!(
            "projection has {} rows but labels have {}",
            projection.len(),
            labels.len()
        )));
    }
    if params.n_centroids == 0 {
        return Err(Error::Argument("n_centroids must be at least 1".into()));
    }
    if params.radius < 0.0 {
        return Err(Error::Argument(format!(
            "radius {} must be non-negative",
            params.radius
        )));
    }

    let geometry = class_geometry(labels, projection, params.n_centroids, params.seed)?;
    let noisy = flip_within_radius(labels, projection, &geometry, params.radius);

    let flips = super::collect_flips(labels.as_slice(), &noisy);
    let mut manifest_params = serde_json::Map::new();
    manifest_params.insert("n_centroids".into(), json!(params.n_centroids));
    manifest_params.insert("radius".into(), json!(params.radius));
    manifest_params.insert("class_centroids".into(), json!(geometry.class_centroids));
    manifest_params.insert(
        "subcluster_indices".into(),
        json!(geometry.subcluster_indices),
    );
    manifest_params.insert(
        "subcluster_centroids".into(),
        json!(geometry.subcluster_centroids),
    );
    let manifest = NoiseManifest::new(
        NoiseModel::Cbn,
        manifest_params,
        params.seed,
        None,
        labels.len(),
        flips,
    );
    Ok((LabelVector::new(noisy, labels.num_classes())?, manifest))
}

fn flip_within_radius(
    labels: &LabelVector,
    projection: &Projection2D,
    geometry: &ClassGeometry,
    radius: f64,
) -> Vec<usize> {
    let mut noisy = labels.as_slice().to_vec();
    for (y, members) in geometry.members.iter().enumerate() {
        let centroids = &geometry.subcluster_centroids[y];
        for &i in members {
            let point = projection.point(i);
            let hit = centroids.iter().any(|&v| point_distance(point, v) < radius);
            if hit {
                noisy[i] = nearest_other_class(point, &geometry.class_centroids, y);
            }
        }
    }
    noisy
}

fn nearest_other_class(point: [f64; 2], class_centroids: &[[f64; 2]], own: usize) -> usize {
    let mut best = usize::MAX;
    let mut best_dist = f64::INFINITY;
    for (y2, &u) in class_centroids.iter().enumerate() {
        if y2 == own {
            continue;
        }
        let d = point_distance(point, u);
        if d < best_dist {
            best_dist = d;
            best = y2;
        }
    }
    best
}

/// Binary-searches the flip radius to hit `target_rate` within `tolerance`.
///
/// The centroid draw is fixed by `seed`, so each point's distance to its
/// class's nearest subcluster centroid is independent of the radius; the
/// achieved rate is a monotone step function of r. Searches r over
/// [0, max pairwise distance] with at most 64 bisections and returns the
/// smallest probed radius within tolerance.
pub fn calibrate_cbn(
    labels: &LabelVector,
    projection: &Projection2D,
    n_centroids: usize,
    target_rate: f64,
    tolerance: f64,
    seed: u64,
) -> Result<CbnParams> {
    if !(0.0 < target_rate && target_rate < 1.0) {
        return Err(Error::Argument(format!(
            "target rate {target_rate} outside (0, 1)"
        )));
    }
    if tolerance <= 0.0 {
        return Err(Error::Argument(format!(
            "tolerance {tolerance} must be positive"
        )));
    }
    if projection.len() != labels.len() {
        return Err(Error::Argument(format!(
            "projection has {} rows but labels have {}",
            projection.len(),
            labels.len()
        )));
    }

    let geometry = class_geometry(labels, projection, n_centroids, seed)?;
    let n = labels.len();

    // Distance from each point to the nearest subcluster centroid of its own
    // class; a point flips at radius r iff its distance is strictly below r.
    let mut min_dists = vec![f64::INFINITY; n];
    for (y, members) in geometry.members.iter().enumerate() {
        let centroids = &geometry.subcluster_centroids[y];
        for &i in members {
            let point = projection.point(i);
            for &v in centroids {
                min_dists[i] = min_dists[i].min(point_distance(point, v));
            }
        }
    }
    let rate_at = |r: f64| min_dists.iter().filter(|&&d| d < r).count() as f64 / n as f64;

    let mut lo = 0.0;
    let mut hi = projection.max_pairwise_distance();
    // hi covers every point only with a strict inequality margin.
    hi = hi * (1.0 + 1e-9) + 1e-12;
    let mut lo_rate = rate_at(lo);
    let mut hi_rate = rate_at(hi);
    let mut best: Option<(f64, f64)> = None;

    let consider = |r: f64, rate: f64, best: &mut Option<(f64, f64)>| {
        if (rate - target_rate).abs() <= tolerance && best.is_none_or(|(br, _)| r < br) {
            *best = Some((r, rate));
        }
    };
    consider(lo, lo_rate, &mut best);
    consider(hi, hi_rate, &mut best);

    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        let rate = rate_at(mid);
        consider(mid, rate, &mut best);
        if rate < target_rate {
            lo = mid;
            lo_rate = rate;
        } else {
            hi = mid;
            hi_rate = rate;
        }
    }

    match best {
        Some((radius, _)) => Ok(CbnParams {
            n_centroids,
            radius,
            seed,
        }),
        None => Err(Error::Calibration {
            below: (lo, lo_rate),
            above: (hi, hi_rate),
        }),
    }
}
