//! Cross-module pipeline checks that exercise the on-disk surfaces.

use rand::Rng;

use noiseforge::dataio::{self, EmbeddingMatrix, LabelVector};
use noiseforge::memorization::{plan_subsets, run_learners, Learner};
use noiseforge::noise::{apply_cbn, calibrate_cbn};
use noiseforge::projection::Projection2D;
use noiseforge::synth::{gaussian_blobs, BlobSpec, ClassBlob};
use noiseforge::viz::{render_scatter, PlotSpec};

#[test]
fn large_record_file_matches_line_count_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.jsonl");

    let (data, labels) = gaussian_blobs(&BlobSpec {
        classes: vec![
            ClassBlob {
                center: vec![0.0, 0.0],
                std_dev: 0.6,
                count: 40,
            },
            ClassBlob {
                center: vec![5.0, 5.0],
                std_dev: 0.6,
                count: 40,
            },
        ],
        seed: 1,
    })
    .unwrap();
    let heldout: Vec<usize> = (0..30).collect();
    let plan = plan_subsets(&heldout, 1500, 0.7, 2).unwrap();
    let records = run_learners(&data, &labels, &plan, &Learner::KnnClassifier { k: 1 }).unwrap();
    dataio::write_prediction_records(&records, &path).unwrap();

    let reread = dataio::read_prediction_records(&path).unwrap();
    assert_eq!(reread, records);

    // Independent line-level oracle: parse the raw file as generic JSON and
    // tally inclusion counts per heldout example.
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1501, "header plus one line per model");
    let mut include_counts = vec![0usize; heldout.len()];
    for line in &lines[1..] {
        let value: serde_json::Value = serde_json::from_str(line).unwrap();
        for (j, bit) in value["inclusion_mask"]
            .as_array()
            .unwrap()
            .iter()
            .enumerate()
        {
            include_counts[j] += bit.as_u64().unwrap() as usize;
        }
    }
    for (j, &count) in include_counts.iter().enumerate() {
        let from_set: usize = reread
            .records()
            .iter()
            .filter(|r| r.inclusion_mask[j])
            .count();
        assert_eq!(count, from_set, "example {j}");
    }
}

#[test]
fn rendered_cbn_flips_lie_within_radius_of_a_centroid_marker() {
    let (data, labels) = gaussian_blobs(&BlobSpec {
        classes: vec![
            ClassBlob {
                center: vec![0.0, 0.0],
                std_dev: 1.0,
                count: 150,
            },
            ClassBlob {
                center: vec![9.0, 0.0],
                std_dev: 1.0,
                count: 150,
            },
        ],
        seed: 3,
    })
    .unwrap();
    let projection = Projection2D::new(
        (0..data.rows())
            .map(|i| [data.get(i, 0), data.get(i, 1)])
            .collect(),
    )
    .unwrap();
    let params = calibrate_cbn(&labels, &projection, 2, 0.3, 0.02, 4).unwrap();
    let (_, manifest) = apply_cbn(&labels, &projection, &params).unwrap();
    let centroids: Vec<Vec<[f64; 2]>> =
        serde_json::from_value(manifest.params["subcluster_centroids"].clone()).unwrap();
    let flat_centroids: Vec<[f64; 2]> = centroids.into_iter().flatten().collect();

    let mut spec = PlotSpec::new(&projection, &labels);
    spec.highlight = manifest.flipped_indices.clone();
    spec.centroids = flat_centroids.clone();
    let svg = render_scatter(&spec).unwrap();

    // Parse circles and centroid crosses back out of the SVG text.
    let mut circles: Vec<(f64, f64, bool)> = Vec::new();
    let mut crosses: Vec<(f64, f64)> = Vec::new();
    for line in svg.lines() {
        if line.starts_with("<circle") {
            let cx = attr_value(line, "cx");
            let cy = attr_value(line, "cy");
            circles.push((cx, cy, line.contains("stroke=")));
        } else if line.starts_with("<path") {
            // d="M x0 y L x1 y M x y0 L x y1": the cross center is the
            // midpoint of the first segment.
            let d_start = line.find("d=\"").unwrap() + 3;
            let d_end = line[d_start..].find('"').unwrap() + d_start;
            let tokens: Vec<&str> = line[d_start..d_end].split_whitespace().collect();
            let x0: f64 = tokens[1].parse().unwrap();
            let y: f64 = tokens[2].parse().unwrap();
            let x1: f64 = tokens[4].parse().unwrap();
            crosses.push(((x0 + x1) / 2.0, y));
        }
    }
    assert_eq!(circles.len(), 300);
    assert_eq!(crosses.len(), flat_centroids.len());

    // Invert the viewport scaling: recover data coordinates and check every
    // highlighted circle sits within the flip radius of some centroid. The
    // 3-decimal SVG rounding costs a small slack through the inverse scale.
    let (min, max) = bounds(projection.points());
    let to_data = |px: f64, py: f64| -> [f64; 2] {
        let x = min[0] + (px - 40.0) / 720.0 * (max[0] - min[0]);
        let y = max[1] - (py - 30.0) / 540.0 * (max[1] - min[1]);
        [x, y]
    };
    let slack = 0.002 * (max[0] - min[0]).max(max[1] - min[1]);
    for &(px, py, highlighted) in circles.iter().filter(|c| c.2) {
        let p = to_data(px, py);
        let dmin = flat_centroids
            .iter()
            .map(|&v| ((p[0] - v[0]).powi(2) + (p[1] - v[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(
            dmin < params.radius + slack,
            "highlighted circle at ({px}, {py}) maps {dmin} from nearest centroid, \
             radius {} (highlighted = {highlighted})",
            params.radius
        );
    }
}

fn attr_value(line: &str, name: &str) -> f64 {
    let needle = format!("{name}=\"");
    let start = line.find(&needle).unwrap() + needle.len();
    let end = line[start..].find('"').unwrap() + start;
    line[start..end].parse().unwrap()
}

fn bounds(points: &[[f64; 2]]) -> ([f64; 2], [f64; 2]) {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    for p in points {
        for axis in 0..2 {
            min[axis] = min[axis].min(p[axis]);
            max[axis] = max[axis].max(p[axis]);
        }
    }
    (min, max)
}

#[test]
fn selected_learned_incorrect_labels_overlap_planted_cbn_subclusters() {
    // CBN-noised blobs with a 1-NN learner: the labels selected as "learned
    // without memorization" should largely be the planted flipped
    // subclusters (Jaccard above 0.5).
    let (data, clean) = gaussian_blobs(&BlobSpec {
        classes: vec![
            ClassBlob {
                center: vec![0.0, 0.0],
                std_dev: 0.8,
                count: 250,
            },
            ClassBlob {
                center: vec![8.0, 0.0],
                std_dev: 0.8,
                count: 250,
            },
        ],
        seed: 81,
    })
    .unwrap();
    let projection = Projection2D::new(
        (0..data.rows())
            .map(|i| [data.get(i, 0), data.get(i, 1)])
            .collect(),
    )
    .unwrap();
    let params = calibrate_cbn(&clean, &projection, 3, 0.3, 0.01, 82).unwrap();
    let (noisy, manifest) = apply_cbn(&clean, &projection, &params).unwrap();

    let heldout = noiseforge::memorization::balanced_heldout(&noisy, &clean, 83).unwrap();
    let plan = plan_subsets(&heldout, 200, 0.7, 84).unwrap();
    let records = run_learners(&data, &noisy, &plan, &Learner::KnnClassifier { k: 1 }).unwrap();
    let heldout_labels =
        LabelVector::new(heldout.iter().map(|&i| noisy.get(i)).collect(), 2).unwrap();
    let table = noiseforge::memorization::estimate_memorization(&records, &heldout_labels).unwrap();
    let selected =
        noiseforge::memorization::select_learned_incorrect(&table, &noisy, &clean, 0.6).unwrap();

    let selected_set: std::collections::HashSet<usize> = selected.iter().copied().collect();
    let flipped_set: std::collections::HashSet<usize> =
        manifest.flipped_indices.iter().copied().collect();
    let intersection = selected_set.intersection(&flipped_set).count();
    let union = selected_set.union(&flipped_set).count();
    let jaccard = intersection as f64 / union as f64;
    assert!(
        jaccard > 0.5,
        "Jaccard {jaccard} (selected {}, flipped {})",
        selected_set.len(),
        flipped_set.len()
    );
}

#[test]
fn noising_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let labels_path = dir.path().join("labels.txt");
    let noisy_path = dir.path().join("noisy.txt");
    let manifest_path = dir.path().join("noisy.manifest.json");

    let labels = LabelVector::new((0..500).map(|i| i % 5).collect(), 5).unwrap();
    dataio::write_labels(&labels, &labels_path).unwrap();
    let read_back = dataio::read_labels(&labels_path, 5).unwrap();
    let (noisy, mut manifest) = noiseforge::noise::apply_uniform(&read_back, 0.2, 9).unwrap();
    dataio::write_labels(&noisy, &noisy_path).unwrap();
    manifest
        .source_digests
        .insert("labels".into(), dataio::file_digest(&labels_path).unwrap());
    manifest.output_digest = Some(dataio::file_digest(&noisy_path).unwrap());
    dataio::write_manifest(&manifest, &manifest_path).unwrap();

    let manifest_back = dataio::read_manifest(&manifest_path).unwrap();
    assert_eq!(manifest_back, manifest);
    let noisy_back = dataio::read_labels(&noisy_path, 5).unwrap();
    assert_eq!(
        noiseforge::noise::measure_rate(&read_back, &noisy_back).unwrap(),
        manifest.achieved_rate
    );
}

#[test]
fn embeddings_survive_projection_file_round_trip() {
    let mut rng = noiseforge::rng::master(44);
    let rows: Vec<Vec<f64>> = (0..40)
        .map(|_| (0..6).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    let data = EmbeddingMatrix::from_rows(&rows).unwrap();
    let pca = noiseforge::projection::pca_project(&data, 2).unwrap();
    let projection = Projection2D::new(
        (0..pca.rows())
            .map(|i| [pca.get(i, 0), pca.get(i, 1)])
            .collect(),
    )
    .unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("proj.npy");
    dataio::write_projection(&projection, &path).unwrap();
    let back = dataio::read_projection(&path).unwrap();
    assert_eq!(back.len(), 40);
    // f32 interchange: coordinates agree to single precision.
    for i in 0..40 {
        assert!((back.point(i)[0] - projection.point(i)[0]).abs() < 1e-4);
        assert!((back.point(i)[1] - projection.point(i)[1]).abs() < 1e-4);
    }
}
