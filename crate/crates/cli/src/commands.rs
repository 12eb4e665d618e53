//! Subcommand definitions and their implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use noiseforge::dataio::{self, LabelVector, NoiseManifest};
use noiseforge::memorization::{
    self, balanced_heldout, estimate_memorization, plan_subsets, run_learners, Learner,
};
use noiseforge::neighbors::Metric;
use noiseforge::noise::{
    apply_cbn, apply_class_dependent, apply_pmd, apply_uniform, calibrate_cbn, measure_rate,
    CbnParams, PmdParams, TransitionMatrix,
};
use noiseforge::projection::{pca_project, tsne, Projection2D, TsneConfig};
use noiseforge::softlabel::{lra_sample, snls, SnlsConfig};
use noiseforge::synth::{gaussian_blobs, label_by_vertical_boundary, BlobSpec, ClassBlob};
use noiseforge::viz::{default_palette, render_scatter, PlotSpec};

#[derive(Parser)]
#[command(
    name = "noiseforge",
    version,
    about = "Label-noise synthesis, soft neighbor labels, and memorization analysis"
)]
pub struct Cli {
    /// Cap the worker-thread pool used by parallel operations.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate Gaussian blob datasets.
    Synth(SynthArgs),
    /// Project embeddings to 2-D.
    Project {
        #[command(subcommand)]
        method: ProjectCommand,
    },
    /// Apply a label-noise model.
    Noise {
        #[command(subcommand)]
        model: NoiseCommand,
    },
    /// Build soft neighbor-sampled labels.
    Snls(SnlsArgs),
    /// Resample each label from one random nearest neighbor.
    LraSample(LraSampleArgs),
    /// Memorization estimation pipeline.
    Mem {
        #[command(subcommand)]
        step: MemCommand,
    },
    /// Render an SVG scatter plot of a projection.
    Plot(PlotArgs),
    /// Print the disagreement rate between two label files.
    MeasureRate(MeasureRateArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// Blob centers as "x,y[,z...];x,y[,z...];..." (one per class).
    #[arg(long)]
    centers: String,
    /// Isotropic standard deviation, single value or one per class
    /// (semicolon-separated).
    #[arg(long, default_value = "1.0")]
    std: String,
    /// Points per class, single value or one per class.
    #[arg(long, default_value = "500")]
    count: String,
    #[arg(long)]
    seed: u64,
    /// Relabel by a vertical decision boundary at this first coordinate.
    #[arg(long)]
    boundary: Option<f64>,
    #[arg(long)]
    out_embeddings: PathBuf,
    #[arg(long)]
    out_labels: PathBuf,
}

#[derive(Subcommand)]
pub enum ProjectCommand {
    /// Deterministic PCA projection.
    Pca {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long, default_value_t = 2)]
        dims: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact t-SNE to 2-D.
    Tsne {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 30.0)]
        perplexity: f64,
        #[arg(long, default_value_t = 1000)]
        iterations: usize,
        #[arg(long, default_value_t = 200.0)]
        learning_rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
pub struct LabelInput {
    /// Input labels, one decimal class index per line.
    #[arg(long)]
    labels: PathBuf,
    /// Number of classes C (labels must lie in [0, C)).
    #[arg(long)]
    num_classes: usize,
}

#[derive(Subcommand)]
pub enum NoiseCommand {
    /// Flip each label with fixed probability to a uniform other class.
    Uniform {
        #[command(flatten)]
        input: LabelInput,
        #[arg(long)]
        rate: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Resample labels through a row-stochastic transition matrix (JSON
    /// array of rows).
    Classdep {
        #[command(flatten)]
        input: LabelInput,
        #[arg(long)]
        transition: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Margin-diminishing noise from reference-classifier posteriors.
    Pmd {
        #[command(flatten)]
        input: LabelInput,
        /// Posterior matrix (NPY, one row per example).
        #[arg(long)]
        posteriors: PathBuf,
        /// Flip scale c in (0, 1].
        #[arg(long)]
        scale: f64,
        /// Polynomial order t >= 1.
        #[arg(long, default_value_t = 1)]
        order: u32,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster-based noise over a 2-D projection.
    Cbn {
        #[command(flatten)]
        input: LabelInput,
        /// Projection file (NPY, n x 2).
        #[arg(long)]
        projection: PathBuf,
        /// Subcluster centroids per class.
        #[arg(long, default_value_t = 3)]
        centroids: usize,
        /// Flip radius in projection units (omit to calibrate).
        #[arg(long, conflicts_with = "target_rate")]
        radius: Option<f64>,
        /// Calibrate the radius to this overall noise rate.
        #[arg(long)]
        target_rate: Option<f64>,
        /// Calibration tolerance around the target rate.
        #[arg(long, default_value_t = 0.01)]
        tol: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
pub struct SnlsArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[command(flatten)]
    input: LabelInput,
    /// Neighborhood size.
    #[arg(long, default_value_t = 100)]
    k: usize,
    /// Trust in the given label.
    #[arg(long, default_value_t = 0.30)]
    alpha: f64,
    #[arg(long, default_value = "cosine", value_parser = parse_metric)]
    metric: Metric,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct LraSampleArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[command(flatten)]
    input: LabelInput,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "cosine", value_parser = parse_metric)]
    metric: Metric,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
pub enum MemCommand {
    /// Draw per-model heldout inclusion masks.
    Plan {
        /// Explicit heldout indices, one per line.
        #[arg(long, conflicts_with_all = ["noisy", "clean"])]
        heldout: Option<PathBuf>,
        /// Noisy labels, for balanced heldout sampling.
        #[arg(long, requires = "clean")]
        noisy: Option<PathBuf>,
        /// Clean labels, for balanced heldout sampling.
        #[arg(long, requires = "noisy")]
        clean: Option<PathBuf>,
        /// Number of classes (needed with --noisy/--clean).
        #[arg(long)]
        num_classes: Option<usize>,
        /// Number of models (masks) to draw.
        #[arg(long)]
        models: usize,
        /// Fraction of the heldout set included per model.
        #[arg(long, default_value_t = 0.7)]
        inclusion_rate: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one learner per mask and record heldout predictions.
    Run {
        #[arg(long)]
        embeddings: PathBuf,
        #[command(flatten)]
        input: LabelInput,
        #[arg(long)]
        plan: PathBuf,
        /// Learner: "knn" or "logistic".
        #[arg(long)]
        learner: String,
        /// Neighbors for the knn learner.
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Epochs for the logistic learner.
        #[arg(long, default_value_t = 20)]
        epochs: usize,
        /// Learning rate for the logistic learner.
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
        /// L2 penalty for the logistic learner.
        #[arg(long, default_value_t = 1e-4)]
        l2: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn prediction records into a memorization table.
    Estimate {
        #[arg(long)]
        records: PathBuf,
        #[command(flatten)]
        input: LabelInput,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select incorrect labels learned without memorization.
    Select {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        noisy: PathBuf,
        #[arg(long)]
        clean: PathBuf,
        #[arg(long)]
        num_classes: usize,
        #[arg(long, default_value_t = 0.6)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
pub struct PlotArgs {
    #[arg(long)]
    projection: PathBuf,
    #[command(flatten)]
    input: LabelInput,
    /// Indices to highlight, one per line.
    #[arg(long)]
    highlight: Option<PathBuf>,
    /// Noise manifest: highlights its flips and marks CBN centroids.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Comma-separated hex colors, one per class.
    #[arg(long)]
    palette: Option<String>,
    #[arg(long, default_value_t = 800)]
    width: u32,
    #[arg(long, default_value_t = 600)]
    height: u32,
    #[arg(long)]
    legend: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
pub struct MeasureRateArgs {
    #[arg(long)]
    clean: PathBuf,
    #[arg(long)]
    noisy: PathBuf,
    #[arg(long)]
    num_classes: usize,
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    s.parse().map_err(|e: noiseforge::Error| e.to_string())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Project { method } => run_project(method),
        Command::Noise { model } => run_noise(model),
        Command::Snls(args) => run_snls(args),
        Command::LraSample(args) => run_lra_sample(args),
        Command::Mem { step } => run_mem(step),
        Command::Plot(args) => run_plot(args),
        Command::MeasureRate(args) => run_measure_rate(args),
    }
}

/// Provenance record written beside every non-noise data output.
fn write_run_manifest(
    out: &Path,
    subcommand: &str,
    params: serde_json::Value,
    seed: Option<u64>,
    inputs: &[(&str, &Path)],
    outputs: &[(&str, &Path)],
) -> Result<()> {
    let digest_map = |pairs: &[(&str, &Path)]| -> Result<BTreeMap<String, String>> {
        pairs
            .iter()
            .map(|(role, path)| {
                Ok((
                    role.to_string(),
                    dataio::file_digest(path)
                        .with_context(|| format!("digesting {}", path.display()))?,
                ))
            })
            .collect()
    };
    let manifest = json!({
        "subcommand": subcommand,
        "params": params,
        "seed": seed,
        "inputs": digest_map(inputs)?,
        "outputs": digest_map(outputs)?,
    });
    let path = manifest_path(out);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    dataio::write_bytes_atomic(&path, text.as_bytes())?;
    log::info!("manifest written to {}", path.display());
    Ok(())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn write_noise_manifest(
    mut manifest: NoiseManifest,
    target_rate: Option<f64>,
    inputs: &[(&str, &Path)],
    out: &Path,
) -> Result<()> {
    if target_rate.is_some() {
        manifest.target_rate = target_rate;
    }
    for (role, path) in inputs {
        manifest
            .source_digests
            .insert(role.to_string(), dataio::file_digest(path)?);
    }
    manifest.output_digest = Some(dataio::file_digest(out)?);
    let path = manifest_path(out);
    dataio::write_manifest(&manifest, &path)?;
    log::info!(
        "noise manifest written to {} (achieved rate {:.4})",
        path.display(),
        manifest.achieved_rate
    );
    Ok(())
}

fn parse_scalar_list(text: &str, classes: usize, flag: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(';').collect();
    let values: Vec<f64> = parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .with_context(|| format!("bad --{flag} entry {p:?}"))
        })
        .collect::<Result<_>>()?;
    match values.len() {
        1 => Ok(vec![values[0]; classes]),
        n if n == classes => Ok(values),
        n => bail!("--{flag} has {n} entries for {classes} classes"),
    }
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let centers: Vec<Vec<f64>> = args
        .centers
        .split(';')
        .map(|point| {
            point
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .with_context(|| format!("bad center {point:?}"))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    if centers.is_empty() {
        bail!("--centers must name at least one class");
    }
    let stds = parse_scalar_list(&args.std, centers.len(), "std")?;
    let counts = parse_scalar_list(&args.count, centers.len(), "count")?;

    let spec = BlobSpec {
        classes: centers
            .iter()
            .zip(&stds)
            .zip(&counts)
            .map(|((center, &std_dev), &count)| ClassBlob {
                center: center.clone(),
                std_dev,
                count: count as usize,
            })
            .collect(),
        seed: args.seed,
    };
    let (embeddings, labels) = gaussian_blobs(&spec)?;
    let labels = match args.boundary {
        Some(boundary) => label_by_vertical_boundary(&embeddings, boundary),
        None => labels,
    };

    dataio::write_embeddings(&embeddings, &args.out_embeddings)?;
    dataio::write_labels(&labels, &args.out_labels)?;
    log::info!(
        "wrote {} x {} embeddings and {} labels",
        embeddings.rows(),
        embeddings.cols(),
        labels.len()
    );
    write_run_manifest(
        &args.out_embeddings,
        "synth",
        json!({
            "centers": args.centers,
            "std": args.std,
            "count": args.count,
            "boundary": args.boundary,
        }),
        Some(args.seed),
        &[],
        &[
            ("embeddings", args.out_embeddings.as_path()),
            ("labels", args.out_labels.as_path()),
        ],
    )
}

fn run_project(method: ProjectCommand) -> Result<()> {
    match method {
        ProjectCommand::Pca {
            embeddings,
            dims,
            out,
        } => {
            let data = dataio::read_embeddings(&embeddings)?;
            let projected = pca_project(&data, dims)?;
            if dims == 2 {
                let points = (0..projected.rows())
                    .map(|i| [projected.get(i, 0), projected.get(i, 1)])
                    .collect();
                dataio::write_projection(&Projection2D::new(points)?, &out)?;
            } else {
                dataio::write_embeddings(&projected, &out)?;
            }
            write_run_manifest(
                &out,
                "project pca",
                json!({ "dims": dims }),
                None,
                &[("embeddings", embeddings.as_path())],
                &[("projection", out.as_path())],
            )
        }
        ProjectCommand::Tsne {
            embeddings,
            seed,
            perplexity,
            iterations,
            learning_rate,
            out,
        } => {
            let data = dataio::read_embeddings(&embeddings)?;
            let config = TsneConfig {
                perplexity,
                iterations,
                learning_rate,
                seed,
                ..TsneConfig::default()
            };
            let result = tsne(&data, &config)?;
            dataio::write_projection(&result.projection, &out)?;
            let final_kl = result.kl_trace.last().copied();
            log::info!("t-SNE finished with final KL {final_kl:?}");
            write_run_manifest(
                &out,
                "project tsne",
                json!({
                    "perplexity": perplexity,
                    "iterations": iterations,
                    "learning_rate": learning_rate,
                    "final_kl": final_kl,
                }),
                Some(seed),
                &[("embeddings", embeddings.as_path())],
                &[("projection", out.as_path())],
            )
        }
    }
}

fn run_noise(model: NoiseCommand) -> Result<()> {
    match model {
        NoiseCommand::Uniform {
            input,
            rate,
            seed,
            out,
        } => {
            let labels = dataio::read_labels(&input.labels, input.num_classes)?;
            let (noisy, manifest) = apply_uniform(&labels, rate, seed)?;
            dataio::write_labels(&noisy, &out)?;
            write_noise_manifest(manifest, None, &[("labels", input.labels.as_path())], &out)
        }
        NoiseCommand::Classdep {
            input,
            transition,
            seed,
            out,
        } => {
            let labels = dataio::read_labels(&input.labels, input.num_classes)?;
            let text = fs::read_to_string(&transition)
                .with_context(|| format!("reading {}", transition.display()))?;
            let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", transition.display()))?;
            let matrix = TransitionMatrix::new(rows)?;
            let (noisy, manifest) = apply_class_dependent(&labels, &matrix, seed)?;
            dataio::write_labels(&noisy, &out)?;
            write_noise_manifest(
                manifest,
                None,
                &[
                    ("labels", input.labels.as_path()),
                    ("transition", transition.as_path()),
                ],
                &out,
            )
        }
        NoiseCommand::Pmd {
            input,
            posteriors,
            scale,
            order,
            seed,
            out,
        } => {
            let labels = dataio::read_labels(&input.labels, input.num_classes)?;
            let posterior_matrix = dataio::read_soft_labels(&posteriors)?;
            let params = PmdParams {
                scale,
                order,
                posteriors: posterior_matrix,
                seed,
            };
            let (noisy, manifest) = apply_pmd(&labels, &params)?;
            dataio::write_labels(&noisy, &out)?;
            write_noise_manifest(
                manifest,
                None,
                &[
                    ("labels", input.labels.as_path()),
                    ("posteriors", posteriors.as_path()),
                ],
                &out,
            )
        }
        NoiseCommand::Cbn {
            input,
            projection,
            centroids,
            radius,
            target_rate,
            tol,
            seed,
            out,
        } => {
            let labels = dataio::read_labels(&input.labels, input.num_classes)?;
            let points = dataio::read_projection(&projection)?;
            let params = match (radius, target_rate) {
                (Some(radius), None) => CbnParams {
                    n_centroids: centroids,
                    radius,
                    seed,
                },
                (None, Some(target)) => {
                    let params = calibrate_cbn(&labels, &points, centroids, target, tol, seed)?;
                    log::info!("calibrated radius {:.6} for target {target}", params.radius);
                    params
                }
                (None, None) => bail!("cbn needs either --radius or --target-rate"),
                (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
            };
            let (noisy, manifest) = apply_cbn(&labels, &points, &params)?;
            dataio::write_labels(&noisy, &out)?;
            write_noise_manifest(
                manifest,
                target_rate,
                &[
                    ("labels", input.labels.as_path()),
                    ("projection", projection.as_path()),
                ],
                &out,
            )
        }
    }
}

fn run_snls(args: SnlsArgs) -> Result<()> {
    let embeddings = dataio::read_embeddings(&args.embeddings)?;
    let labels = dataio::read_labels(&args.input.labels, args.input.num_classes)?;
    let config = SnlsConfig {
        k: args.k,
        alpha: args.alpha,
        metric: args.metric,
    };
    let soft = snls(&embeddings, &labels, &config)?;
    dataio::write_soft_labels(&soft, &args.out)?;
    write_run_manifest(
        &args.out,
        "snls",
        json!({
            "k": args.k,
            "alpha": args.alpha,
            "metric": format!("{:?}", args.metric),
        }),
        None,
        &[
            ("embeddings", args.embeddings.as_path()),
            ("labels", args.input.labels.as_path()),
        ],
        &[("soft_labels", args.out.as_path())],
    )
}

fn run_lra_sample(args: LraSampleArgs) -> Result<()> {
    let embeddings = dataio::read_embeddings(&args.embeddings)?;
    let labels = dataio::read_labels(&args.input.labels, args.input.num_classes)?;
    let sampled = lra_sample(&embeddings, &labels, args.k, args.metric, args.seed)?;
    dataio::write_labels(&sampled, &args.out)?;
    write_run_manifest(
        &args.out,
        "lra-sample",
        json!({ "k": args.k, "metric": format!("{:?}", args.metric) }),
        Some(args.seed),
        &[
            ("embeddings", args.embeddings.as_path()),
            ("labels", args.input.labels.as_path()),
        ],
        &[("labels", args.out.as_path())],
    )
}

fn read_index_file(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .map(|(lineno, line)| {
            line.trim()
                .parse::<usize>()
                .with_context(|| format!("{}:{}: bad index {line:?}", path.display(), lineno + 1))
        })
        .collect()
}

fn run_mem(step: MemCommand) -> Result<()> {
    match step {
        MemCommand::Plan {
            heldout,
            noisy,
            clean,
            num_classes,
            models,
            inclusion_rate,
            seed,
            out,
        } => {
            let heldout_indices = match (heldout, noisy, clean) {
                (Some(path), None, None) => read_index_file(&path)?,
                (None, Some(noisy_path), Some(clean_path)) => {
                    let c = num_classes.ok_or_else(|| {
                        anyhow::anyhow!("--num-classes required with --noisy/--clean")
                    })?;
                    let noisy_labels = dataio::read_labels(&noisy_path, c)?;
                    let clean_labels = dataio::read_labels(&clean_path, c)?;
                    balanced_heldout(&noisy_labels, &clean_labels, seed)?
                }
                _ => bail!("mem plan needs either --heldout or --noisy with --clean"),
            };
            let plan = plan_subsets(&heldout_indices, models, inclusion_rate, seed)?;
            memorization::write_plan(&plan, &out)?;
            log::info!(
                "planned {} masks over {} heldout examples",
                plan.num_models(),
                heldout_indices.len()
            );
            write_run_manifest(
                &out,
                "mem plan",
                json!({
                    "models": models,
                    "inclusion_rate": inclusion_rate,
                    "heldout_size": heldout_indices.len(),
                }),
                Some(seed),
                &[],
                &[("plan", out.as_path())],
            )
        }
        MemCommand::Run {
            embeddings,
            input,
            plan,
            learner,
            k,
            epochs,
            learning_rate,
            l2,
            seed,
            out,
        } => {
            let data = dataio::read_embeddings(&embeddings)?;
            let labels = dataio::read_labels(&input.labels, input.num_classes)?;
            let plan_data = memorization::read_plan(&plan)?;
            let learner = match learner.as_str() {
                "knn" => Learner::KnnClassifier { k },
                "logistic" => Learner::LogisticRegression {
                    epochs,
                    learning_rate,
                    l2,
                    seed,
                },
                other => {
                    return Err(noiseforge::Error::Argument(format!(
                        "unknown learner {other:?}, expected \"knn\" or \"logistic\""
                    ))
                    .into())
                }
            };
            let records = run_learners(&data, &labels, &plan_data, &learner)?;
            dataio::write_prediction_records(&records, &out)?;
            log::info!("recorded {} models", records.records().len());
            write_run_manifest(
                &out,
                "mem run",
                json!({
                    "learner": format!("{learner:?}"),
                }),
                Some(seed),
                &[
                    ("embeddings", embeddings.as_path()),
                    ("labels", input.labels.as_path()),
                    ("plan", plan.as_path()),
                ],
                &[("records", out.as_path())],
            )
        }
        MemCommand::Estimate {
            records,
            input,
            out,
        } => {
            let record_set = dataio::read_prediction_records(&records)?;
            let all_labels = dataio::read_labels(&input.labels, input.num_classes)?;
            let heldout_labels = LabelVector::new(
                record_set
                    .heldout_indices()
                    .iter()
                    .map(|&i| {
                        if i < all_labels.len() {
                            Ok(all_labels.get(i))
                        } else {
                            Err(noiseforge::Error::Argument(format!(
                                "heldout index {i} outside labels file of length {}",
                                all_labels.len()
                            )))
                        }
                    })
                    .collect::<noiseforge::Result<Vec<usize>>>()?,
                input.num_classes,
            )?;
            let table = estimate_memorization(&record_set, &heldout_labels)?;
            memorization::write_table_csv(&table, &out)?;
            write_run_manifest(
                &out,
                "mem estimate",
                json!({ "models": record_set.records().len() }),
                None,
                &[
                    ("records", records.as_path()),
                    ("labels", input.labels.as_path()),
                ],
                &[("table", out.as_path())],
            )
        }
        MemCommand::Select {
            table,
            noisy,
            clean,
            num_classes,
            threshold,
            out,
        } => {
            let table_data = memorization::read_table_csv(&table)?;
            let noisy_labels = dataio::read_labels(&noisy, num_classes)?;
            let clean_labels = dataio::read_labels(&clean, num_classes)?;
            let selected = memorization::select_learned_incorrect(
                &table_data,
                &noisy_labels,
                &clean_labels,
                threshold,
            )?;
            let mut text = String::new();
            for i in &selected {
                text.push_str(&i.to_string());
                text.push('\n');
            }
            dataio::write_bytes_atomic(&out, text.as_bytes())?;
            log::info!("selected {} learned incorrect labels", selected.len());
            write_run_manifest(
                &out,
                "mem select",
                json!({ "threshold": threshold, "selected": selected.len() }),
                None,
                &[
                    ("table", table.as_path()),
                    ("noisy", noisy.as_path()),
                    ("clean", clean.as_path()),
                ],
                &[("selected", out.as_path())],
            )
        }
    }
}

fn run_plot(args: PlotArgs) -> Result<()> {
    let projection = dataio::read_projection(&args.projection)?;
    let labels = dataio::read_labels(&args.input.labels, args.input.num_classes)?;

    let mut highlight = Vec::new();
    let mut centroids = Vec::new();
    if let Some(path) = &args.highlight {
        highlight = read_index_file(path)?;
    }
    if let Some(path) = &args.manifest {
        let manifest = dataio::read_manifest(path)?;
        highlight.extend(&manifest.flipped_indices);
        highlight.sort_unstable();
        highlight.dedup();
        if let Some(value) = manifest.params.get("subcluster_centroids") {
            let per_class: Vec<Vec<[f64; 2]>> = serde_json::from_value(value.clone())
                .context("manifest subcluster_centroids are malformed")?;
            centroids = per_class.into_iter().flatten().collect();
        }
    }

    let palette = match &args.palette {
        Some(text) => text.split(',').map(|c| c.trim().to_string()).collect(),
        None => default_palette(args.input.num_classes),
    };

    let spec = PlotSpec {
        points: &projection,
        labels: &labels,
        highlight,
        palette,
        width: args.width,
        height: args.height,
        legend: args.legend,
        centroids,
    };
    let svg = render_scatter(&spec)?;
    dataio::write_bytes_atomic(&args.out, svg.as_bytes())?;
    let mut inputs: Vec<(&str, &Path)> = vec![
        ("projection", args.projection.as_path()),
        ("labels", args.input.labels.as_path()),
    ];
    if let Some(path) = &args.manifest {
        inputs.push(("manifest", path.as_path()));
    }
    if let Some(path) = &args.highlight {
        inputs.push(("highlight", path.as_path()));
    }
    write_run_manifest(
        &args.out,
        "plot",
        json!({
            "width": args.width,
            "height": args.height,
            "legend": args.legend,
        }),
        None,
        &inputs,
        &[("svg", args.out.as_path())],
    )
}

fn run_measure_rate(args: MeasureRateArgs) -> Result<()> {
    let clean = dataio::read_labels(&args.clean, args.num_classes)?;
    let noisy = dataio::read_labels(&args.noisy, args.num_classes)?;
    let rate = measure_rate(&clean, &noisy)?;
    println!("{rate}");
    Ok(())
}
