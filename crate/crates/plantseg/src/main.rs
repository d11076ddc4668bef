use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use plantseg::classify::{
    classify_knn, classify_passthrough, extract_all_features, inject_label_noise, refine_context,
    NoiseSpec, RefineParams, TrainingFeature,
};
use plantseg::cost::{cost_report, FacilityStats};
use plantseg::error::{Error, Result};
use plantseg::evaluate::{match_instances, pr_vs_iou, EvalParams};
use plantseg::exec;
use plantseg::geometry::build_index;
use plantseg::instance::{
    bfs_block, bfs_components, detect_boundaries, merge_blocks, sweep_mu, BfsParams, BoundaryMode,
};
use plantseg::io::{read_xyz, write_labeled, Format};
use plantseg::labels::{ClassLabel, Labeling};
use plantseg::partition::{partition, PartitionParams};
use plantseg::pipeline::{run_pipeline, PipelineConfig};
use plantseg::report;
use plantseg::synth::{generate_scene, SceneSpec};

const THREADS_ENV: &str = "PLANTSEG_THREADS";

#[derive(Parser)]
#[command(
    name = "plantseg",
    version,
    about = "Class/instance segmentation toolkit for industrial point clouds"
)]
struct Cli {
    /// Worker threads (0 = all cores); overrides the PLANTSEG_THREADS
    /// environment variable.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled scene from a TOML spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a cloud into windows and overlapping blocks; prints a summary.
    Partition {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        window_size: f64,
        #[arg(long, default_value_t = 1.0)]
        block_size: f64,
        #[arg(long, default_value_t = 0.5)]
        block_stride: f64,
        /// Optional JSON summary output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assign class labels to a ground-truth-labeled cloud.
    Classify(ClassifyArgs),
    /// Grow instances inside class clusters by radius-bounded BFS.
    Segment(SegmentArgs),
    /// Detect boundary points (mixed-neighborhood rule).
    Boundaries {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.04)]
        radius: f64,
        #[arg(long, value_enum, default_value_t = BoundaryModeArg::Predicted)]
        mode: BoundaryModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predicted instances against ground truth.
    Evaluate {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        iou: f64,
        /// IoU threshold sweep as start:stop:step, e.g. 0.05:0.95:0.05.
        #[arg(long)]
        sweep: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate instance quality across minimum-instance-size values.
    SweepMu {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Comma-separated list, e.g. 20,50,100,200,400.
        #[arg(long, value_delimiter = ',', required = true)]
        mu: Vec<usize>,
        #[arg(long, default_value_t = 0.25)]
        iou: f64,
        #[arg(long, default_value_t = 0.04)]
        epsilon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Manual-labor savings from per-class totals and recalls.
    CostReport {
        /// JSON facility stats: per-class totals and recalls.
        #[arg(long)]
        stats: PathBuf,
        /// Minutes of manual work per shape.
        #[arg(long, conflicts_with = "total_hours")]
        rate_minutes: Option<f64>,
        /// Observed total manual hours (per-shape rate is inferred).
        #[arg(long)]
        total_hours: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline from a config file into a run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Passthrough)]
    mode: ModeArg,
    /// Diagonal for the synthetic confusion matrix (noise mode).
    #[arg(long, default_value_t = 0.8)]
    diagonal: f64,
    /// JSON 8x8 row-stochastic confusion matrix (noise mode).
    #[arg(long)]
    noise_matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0.1)]
    feature_radius: f64,
    /// Fraction of ground-truth labels used as k-NN training data.
    #[arg(long, default_value_t = 0.1)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    refine_iters: usize,
    #[arg(long, default_value_t = 0.8)]
    confidence_threshold: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.04)]
    epsilon: f64,
    #[arg(long, default_value_t = 200)]
    mu: usize,
    #[arg(long, default_value_t = 0.03)]
    cylinder_epsilon: f64,
    #[arg(long, default_value_t = 50)]
    cylinder_mu: usize,
    #[arg(long)]
    no_boundary_constraint: bool,
    #[arg(long, default_value_t = 0.04)]
    boundary_radius: f64,
    /// Process overlapping blocks and merge instead of one whole-cloud pass.
    #[arg(long)]
    blocks: bool,
    #[arg(long, default_value_t = 10.0)]
    window_size: f64,
    #[arg(long, default_value_t = 1.0)]
    block_size: f64,
    #[arg(long, default_value_t = 0.5)]
    block_stride: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Passthrough,
    Noise,
    Knn,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BoundaryModeArg {
    Gt,
    Predicted,
}

fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let err = || Error::InvalidSweep;
    if parts.len() != 3 {
        return Err(err());
    }
    let start: f64 = parts[0].parse().map_err(|_| err())?;
    let stop: f64 = parts[1].parse().map_err(|_| err())?;
    let step: f64 = parts[2].parse().map_err(|_| err())?;
    if !(step > 0.0 && stop >= start) {
        return Err(err());
    }
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let v = start + k as f64 * step;
        if v > stop + 1e-9 {
            break;
        }
        out.push(v);
        k += 1;
    }
    Ok(out)
}

fn read_labeled(path: &PathBuf) -> Result<(plantseg::geometry::PointCloud, Labeling)> {
    let (cloud, labeling) = read_xyz(path, true)?;
    Ok((cloud, labeling.ok_or(Error::MissingLabels("class"))?))
}

fn emit_or_print<T: serde::Serialize>(kind: &str, body: &T, out: &Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => report::emit(kind, body, path),
        None => {
            print!("{}", report::render(kind, body)?);
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { spec, out } => {
            let text = fs::read_to_string(&spec).map_err(|e| Error::io(&spec, e))?;
            let scene = SceneSpec::from_toml(&text)?;
            let (cloud, labeling) = generate_scene(&scene)?;
            write_labeled(&out, &cloud, &labeling, Format::Xyz)?;
            eprintln!("wrote {} points to {}", cloud.len(), out.display());
            Ok(())
        }
        Command::Partition {
            input,
            window_size,
            block_size,
            block_stride,
            out,
        } => {
            let (cloud, _) = read_xyz(&input, true)?;
            let grid = partition(
                &cloud,
                &PartitionParams {
                    window_size,
                    block_size,
                    block_stride,
                },
            )?;
            #[derive(serde::Serialize)]
            struct Summary {
                points: usize,
                windows: usize,
                blocks: usize,
                largest_block: usize,
            }
            let summary = Summary {
                points: cloud.len(),
                windows: grid.windows.len(),
                blocks: grid.blocks.len(),
                largest_block: grid.blocks.iter().map(|b| b.indices.len()).max().unwrap_or(0),
            };
            emit_or_print("partition-summary", &summary, &out)
        }
        Command::Classify(args) => {
            let (cloud, gt) = read_labeled(&args.input)?;
            let mut predicted = match args.mode {
                ModeArg::Passthrough => classify_passthrough(&gt),
                ModeArg::Noise => {
                    let spec = match &args.noise_matrix {
                        Some(path) => {
                            let text =
                                fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                            let confusion: [[f64; 8]; 8] = serde_json::from_str(&text)
                                .map_err(|e| Error::InvalidNoiseSpec(e.to_string()))?;
                            NoiseSpec {
                                confusion,
                                seed: args.seed,
                            }
                        }
                        None => NoiseSpec::uniform_diagonal(args.diagonal, args.seed),
                    };
                    inject_label_noise(&gt, &spec)?
                }
                ModeArg::Knn => {
                    let index = build_index(&cloud, None)?;
                    let features = extract_all_features(&cloud, &index, args.feature_radius);
                    let stride = (1.0 / args.train_fraction).ceil().max(1.0) as usize;
                    let training: Vec<TrainingFeature> = features
                        .iter()
                        .enumerate()
                        .step_by(stride)
                        .filter_map(|(i, f)| {
                            f.as_ref().map(|f| TrainingFeature {
                                vector: f.vector(),
                                label: gt.class[i],
                            })
                        })
                        .collect();
                    classify_knn(&features, &training, args.k)?
                }
            };
            if args.refine_iters > 0 {
                let index = build_index(&cloud, None)?;
                predicted = refine_context(
                    &predicted,
                    &cloud,
                    &index,
                    &RefineParams {
                        radius: args.feature_radius.min(0.04),
                        iterations: args.refine_iters,
                        confidence_threshold: args.confidence_threshold,
                    },
                );
            }
            write_labeled(&args.out, &cloud, &predicted, Format::Xyz)
        }
        Command::Segment(args) => {
            let (cloud, mut labeling) = read_labeled(&args.input)?;
            let params = BfsParams {
                epsilon: args.epsilon,
                mu_min_points: args.mu,
                per_class_overrides: vec![(
                    ClassLabel::Cylinder,
                    args.cylinder_epsilon,
                    args.cylinder_mu,
                )],
                boundary_constraint: !args.no_boundary_constraint,
                boundary_radius: args.boundary_radius,
            };
            labeling.boundary = detect_boundaries(
                &cloud,
                &labeling,
                params.boundary_radius,
                BoundaryMode::PredictedClass,
            )?;
            let result = if args.blocks {
                let grid = partition(
                    &cloud,
                    &PartitionParams {
                        window_size: args.window_size,
                        block_size: args.block_size,
                        block_stride: args.block_stride,
                    },
                )?;
                let refs: Vec<(usize, &[u32])> = grid
                    .blocks
                    .iter()
                    .enumerate()
                    .map(|(i, b)| (i, b.indices.as_slice()))
                    .collect();
                let per_block = exec::map_slice(&refs, |(id, indices)| {
                    bfs_block(&cloud, &labeling, &params, *id, indices)
                });
                merge_blocks(&cloud, &labeling, &params, &per_block)?
            } else {
                bfs_components(&cloud, &labeling, &params)?
            };
            write_labeled(&args.out, &cloud, &result.labeling, Format::Xyz)?;
            eprintln!(
                "{} instances, {} undersized components discarded",
                result.component_count, result.discarded
            );
            Ok(())
        }
        Command::Boundaries {
            input,
            radius,
            mode,
            out,
        } => {
            let (cloud, labeling) = read_labeled(&input)?;
            let mode = match mode {
                BoundaryModeArg::Gt => BoundaryMode::GtInstance,
                BoundaryModeArg::Predicted => BoundaryMode::PredictedClass,
            };
            let flags = detect_boundaries(&cloud, &labeling, radius, mode)?;
            #[derive(serde::Serialize)]
            struct Boundaries {
                radius: f64,
                count: usize,
                indices: Vec<u32>,
            }
            let indices: Vec<u32> = flags
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| i as u32)
                .collect();
            emit_or_print(
                "boundaries",
                &Boundaries {
                    radius,
                    count: indices.len(),
                    indices,
                },
                &out,
            )
        }
        Command::Evaluate {
            gt,
            pred,
            iou,
            sweep,
            out,
        } => {
            let (_, gt_labels) = read_labeled(&gt)?;
            let (_, pred_labels) = read_labeled(&pred)?;
            match sweep {
                Some(text) => {
                    let thresholds = parse_sweep(&text)?;
                    let curve = pr_vs_iou(&pred_labels, &gt_labels, &thresholds)?;
                    emit_or_print("pr-sweep", &curve, &out)
                }
                None => {
                    let params = EvalParams {
                        iou_threshold: iou,
                        threshold_sweep: vec![],
                    };
                    let report = match_instances(&pred_labels, &gt_labels, &params)?;
                    emit_or_print("evaluation", &report, &out)
                }
            }
        }
        Command::SweepMu {
            input,
            gt,
            mu,
            iou,
            epsilon,
            out,
        } => {
            let (cloud, mut labeling) = read_labeled(&input)?;
            let (_, gt_labels) = read_labeled(&gt)?;
            let params = BfsParams {
                epsilon,
                ..BfsParams::default()
            };
            labeling.boundary = detect_boundaries(
                &cloud,
                &labeling,
                params.boundary_radius,
                BoundaryMode::PredictedClass,
            )?;
            let curve = sweep_mu(
                &cloud,
                &labeling,
                &params,
                &mu,
                &gt_labels,
                &EvalParams {
                    iou_threshold: iou,
                    threshold_sweep: vec![],
                },
            )?;
            emit_or_print("mu-sweep", &curve, &out)
        }
        Command::CostReport {
            stats,
            rate_minutes,
            total_hours,
            out,
        } => {
            let text = fs::read_to_string(&stats).map_err(|e| Error::io(&stats, e))?;
            let mut facility: FacilityStats = serde_json::from_str(&text).map_err(|e| {
                Error::Parse {
                    path: stats.clone(),
                    line: e.line(),
                    msg: e.to_string(),
                }
            })?;
            if rate_minutes.is_some() {
                facility.per_shape_minutes = rate_minutes;
            }
            if total_hours.is_some() {
                facility.total_hours = total_hours;
            }
            let report = cost_report(&facility)?;
            emit_or_print("cost-report", &report, &out)
        }
        Command::Run { config, out } => {
            let text = fs::read_to_string(&config).map_err(|e| Error::io(&config, e))?;
            let config = PipelineConfig::from_toml(&text)?;
            let artifacts = run_pipeline(&config, &out)?;
            eprintln!("run complete: {}", artifacts.run_dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.parse().ok())
    });
    let outcome = exec::with_parallelism(threads.unwrap_or(0), || run(cli));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
