//! Full pipeline orchestration: input → classify → segment → evaluate, with
//! every stage handed off through files in a run directory so each stage is
//! independently inspectable and resumable. A manifest records the config
//! hash and stage timings.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::{
    classify_knn, classify_passthrough, extract_all_features, inject_label_noise, refine_context,
    NoiseSpec, RefineParams, TrainingFeature,
};
use crate::error::{Error, Result};
use crate::evaluate::{class_metrics, match_instances, pr_vs_iou, EvalParams};
use crate::exec;
use crate::geometry::{build_index, PointCloud};
use crate::instance::{
    bfs_block, bfs_components, detect_boundaries, merge_blocks, BfsParams, BoundaryMode,
    InstanceResult,
};
use crate::io::{read_xyz, write_labeled, Format};
use crate::labels::{ClassLabel, Labeling};
use crate::partition::{partition, PartitionParams};
use crate::report;
use crate::synth::{generate_scene, SceneSpec};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Scene description (TOML); generated on the fly with exact ground truth.
    pub scene: Option<PathBuf>,
    /// Pre-labeled cloud (class + instance columns).
    pub cloud: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifyMode {
    Passthrough,
    Noise,
    Knn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyConfig {
    pub mode: ClassifyMode,
    /// Diagonal of the confusion matrix for `noise` mode.
    pub diagonal: f64,
    /// Full 8x8 row-stochastic confusion matrix (JSON file); overrides
    /// `diagonal`.
    pub noise_matrix: Option<PathBuf>,
    pub k: usize,
    pub feature_radius: f64,
    /// Fraction of points whose ground-truth labels seed the k-NN training
    /// set (deterministic stride subsample).
    pub train_fraction: f64,
    pub refine_iterations: usize,
    pub confidence_threshold: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            mode: ClassifyMode::Passthrough,
            diagonal: 0.8,
            noise_matrix: None,
            k: 5,
            feature_radius: 0.1,
            train_fraction: 0.1,
            refine_iterations: 0,
            confidence_threshold: 0.8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentConfig {
    pub epsilon: f64,
    pub mu: usize,
    pub cylinder_epsilon: f64,
    pub cylinder_mu: usize,
    pub boundary_constraint: bool,
    pub boundary_radius: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        let p = BfsParams::default();
        SegmentConfig {
            epsilon: p.epsilon,
            mu: p.mu_min_points,
            cylinder_epsilon: p.epsilon_for(ClassLabel::Cylinder),
            cylinder_mu: p.mu_for(ClassLabel::Cylinder),
            boundary_constraint: p.boundary_constraint,
            boundary_radius: p.boundary_radius,
        }
    }
}

impl SegmentConfig {
    pub fn to_params(&self) -> BfsParams {
        BfsParams {
            epsilon: self.epsilon,
            mu_min_points: self.mu,
            per_class_overrides: vec![(
                ClassLabel::Cylinder,
                self.cylinder_epsilon,
                self.cylinder_mu,
            )],
            boundary_constraint: self.boundary_constraint,
            boundary_radius: self.boundary_radius,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    pub iou: f64,
    /// Optional IoU thresholds for a precision/recall sweep report.
    pub sweep: Option<Vec<f64>>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            iou: 0.25,
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    #[serde(default)]
    pub classify: ClassifyConfig,
    #[serde(default)]
    pub segment: SegmentConfig,
    /// When present, segmentation runs per overlapping block and merges;
    /// otherwise BFS runs over the whole cloud.
    #[serde(default)]
    pub partition: Option<PartitionParams>,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    /// Worker threads; 0 means the library default (all cores).
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default)]
    pub seed: u64,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<PipelineConfig> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.input.scene, &self.input.cloud) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(Error::InvalidConfig(
                    "input requires exactly one of `scene` or `cloud`".into(),
                ))
            }
        }
        if !(0.0..=1.0).contains(&self.classify.diagonal) {
            return Err(Error::InvalidConfig("classify.diagonal outside [0, 1]".into()));
        }
        if !(0.0 < self.classify.train_fraction && self.classify.train_fraction <= 1.0) {
            return Err(Error::InvalidConfig(
                "classify.train_fraction outside (0, 1]".into(),
            ));
        }
        self.segment.to_params().validate()?;
        if let Some(p) = &self.partition {
            p.validate()?;
        }
        if !(self.evaluate.iou > 0.0 && self.evaluate.iou <= 1.0) {
            return Err(Error::InvalidConfig("evaluate.iou outside (0, 1]".into()));
        }
        Ok(())
    }

    fn canonical_hash(&self) -> String {
        // serialization order is fixed by the struct definition
        let text = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        format!("{:x}", hasher.finalize())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: u128,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_sha256: String,
    pub parallelism: usize,
    pub timings: Vec<StageTiming>,
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub run_dir: PathBuf,
    pub ground_truth: PathBuf,
    pub classified: PathBuf,
    pub segmented: PathBuf,
    pub evaluation: PathBuf,
    pub class_metrics: PathBuf,
    pub sweep: Option<PathBuf>,
    pub manifest: PathBuf,
    pub result: InstanceResult,
}

fn load_input(config: &PipelineConfig) -> Result<(PointCloud, Labeling)> {
    if let Some(scene_path) = &config.input.scene {
        let text = fs::read_to_string(scene_path).map_err(|e| Error::io(scene_path, e))?;
        let spec = SceneSpec::from_toml(&text)?;
        generate_scene(&spec)
    } else {
        let path = config.input.cloud.as_ref().expect("validated input");
        let (cloud, labeling) = read_xyz(path, true)?;
        let labeling = labeling.ok_or(Error::MissingLabels("instance"))?;
        Ok((cloud, labeling))
    }
}

fn classify_stage(
    config: &ClassifyConfig,
    seed: u64,
    cloud: &PointCloud,
    gt: &Labeling,
) -> Result<Labeling> {
    let mut predicted = match config.mode {
        ClassifyMode::Passthrough => classify_passthrough(gt),
        ClassifyMode::Noise => {
            let spec = match &config.noise_matrix {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                    let confusion: [[f64; 8]; 8] = serde_json::from_str(&text)
                        .map_err(|e| Error::InvalidNoiseSpec(e.to_string()))?;
                    NoiseSpec { confusion, seed }
                }
                None => NoiseSpec::uniform_diagonal(config.diagonal, seed),
            };
            inject_label_noise(gt, &spec)?
        }
        ClassifyMode::Knn => {
            let index = build_index(cloud, None)?;
            let features = extract_all_features(cloud, &index, config.feature_radius);
            let stride = (1.0 / config.train_fraction).ceil().max(1.0) as usize;
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
            classify_knn(&features, &training, config.k)?
        }
    };
    if config.refine_iterations > 0 {
        let index = build_index(cloud, None)?;
        predicted = refine_context(
            &predicted,
            cloud,
            &index,
            &RefineParams {
                radius: config.feature_radius.min(0.04),
                iterations: config.refine_iterations,
                confidence_threshold: config.confidence_threshold,
            },
        );
    }
    Ok(predicted)
}

fn segment_stage(
    config: &PipelineConfig,
    cloud: &PointCloud,
    predicted: &mut Labeling,
) -> Result<InstanceResult> {
    let params = config.segment.to_params();
    predicted.boundary = detect_boundaries(
        cloud,
        predicted,
        params.boundary_radius,
        BoundaryMode::PredictedClass,
    )?;
    match &config.partition {
        Some(pp) => {
            let grid = partition(cloud, pp)?;
            let block_refs: Vec<(usize, &[u32])> = grid
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| (i, b.indices.as_slice()))
                .collect();
            let per_block = exec::map_slice(&block_refs, |(id, indices)| {
                bfs_block(cloud, predicted, &params, *id, indices)
            });
            merge_blocks(cloud, predicted, &params, &per_block)
        }
        None => bfs_components(cloud, predicted, &params),
    }
}

pub fn run_pipeline(config: &PipelineConfig, run_dir: &Path) -> Result<RunArtifacts> {
    config.validate()?;
    exec::with_parallelism(config.parallelism, || run_inner(config, run_dir))
}

fn run_inner(config: &PipelineConfig, run_dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(run_dir).map_err(|e| Error::io(run_dir, e))?;
    let mut timings = Vec::new();
    let mut timed = |stage: &str, start: Instant| {
        timings.push(StageTiming {
            stage: stage.to_string(),
            millis: start.elapsed().as_millis(),
        });
    };

    let t = Instant::now();
    let (cloud, gt) = load_input(config)?;
    let ground_truth = run_dir.join("ground_truth.xyz");
    write_labeled(&ground_truth, &cloud, &gt, Format::Xyz)?;
    timed("input", t);

    let t = Instant::now();
    let mut predicted = classify_stage(&config.classify, config.seed, &cloud, &gt)?;
    let classified = run_dir.join("classified.xyz");
    write_labeled(&classified, &cloud, &predicted, Format::Xyz)?;
    timed("classify", t);

    // file handoff: the segment stage re-reads the classify output
    let t = Instant::now();
    let (cloud, reread) = read_xyz(&classified, true)?;
    let mut reread = reread.ok_or(Error::MissingLabels("class"))?;
    reread.confidence = predicted.confidence.clone();
    predicted = reread;
    let result = segment_stage(config, &cloud, &mut predicted)?;
    let segmented = run_dir.join("segmented.xyz");
    write_labeled(&segmented, &cloud, &result.labeling, Format::Xyz)?;
    timed("segment", t);

    let t = Instant::now();
    let eval = EvalParams {
        iou_threshold: config.evaluate.iou,
        threshold_sweep: config.evaluate.sweep.clone().unwrap_or_default(),
    };
    let eval_report = match_instances(&result.labeling, &gt, &eval)?;
    let evaluation = run_dir.join("evaluation.json");
    report::emit("evaluation", &eval_report, &evaluation)?;
    let cm = class_metrics(&predicted.class, &gt.class);
    let class_metrics_path = run_dir.join("class_metrics.json");
    report::emit("class-metrics", &cm, &class_metrics_path)?;
    let sweep = match &config.evaluate.sweep {
        Some(thresholds) if !thresholds.is_empty() => {
            let curve = pr_vs_iou(&result.labeling, &gt, thresholds)?;
            let path = run_dir.join("pr_sweep.json");
            report::emit("pr-sweep", &curve, &path)?;
            Some(path)
        }
        _ => None,
    };
    timed("evaluate", t);

    let manifest = Manifest {
        schema_version: report::SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: config.canonical_hash(),
        parallelism: config.parallelism,
        timings,
    };
    let manifest_path = run_dir.join("manifest.json");
    report::emit("manifest", &manifest, &manifest_path)?;

    Ok(RunArtifacts {
        run_dir: run_dir.to_path_buf(),
        ground_truth,
        classified,
        segmented,
        evaluation,
        class_metrics: class_metrics_path,
        sweep,
        manifest: manifest_path,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{ObjectSpec, Shape};
    use tempfile::tempdir;

    fn scene_toml() -> String {
        let spec = SceneSpec {
            seed: 11,
            objects: vec![
                ObjectSpec {
                    shape: Shape::Cylinder {
                        radius: 0.08,
                        length: 1.2,
                    },
                    center: [0.0, 0.0, 0.0],
                    yaw: 0.0,
                    density: 12_000.0,
                },
                ObjectSpec {
                    shape: Shape::IBeam {
                        depth: 0.3,
                        flange: 0.15,
                        length: 1.5,
                    },
                    center: [2.0, 1.0, 0.0],
                    yaw: 0.4,
                    density: 8_000.0,
                },
            ],
            noise_sigma: 0.0,
            occlusion: vec![],
            drop_fraction: 0.0,
            clutter_points: 0,
            boundary_radius: 0.04,
        };
        toml::to_string(&spec).unwrap()
    }

    fn base_config(scene: &Path) -> PipelineConfig {
        PipelineConfig {
            input: InputConfig {
                scene: Some(scene.to_path_buf()),
                cloud: None,
            },
            classify: ClassifyConfig::default(),
            segment: SegmentConfig::default(),
            partition: None,
            evaluate: EvaluateConfig::default(),
            parallelism: 0,
            seed: 3,
        }
    }

    #[test]
    fn identity_pipeline_is_perfect() {
        let dir = tempdir().unwrap();
        let scene = dir.path().join("scene.toml");
        fs::write(&scene, scene_toml()).unwrap();
        let config = base_config(&scene);
        let artifacts = run_pipeline(&config, &dir.path().join("run")).unwrap();
        let report: crate::evaluate::EvalReport =
            report::read("evaluation", &artifacts.evaluation).unwrap();
        assert_eq!(report.mean_precision, 1.0);
        assert_eq!(report.mean_recall, 1.0);
        let manifest: Manifest = report::read("manifest", &artifacts.manifest).unwrap();
        assert_eq!(manifest.config_sha256.len(), 64);
        assert_eq!(manifest.timings.len(), 4);
    }

    #[test]
    fn missing_input_names_path() {
        let dir = tempdir().unwrap();
        let mut config = base_config(&dir.path().join("absent.toml"));
        config.input.scene = Some(dir.path().join("absent.toml"));
        let err = run_pipeline(&config, &dir.path().join("run")).unwrap_err();
        assert!(err.to_string().contains("absent.toml"), "{err}");
    }

    #[test]
    fn same_config_twice_is_byte_identical() {
        let dir = tempdir().unwrap();
        let scene = dir.path().join("scene.toml");
        fs::write(&scene, scene_toml()).unwrap();
        let mut config = base_config(&scene);
        config.classify.mode = ClassifyMode::Noise;
        config.partition = Some(PartitionParams::default());
        let a = run_pipeline(&config, &dir.path().join("a")).unwrap();
        let b = run_pipeline(&config, &dir.path().join("b")).unwrap();
        for (x, y) in [
            (&a.classified, &b.classified),
            (&a.segmented, &b.segmented),
            (&a.evaluation, &b.evaluation),
        ] {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let text = "parallelism = 2\nbogus = 1\n[input]\nscene = \"x\"\n";
        assert!(PipelineConfig::from_toml(text).is_err());
    }

    #[test]
    fn input_must_be_exactly_one_source() {
        let text = "[input]\n";
        assert!(PipelineConfig::from_toml(text).is_err());
        let text = "[input]\nscene = \"a\"\ncloud = \"b\"\n";
        assert!(PipelineConfig::from_toml(text).is_err());
    }
}
