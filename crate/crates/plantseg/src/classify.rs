//! Per-point class labels with confidence: ground-truth passthrough,
//! seeded label-noise simulation, a k-NN baseline over local eigenfeatures,
//! and contextual refinement.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{PointCloud, SpatialIndex};
use crate::labels::{ClassLabel, Labeling, CLASS_COUNT};

/// Local neighborhood shape descriptors from the covariance eigenvalues
/// `l1 >= l2 >= l3`: linearity `(l1-l2)/l1`, planarity `(l2-l3)/l1`,
/// scattering `l3/l1`, curvature `l3/(l1+l2+l3)`.
#[derive(Debug, Clone, Copy)]
pub struct EigenFeatures {
    pub linearity: f64,
    pub planarity: f64,
    pub scattering: f64,
    pub curvature: f64,
    pub normal: Vector3<f64>,
    pub neighborhood_size: usize,
}

impl EigenFeatures {
    /// Feature-space vector used by the k-NN classifier.
    pub fn vector(&self) -> [f64; 5] {
        [
            self.linearity,
            self.planarity,
            self.scattering,
            self.curvature,
            self.normal.z.abs(),
        ]
    }
}

/// Copies ground-truth class labels, sets confidence to 1.0 and clears
/// instance and boundary labels.
pub fn classify_passthrough(gt: &Labeling) -> Labeling {
    let n = gt.len();
    Labeling {
        class: gt.class.clone(),
        instance: vec![0; n],
        confidence: vec![1.0; n],
        boundary: vec![false; n],
    }
}

/// Row-stochastic 8x8 confusion matrix plus a seed; row `c` gives the
/// distribution of predicted labels for true class `c`.
#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub confusion: [[f64; CLASS_COUNT]; CLASS_COUNT],
    pub seed: u64,
}

impl NoiseSpec {
    pub fn identity(seed: u64) -> NoiseSpec {
        let mut confusion = [[0.0; CLASS_COUNT]; CLASS_COUNT];
        for (i, row) in confusion.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        NoiseSpec { confusion, seed }
    }

    /// Diagonal `p`, remaining mass split uniformly over the other classes.
    pub fn uniform_diagonal(p: f64, seed: u64) -> NoiseSpec {
        let off = (1.0 - p) / (CLASS_COUNT - 1) as f64;
        let mut confusion = [[off; CLASS_COUNT]; CLASS_COUNT];
        for (i, row) in confusion.iter_mut().enumerate() {
            row[i] = p;
        }
        NoiseSpec { confusion, seed }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.confusion.iter().enumerate() {
            if row.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidNoiseSpec(format!("row {i} has negative entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidNoiseSpec(format!(
                    "row {i} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Resamples each point's class from its true-class confusion row.
/// Confidence is set to the chosen row entry. Deterministic per seed.
pub fn inject_label_noise(gt: &Labeling, spec: &NoiseSpec) -> Result<Labeling> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = classify_passthrough(gt);
    for i in 0..gt.len() {
        let row = &spec.confusion[gt.class[i].code() as usize];
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = CLASS_COUNT - 1;
        for (c, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = c;
                break;
            }
        }
        out.class[i] = ClassLabel::from_code(chosen as u8).unwrap();
        out.confidence[i] = row[chosen];
    }
    Ok(out)
}

/// Eigen-decomposition of the covariance of the `r`-neighborhood of point `i`.
pub fn extract_features(
    cloud: &PointCloud,
    index: &SpatialIndex,
    i: usize,
    r: f64,
) -> Result<EigenFeatures> {
    let neighbors = index.radius_neighbors_of(cloud, i, r)?;
    features_of_set(cloud, &neighbors, i)
}

fn features_of_set(cloud: &PointCloud, neighbors: &[u32], i: usize) -> Result<EigenFeatures> {
    let k = neighbors.len();
    if k < 3 {
        return Err(Error::DegenerateNeighborhood { index: i });
    }
    let mut mean = Vector3::zeros();
    for &j in neighbors {
        let p = &cloud.points[j as usize];
        mean += Vector3::new(p.x, p.y, p.z);
    }
    mean /= k as f64;
    let mut cov = Matrix3::zeros();
    for &j in neighbors {
        let p = &cloud.points[j as usize];
        let d = Vector3::new(p.x, p.y, p.z) - mean;
        cov += d * d.transpose();
    }
    cov /= k as f64;
    let eig = cov.symmetric_eigen();
    // sort eigenpairs descending
    let mut pairs: Vec<(f64, Vector3<f64>)> = (0..3)
        .map(|c| (eig.eigenvalues[c], eig.eigenvectors.column(c).into_owned()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (l1, l2, l3) = (pairs[0].0.max(0.0), pairs[1].0.max(0.0), pairs[2].0.max(0.0));
    if l1 <= 0.0 {
        return Err(Error::DegenerateNeighborhood { index: i });
    }
    let sum = l1 + l2 + l3;
    let mut normal = pairs[2].1;
    if normal.z < 0.0 {
        normal = -normal;
    }
    normal.normalize_mut();
    Ok(EigenFeatures {
        linearity: (l1 - l2) / l1,
        planarity: (l2 - l3) / l1,
        scattering: l3 / l1,
        curvature: l3 / sum,
        normal,
        neighborhood_size: k,
    })
}

/// Features for every point; points with degenerate neighborhoods get `None`.
pub fn extract_all_features(
    cloud: &PointCloud,
    index: &SpatialIndex,
    r: f64,
) -> Vec<Option<EigenFeatures>> {
    exec::map_indices(cloud.len(), |i| {
        extract_features(cloud, index, i, r).ok()
    })
}

/// A labeled training feature for the k-NN baseline.
#[derive(Debug, Clone)]
pub struct TrainingFeature {
    pub vector: [f64; 5],
    pub label: ClassLabel,
}

fn feature_dist_sq(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Majority vote over the `k` nearest training features; confidence is the
/// vote fraction, ties broken by the smallest class code. Points without
/// features keep class `Other` at confidence 0.
pub fn classify_knn(
    features: &[Option<EigenFeatures>],
    training: &[TrainingFeature],
    k: usize,
) -> Result<Labeling> {
    if training.is_empty() {
        return Err(Error::NoTrainingData);
    }
    let k = k.max(1).min(training.len());
    let n = features.len();
    let assigned: Vec<(ClassLabel, f64)> = exec::map_indices(n, |i| {
        let Some(f) = &features[i] else {
            return (ClassLabel::Other, 0.0);
        };
        let v = f.vector();
        let mut dists: Vec<(f64, ClassLabel)> = training
            .iter()
            .map(|t| (feature_dist_sq(&t.vector, &v), t.label))
            .collect();
        dists.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        let mut votes = [0usize; CLASS_COUNT];
        for (_, label) in &dists[..k] {
            votes[label.code() as usize] += 1;
        }
        let best = (0..CLASS_COUNT).max_by_key(|&c| (votes[c], CLASS_COUNT - c)).unwrap();
        (
            ClassLabel::from_code(best as u8).unwrap(),
            votes[best] as f64 / k as f64,
        )
    });
    let mut out = Labeling::empty(n);
    for (i, (c, conf)) in assigned.into_iter().enumerate() {
        out.class[i] = c;
        out.confidence[i] = conf;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
pub struct RefineParams {
    pub radius: f64,
    pub iterations: usize,
    pub confidence_threshold: f64,
}

impl Default for RefineParams {
    fn default() -> Self {
        RefineParams {
            radius: 0.04,
            iterations: 1,
            confidence_threshold: 0.8,
        }
    }
}

/// Contextual refinement: per iteration each point below the confidence
/// threshold takes the confidence-weighted majority class of its
/// `r`-neighborhood. Updates are synchronous (double buffered), so the result
/// does not depend on evaluation order. High-confidence points never change.
pub fn refine_context(
    labeling: &Labeling,
    cloud: &PointCloud,
    index: &SpatialIndex,
    params: &RefineParams,
) -> Labeling {
    let n = labeling.len();
    let mut current = labeling.clone();
    for _ in 0..params.iterations {
        let updates: Vec<Option<(ClassLabel, f64)>> = exec::map_indices(n, |i| {
            if current.confidence[i] >= params.confidence_threshold {
                return None;
            }
            let neighbors = index
                .radius_neighbors_of(cloud, i, params.radius)
                .unwrap_or_default();
            let mut weight = [0.0f64; CLASS_COUNT];
            let mut total = 0.0;
            for &j in &neighbors {
                if j as usize == i {
                    continue;
                }
                let w = current.confidence[j as usize];
                weight[current.class[j as usize].code() as usize] += w;
                total += w;
            }
            if total <= 0.0 {
                return None;
            }
            let best = (0..CLASS_COUNT)
                .max_by(|&a, &b| {
                    weight[a]
                        .total_cmp(&weight[b])
                        .then_with(|| b.cmp(&a)) // tie -> smaller code
                })
                .unwrap();
            Some((
                ClassLabel::from_code(best as u8).unwrap(),
                weight[best] / total,
            ))
        });
        let mut changed = false;
        for (i, up) in updates.into_iter().enumerate() {
            if let Some((c, conf)) = up {
                if current.class[i] != c || current.confidence[i] != conf {
                    changed = true;
                }
                current.class[i] = c;
                current.confidence[i] = conf;
            }
        }
        if !changed {
            break;
        }
    }
    current
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_index, Point3};

    fn plane_cloud(n_side: usize, spacing: f64) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..n_side {
            for j in 0..n_side {
                pts.push(Point3::new(i as f64 * spacing, j as f64 * spacing, 0.0));
            }
        }
        PointCloud::new(pts)
    }

    fn line_cloud(n: usize, spacing: f64) -> PointCloud {
        PointCloud::new((0..n).map(|i| Point3::new(i as f64 * spacing, 0.0, 0.0)).collect())
    }

    fn cylinder_cloud(radius: f64, length: f64, n: usize) -> PointCloud {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        PointCloud::new(
            (0..n)
                .map(|_| {
                    let theta: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
                    Point3::new(
                        rng.gen::<f64>() * length,
                        radius * theta.cos(),
                        radius * theta.sin(),
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn passthrough_is_identity_on_classes() {
        let mut gt = Labeling::empty(4);
        gt.class = vec![
            ClassLabel::Valve,
            ClassLabel::Cylinder,
            ClassLabel::Other,
            ClassLabel::IBeam,
        ];
        gt.instance = vec![3, 3, 0, 9];
        gt.confidence = vec![0.1, 0.2, 0.3, 0.4];
        let out = classify_passthrough(&gt);
        assert_eq!(out.class, gt.class);
        assert!(out.confidence.iter().all(|&c| c == 1.0));
        assert!(out.instance.iter().all(|&i| i == 0));
        assert_eq!(classify_passthrough(&out), out);
    }

    #[test]
    fn identity_noise_is_identity() {
        let mut gt = Labeling::empty(50);
        gt.class = (0..50)
            .map(|i| ClassLabel::from_code((i % 8) as u8).unwrap())
            .collect();
        let out = inject_label_noise(&gt, &NoiseSpec::identity(1)).unwrap();
        assert_eq!(out.class, gt.class);
        assert!(out.confidence.iter().all(|&c| c == 1.0));
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let mut gt = Labeling::empty(1000);
        gt.class = vec![ClassLabel::Channel; 1000];
        let spec = NoiseSpec::uniform_diagonal(0.6, 9);
        let a = inject_label_noise(&gt, &spec).unwrap();
        let b = inject_label_noise(&gt, &spec).unwrap();
        assert_eq!(a, b);
        let c = inject_label_noise(&gt, &NoiseSpec::uniform_diagonal(0.6, 10)).unwrap();
        assert_ne!(a.class, c.class);
    }

    #[test]
    fn noise_accuracy_matches_diagonal() {
        let mut gt = Labeling::empty(100_000);
        gt.class = (0..100_000)
            .map(|i| ClassLabel::from_code((i % 8) as u8).unwrap())
            .collect();
        let out = inject_label_noise(&gt, &NoiseSpec::uniform_diagonal(0.8, 4)).unwrap();
        let correct = out
            .class
            .iter()
            .zip(&gt.class)
            .filter(|(a, b)| a == b)
            .count();
        let acc = correct as f64 / 100_000.0;
        assert!((acc - 0.8).abs() < 0.01, "accuracy {acc}");
    }

    #[test]
    fn rejects_non_stochastic_matrix() {
        let mut spec = NoiseSpec::identity(0);
        spec.confusion[0][0] = 0.5;
        assert!(matches!(
            inject_label_noise(&Labeling::empty(1), &spec),
            Err(Error::InvalidNoiseSpec(_))
        ));
    }

    #[test]
    fn plane_features() {
        let cloud = plane_cloud(30, 0.01);
        let index = build_index(&cloud, None).unwrap();
        let f = extract_features(&cloud, &index, 465, 0.04).unwrap();
        assert!(f.planarity > 0.95, "planarity {}", f.planarity);
        assert!(f.curvature < 0.05, "curvature {}", f.curvature);
        let s = f.linearity + f.planarity + f.scattering;
        assert!((s - 1.0).abs() < 1e-6);
        assert!((f.normal.norm() - 1.0).abs() < 1e-6);
        assert!(f.normal.z.abs() > 0.99);
    }

    #[test]
    fn line_features() {
        let cloud = line_cloud(100, 0.005);
        let index = build_index(&cloud, None).unwrap();
        let f = extract_features(&cloud, &index, 50, 0.04).unwrap();
        assert!(f.linearity > 0.95, "linearity {}", f.linearity);
    }

    #[test]
    fn cylinder_curvier_than_plane() {
        let cyl = cylinder_cloud(0.1, 1.0, 8000);
        let idx_c = build_index(&cyl, None).unwrap();
        let fc = extract_features(&cyl, &idx_c, 100, 0.04).unwrap();
        let plane = plane_cloud(60, 0.01);
        let idx_p = build_index(&plane, None).unwrap();
        let fp = extract_features(&plane, &idx_p, 1830, 0.04).unwrap();
        assert!(fc.curvature > fp.curvature);
    }

    #[test]
    fn degenerate_neighborhood_errors() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(10.0, 0.0, 0.0),
        ]);
        let index = build_index(&cloud, None).unwrap();
        assert!(matches!(
            extract_features(&cloud, &index, 0, 0.04),
            Err(Error::DegenerateNeighborhood { index: 0 })
        ));
    }

    #[test]
    fn knn_single_training_feature() {
        let training = vec![TrainingFeature {
            vector: [1.0, 0.0, 0.0, 0.0, 0.0],
            label: ClassLabel::Cylinder,
        }];
        let features = vec![
            Some(EigenFeatures {
                linearity: 0.2,
                planarity: 0.7,
                scattering: 0.1,
                curvature: 0.02,
                normal: Vector3::z(),
                neighborhood_size: 10,
            });
            5
        ];
        let out = classify_knn(&features, &training, 3).unwrap();
        assert!(out.class.iter().all(|&c| c == ClassLabel::Cylinder));
        assert!(out.confidence.iter().all(|&c| c == 1.0));
    }

    #[test]
    fn knn_exact_match_k1() {
        let training = vec![
            TrainingFeature {
                vector: [1.0, 0.0, 0.0, 0.0, 0.0],
                label: ClassLabel::Cylinder,
            },
            TrainingFeature {
                vector: [0.0, 1.0, 0.0, 0.0, 1.0],
                label: ClassLabel::IBeam,
            },
        ];
        let features = vec![Some(EigenFeatures {
            linearity: 0.0,
            planarity: 1.0,
            scattering: 0.0,
            curvature: 0.0,
            normal: Vector3::z(),
            neighborhood_size: 9,
        })];
        let out = classify_knn(&features, &training, 1).unwrap();
        assert_eq!(out.class[0], ClassLabel::IBeam);
    }

    #[test]
    fn knn_separable_classes() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut jitter = |base: [f64; 5]| {
            let mut v = base;
            for x in v.iter_mut() {
                *x += rng.gen::<f64>() * 0.05;
            }
            v
        };
        let mut training = Vec::new();
        for _ in 0..50 {
            training.push(TrainingFeature {
                vector: jitter([1.0, 0.0, 0.0, 0.0, 0.0]),
                label: ClassLabel::Angle,
            });
            training.push(TrainingFeature {
                vector: jitter([0.0, 1.0, 0.0, 0.0, 1.0]),
                label: ClassLabel::Channel,
            });
        }
        let mut features = Vec::new();
        let mut want = Vec::new();
        for i in 0..200 {
            let (base, label) = if i % 2 == 0 {
                ([1.0, 0.0, 0.0, 0.0, 0.0], ClassLabel::Angle)
            } else {
                ([0.0, 1.0, 0.0, 0.0, 1.0], ClassLabel::Channel)
            };
            let v = jitter(base);
            features.push(Some(EigenFeatures {
                linearity: v[0],
                planarity: v[1],
                scattering: v[2],
                curvature: v[3],
                normal: Vector3::new(0.0, 0.0, v[4]),
                neighborhood_size: 9,
            }));
            want.push(label);
        }
        // patch vectors directly: classifier reads EigenFeatures::vector()
        let out = classify_knn(&features, &training, 5).unwrap();
        let correct = out.class.iter().zip(&want).filter(|(a, b)| a == b).count();
        assert!(correct as f64 / 200.0 >= 0.95, "accuracy {}", correct);
        for &c in &out.confidence {
            let scaled = c * 5.0;
            assert!((scaled - scaled.round()).abs() < 1e-9 && c > 0.0 && c <= 1.0);
        }
    }

    #[test]
    fn knn_rejects_empty_training() {
        assert!(matches!(
            classify_knn(&[], &[], 3),
            Err(Error::NoTrainingData)
        ));
    }

    #[test]
    fn refine_fixed_point_on_uniform_labeling() {
        let cloud = plane_cloud(10, 0.01);
        let index = build_index(&cloud, None).unwrap();
        let mut lab = Labeling::empty(cloud.len());
        lab.class = vec![ClassLabel::Channel; cloud.len()];
        lab.confidence = vec![0.5; cloud.len()];
        let out = refine_context(&lab, &cloud, &index, &RefineParams::default());
        assert_eq!(out.class, lab.class);
    }

    #[test]
    fn refine_flips_low_confidence_outlier() {
        let cloud = plane_cloud(5, 0.01);
        let index = build_index(&cloud, None).unwrap();
        let mut lab = Labeling::empty(cloud.len());
        lab.class = vec![ClassLabel::IBeam; cloud.len()];
        lab.confidence = vec![0.95; cloud.len()];
        lab.class[12] = ClassLabel::Valve;
        lab.confidence[12] = 0.3;
        let out = refine_context(&lab, &cloud, &index, &RefineParams::default());
        assert_eq!(out.class[12], ClassLabel::IBeam);
    }

    #[test]
    fn refine_never_touches_high_confidence() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cloud = PointCloud::new(
            (0..300)
                .map(|_| Point3::new(rng.gen::<f64>() * 0.3, rng.gen::<f64>() * 0.3, 0.0))
                .collect(),
        );
        let index = build_index(&cloud, None).unwrap();
        let mut lab = Labeling::empty(300);
        for i in 0..300 {
            lab.class[i] = ClassLabel::from_code(rng.gen_range(0..8)).unwrap();
            lab.confidence[i] = rng.gen();
        }
        let params = RefineParams {
            iterations: 3,
            ..RefineParams::default()
        };
        let out = refine_context(&lab, &cloud, &index, &params);
        for i in 0..300 {
            if lab.confidence[i] >= params.confidence_threshold {
                assert_eq!(out.class[i], lab.class[i]);
                assert_eq!(out.confidence[i], lab.confidence[i]);
            }
        }
    }
}
