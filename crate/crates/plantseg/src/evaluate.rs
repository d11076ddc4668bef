//! Segmentation scoring: per-class precision/recall at IoU thresholds with
//! greedy one-to-one instance matching, P/R-vs-IoU curves, and point-wise
//! class accuracy / mIoU.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{ClassLabel, Labeling, ALL_CLASSES, CLASS_COUNT, SHAPE_CLASSES};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalParams {
    pub iou_threshold: f64,
    pub threshold_sweep: Vec<f64>,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            iou_threshold: 0.25,
            threshold_sweep: Vec::new(),
        }
    }
}

/// Intersection-over-union of two index sets (sorted or not).
pub fn instance_iou(pred: &[u32], gt: &[u32]) -> Result<f64> {
    if pred.is_empty() && gt.is_empty() {
        return Err(Error::UndefinedIoU);
    }
    let pred_set: std::collections::HashSet<u32> = pred.iter().copied().collect();
    let inter = gt.iter().filter(|g| pred_set.contains(g)).count();
    let union = pred.len() + gt.len() - inter;
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: ClassLabel,
    pub precision: f64,
    pub recall: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub ground_truth: usize,
    /// Set when the class has zero predictions; precision is reported as 0.
    pub precision_undefined: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceMatch {
    pub pred_id: u32,
    pub gt_id: u32,
    pub iou: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub per_class: Vec<ClassScore>,
    /// Unweighted means over shape classes present in gt or predictions
    /// (`Other` excluded).
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub matches: Vec<InstanceMatch>,
}

#[derive(Debug, Clone)]
struct Cluster {
    id: u32,
    class: ClassLabel,
    indices: Vec<u32>,
}

fn clusters_of(labeling: &Labeling, class_from: &Labeling) -> Vec<Cluster> {
    let mut by_id: HashMap<u32, Vec<u32>> = HashMap::new();
    for (i, &id) in labeling.instance.iter().enumerate() {
        if id > 0 {
            by_id.entry(id).or_default().push(i as u32);
        }
    }
    let mut out: Vec<Cluster> = by_id
        .into_iter()
        .map(|(id, indices)| {
            // majority class of the member points
            let mut votes = [0usize; CLASS_COUNT];
            for &i in &indices {
                votes[class_from.class[i as usize].code() as usize] += 1;
            }
            let best = (0..CLASS_COUNT)
                .max_by_key(|&c| (votes[c], CLASS_COUNT - c))
                .unwrap();
            Cluster {
                id,
                class: ClassLabel::from_code(best as u8).unwrap(),
                indices,
            }
        })
        .collect();
    out.sort_by_key(|c| c.id);
    out
}

/// Greedy one-to-one matching of predicted to ground-truth instances,
/// restricted to same-class pairs, in descending IoU order. A matched pair
/// is a true positive iff its IoU reaches the threshold.
pub fn match_instances(pred: &Labeling, gt: &Labeling, params: &EvalParams) -> Result<EvalReport> {
    let matching = compute_matching(pred, gt);
    Ok(report_at(&matching, params.iou_threshold))
}

/// Threshold-independent matching, reusable across a threshold sweep.
pub struct Matching {
    /// Greedily matched pairs, descending IoU.
    pairs: Vec<InstanceMatch>,
    /// (class, id) of all predicted / gt instances.
    pred_class: Vec<(ClassLabel, u32)>,
    gt_class: Vec<(ClassLabel, u32)>,
}

pub fn compute_matching(pred: &Labeling, gt: &Labeling) -> Matching {
    let pred_clusters = clusters_of(pred, pred);
    let gt_clusters = clusters_of(gt, gt);
    // candidate pairs: overlap-driven; IoU of non-overlapping pairs is 0 and
    // can never produce a true positive
    let pred_of_point: &[u32] = &pred.instance;
    let mut pred_by_id: HashMap<u32, &Cluster> = HashMap::new();
    for c in &pred_clusters {
        pred_by_id.insert(c.id, c);
    }
    let mut candidates: Vec<InstanceMatch> = Vec::new();
    for g in &gt_clusters {
        let mut overlap: HashMap<u32, usize> = HashMap::new();
        for &i in &g.indices {
            let pid = pred_of_point[i as usize];
            if pid > 0 {
                *overlap.entry(pid).or_default() += 1;
            }
        }
        let mut pids: Vec<u32> = overlap.keys().copied().collect();
        pids.sort_unstable();
        for pid in pids {
            let p = pred_by_id[&pid];
            if p.class != g.class {
                continue;
            }
            let inter = overlap[&pid];
            let union = p.indices.len() + g.indices.len() - inter;
            candidates.push(InstanceMatch {
                pred_id: pid,
                gt_id: g.id,
                iou: inter as f64 / union as f64,
            });
        }
    }
    candidates.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then(a.pred_id.cmp(&b.pred_id))
            .then(a.gt_id.cmp(&b.gt_id))
    });
    let mut pred_used = std::collections::HashSet::new();
    let mut gt_used = std::collections::HashSet::new();
    let mut pairs = Vec::new();
    for c in candidates {
        if pred_used.contains(&c.pred_id) || gt_used.contains(&c.gt_id) {
            continue;
        }
        pred_used.insert(c.pred_id);
        gt_used.insert(c.gt_id);
        pairs.push(c);
    }
    Matching {
        pairs,
        pred_class: pred_clusters.iter().map(|c| (c.class, c.id)).collect(),
        gt_class: gt_clusters.iter().map(|c| (c.class, c.id)).collect(),
    }
}

pub fn report_at(matching: &Matching, threshold: f64) -> EvalReport {
    let gt_class_of: HashMap<u32, ClassLabel> =
        matching.gt_class.iter().map(|&(c, id)| (id, c)).collect();
    let mut tp = [0usize; CLASS_COUNT];
    let mut matches = Vec::new();
    for m in &matching.pairs {
        if m.iou >= threshold {
            tp[gt_class_of[&m.gt_id].code() as usize] += 1;
            matches.push(m.clone());
        }
    }
    let mut per_class = Vec::new();
    let mut prec_sum = 0.0;
    let mut rec_sum = 0.0;
    let mut mean_classes = 0usize;
    for c in ALL_CLASSES {
        let predicted = matching
            .pred_class
            .iter()
            .filter(|(cl, _)| *cl == c)
            .count();
        let ground_truth = matching.gt_class.iter().filter(|(cl, _)| *cl == c).count();
        let t = tp[c.code() as usize];
        let precision = if predicted > 0 {
            t as f64 / predicted as f64
        } else {
            0.0
        };
        let recall = if ground_truth > 0 {
            t as f64 / ground_truth as f64
        } else {
            0.0
        };
        if SHAPE_CLASSES.contains(&c) && (predicted > 0 || ground_truth > 0) {
            prec_sum += precision;
            rec_sum += recall;
            mean_classes += 1;
        }
        per_class.push(ClassScore {
            class: c,
            precision,
            recall,
            true_positives: t,
            predicted,
            ground_truth,
            precision_undefined: predicted == 0,
        });
    }
    EvalReport {
        iou_threshold: threshold,
        per_class,
        mean_precision: if mean_classes > 0 {
            prec_sum / mean_classes as f64
        } else {
            0.0
        },
        mean_recall: if mean_classes > 0 {
            rec_sum / mean_classes as f64
        } else {
            0.0
        },
        matches,
    }
}

/// One evaluation per sweep threshold. P and R are non-increasing in the
/// threshold because the matching itself is threshold-independent.
pub fn pr_vs_iou(pred: &Labeling, gt: &Labeling, sweep: &[f64]) -> Result<Vec<EvalReport>> {
    if sweep.is_empty() {
        return Err(Error::InvalidSweep);
    }
    let matching = compute_matching(pred, gt);
    Ok(sweep.iter().map(|&t| report_at(&matching, t)).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub accuracy: f64,
    pub per_class_iou: Vec<(ClassLabel, f64)>,
    pub mean_iou: f64,
}

/// Point-wise class segmentation metrics. mIoU is the unweighted mean over
/// classes present in gt or predictions.
pub fn class_metrics(pred: &[ClassLabel], gt: &[ClassLabel]) -> ClassMetrics {
    assert_eq!(pred.len(), gt.len());
    let mut tp = [0usize; CLASS_COUNT];
    let mut fp = [0usize; CLASS_COUNT];
    let mut fneg = [0usize; CLASS_COUNT];
    let mut correct = 0usize;
    for (&p, &g) in pred.iter().zip(gt) {
        if p == g {
            correct += 1;
            tp[p.code() as usize] += 1;
        } else {
            fp[p.code() as usize] += 1;
            fneg[g.code() as usize] += 1;
        }
    }
    let mut per_class_iou = Vec::new();
    let mut iou_sum = 0.0;
    let mut present = 0usize;
    for c in ALL_CLASSES {
        let i = c.code() as usize;
        let denom = tp[i] + fp[i] + fneg[i];
        if denom == 0 {
            continue;
        }
        let iou = tp[i] as f64 / denom as f64;
        per_class_iou.push((c, iou));
        iou_sum += iou;
        present += 1;
    }
    ClassMetrics {
        accuracy: if pred.is_empty() {
            0.0
        } else {
            correct as f64 / pred.len() as f64
        },
        per_class_iou,
        mean_iou: if present > 0 {
            iou_sum / present as f64
        } else {
            0.0
        },
    }
}
