//! Manual-labor cost arithmetic: per-class manual-shape counts from recall,
//! man-hours, savings percentages, tool comparisons, and the pre-annotation
//! cost optimum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::ClassLabel;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: ClassLabel,
    pub total_shapes: usize,
    /// Fraction of instances the framework recovers; `1 - recall` of them
    /// remain manual work.
    pub recall: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FacilityStats {
    pub name: String,
    pub classes: Vec<ClassStats>,
    /// Uniform per-shape manual segmentation time.
    pub per_shape_minutes: Option<f64>,
    /// Observed total manual hours; used to infer the per-shape rate when
    /// `per_shape_minutes` is absent.
    pub total_hours: Option<f64>,
}

fn round_half_away(v: f64) -> i64 {
    if v >= 0.0 {
        (v + 0.5).floor() as i64
    } else {
        (v - 0.5).ceil() as i64
    }
}

/// Shapes still segmented by hand: `round((1 - recall) * total)`,
/// half away from zero.
pub fn manual_counts(total: usize, recall: f64) -> usize {
    round_half_away((1.0 - recall) * total as f64).max(0) as usize
}

/// `1 - (sum of manual counts) / (sum of totals)`.
pub fn savings_fraction(stats: &FacilityStats) -> Result<f64> {
    let total: usize = stats.classes.iter().map(|c| c.total_shapes).sum();
    if total == 0 {
        return Err(Error::EmptyFacility);
    }
    let manual: usize = stats
        .classes
        .iter()
        .map(|c| manual_counts(c.total_shapes, c.recall))
        .sum();
    Ok(1.0 - manual as f64 / total as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostReport {
    pub facility: String,
    pub per_class_manual: Vec<(ClassLabel, usize)>,
    pub total_manual_shapes: usize,
    pub total_shapes: usize,
    pub savings_percent: f64,
    pub framework_hours: f64,
    pub per_shape_minutes: f64,
}

/// Total manual hours under the framework; infers the per-shape rate from
/// observed hours when no rate is given.
pub fn framework_hours(stats: &FacilityStats) -> Result<(f64, f64)> {
    let manual: usize = stats
        .classes
        .iter()
        .map(|c| manual_counts(c.total_shapes, c.recall))
        .sum();
    let minutes = match (stats.per_shape_minutes, stats.total_hours) {
        (Some(m), _) if m > 0.0 => m,
        (_, Some(h)) => {
            if manual == 0 {
                return Ok((0.0, 0.0));
            }
            h * 60.0 / manual as f64
        }
        _ => return Err(Error::MissingRate),
    };
    Ok((manual as f64 * minutes / 60.0, minutes))
}

pub fn cost_report(stats: &FacilityStats) -> Result<CostReport> {
    let savings = savings_fraction(stats)?;
    let (hours, minutes) = framework_hours(stats)?;
    let per_class_manual: Vec<(ClassLabel, usize)> = stats
        .classes
        .iter()
        .map(|c| (c.class, manual_counts(c.total_shapes, c.recall)))
        .collect();
    Ok(CostReport {
        facility: stats.name.clone(),
        total_manual_shapes: per_class_manual.iter().map(|(_, n)| n).sum(),
        total_shapes: stats.classes.iter().map(|c| c.total_shapes).sum(),
        per_class_manual,
        savings_percent: savings * 100.0,
        framework_hours: hours,
        per_shape_minutes: minutes,
    })
}

/// Per-class inputs for a two-tool manual-hours comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolClassCounts {
    pub class: ClassLabel,
    pub total: usize,
    pub modeling_minutes: f64,
    /// Shapes each tool segments automatically; the rest are manual.
    pub auto_a: usize,
    pub auto_b: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolComparison {
    pub per_class: Vec<ToolClassReduction>,
    pub hours_a: f64,
    pub hours_b: f64,
    /// Percent reduction of tool A's manual hours relative to tool B.
    pub overall_reduction_percent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ToolClassReduction {
    pub class: ClassLabel,
    pub manual_a: usize,
    pub manual_b: usize,
    pub hours_a: f64,
    pub hours_b: f64,
    /// Percent reduction of A vs B for this class (0 when B has no work).
    pub reduction_percent: f64,
}

/// Hours per tool: `sum_c (total_c - auto_c) * minutes_c / 60`.
pub fn tool_comparison(counts: &[ToolClassCounts]) -> Result<ToolComparison> {
    let mut per_class = Vec::new();
    let mut hours_a = 0.0;
    let mut hours_b = 0.0;
    for c in counts {
        if c.auto_a > c.total || c.auto_b > c.total {
            return Err(Error::InvalidCounts(format!(
                "{}: auto count exceeds total {}",
                c.class.name(),
                c.total
            )));
        }
        let manual_a = c.total - c.auto_a;
        let manual_b = c.total - c.auto_b;
        let ha = manual_a as f64 * c.modeling_minutes / 60.0;
        let hb = manual_b as f64 * c.modeling_minutes / 60.0;
        hours_a += ha;
        hours_b += hb;
        per_class.push(ToolClassReduction {
            class: c.class,
            manual_a,
            manual_b,
            hours_a: ha,
            hours_b: hb,
            reduction_percent: if hb > 0.0 {
                (hb - ha) / hb * 100.0
            } else {
                0.0
            },
        });
    }
    Ok(ToolComparison {
        per_class,
        hours_a,
        hours_b,
        overall_reduction_percent: if hours_b > 0.0 {
            (hours_b - hours_a) / hours_b * 100.0
        } else {
            0.0
        },
    })
}

/// Pre-annotation accuracy curve plus annotation / correction cost rates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnnotationCurve {
    /// `(pre-annotation fraction X, validation accuracy)`, sorted by X.
    pub samples: Vec<(f64, f64)>,
    /// Cost per annotated point (rate `a`).
    pub annotation_rate: f64,
    /// Cost per corrected (mispredicted) point (rate `b`).
    pub correction_rate: f64,
}

impl AnnotationCurve {
    fn validate(&self) -> Result<()> {
        if self.samples.len() < 3 {
            return Err(Error::InvalidCurve("need at least 3 samples".into()));
        }
        for w in self.samples.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidCurve("X values must be strictly increasing".into()));
            }
        }
        for &(x, acc) in &self.samples {
            if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&acc) {
                return Err(Error::InvalidCurve("X and accuracy must lie in [0,1]".into()));
            }
        }
        Ok(())
    }

    /// Piecewise-linear accuracy, clamped to the sampled range at the ends.
    fn accuracy_at(&self, x: f64) -> f64 {
        let s = &self.samples;
        if x <= s[0].0 {
            return s[0].1;
        }
        if x >= s[s.len() - 1].0 {
            return s[s.len() - 1].1;
        }
        for w in s.windows(2) {
            if x <= w[1].0 {
                let t = (x - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        unreachable!()
    }
}

/// Minimizes `T(X) = a*X + b*(1 - acc(X))` (per point; the dataset size
/// cancels) over a 0.01 grid; ties resolve to the smaller X.
pub fn optimal_preannotation(curve: &AnnotationCurve) -> Result<f64> {
    curve.validate()?;
    let mut best_x = 0.0;
    let mut best_cost = f64::INFINITY;
    for k in 0..=100 {
        let x = k as f64 * 0.01;
        let cost = curve.annotation_rate * x + curve.correction_rate * (1.0 - curve.accuracy_at(x));
        if cost < best_cost - 1e-15 {
            best_cost = cost;
            best_x = x;
        }
    }
    Ok(best_x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manual_count_paper_rows() {
        assert_eq!(manual_counts(211, 0.26), 156);
        assert_eq!(manual_counts(94, 0.43), 54);
        assert_eq!(manual_counts(100, 1.0), 0);
    }

    #[test]
    fn manual_counts_monotone_in_recall() {
        for total in [10usize, 211, 2347] {
            let mut prev = manual_counts(total, 0.0);
            for k in 1..=100 {
                let cur = manual_counts(total, k as f64 / 100.0);
                assert!(cur <= prev);
                prev = cur;
            }
        }
    }

    fn facility(classes: &[(ClassLabel, usize, f64)]) -> FacilityStats {
        FacilityStats {
            name: "test".into(),
            classes: classes
                .iter()
                .map(|&(class, total_shapes, recall)| ClassStats {
                    class,
                    total_shapes,
                    recall,
                })
                .collect(),
            per_shape_minutes: None,
            total_hours: None,
        }
    }

    #[test]
    fn zero_recall_zero_savings() {
        let stats = facility(&[(ClassLabel::Cylinder, 100, 0.0)]);
        assert_eq!(savings_fraction(&stats).unwrap(), 0.0);
    }

    #[test]
    fn empty_facility_rejected() {
        let stats = facility(&[(ClassLabel::Cylinder, 0, 0.5)]);
        assert!(matches!(savings_fraction(&stats), Err(Error::EmptyFacility)));
    }

    #[test]
    fn savings_identity_against_weighted_mean() {
        // savings == 1 - shape-weighted mean of (1 - recall), up to the
        // per-class rounding of manual counts
        let stats = facility(&[
            (ClassLabel::Cylinder, 1000, 0.43),
            (ClassLabel::IBeam, 500, 0.80),
            (ClassLabel::Other, 250, 0.25),
        ]);
        let direct = savings_fraction(&stats).unwrap();
        let total: f64 = 1750.0;
        let weighted = 1.0 - (0.57 * 1000.0 + 0.2 * 500.0 + 0.75 * 250.0) / total;
        assert!((direct - weighted).abs() < 1.0 / total);
    }

    #[test]
    fn hours_inference() {
        let mut stats = facility(&[(ClassLabel::Channel, 100, 0.0)]);
        stats.total_hours = Some(10.0);
        let (hours, minutes) = framework_hours(&stats).unwrap();
        assert!((hours - 10.0).abs() < 1e-12);
        assert!((minutes - 6.0).abs() < 1e-12);

        stats.per_shape_minutes = Some(3.0);
        let (hours, _) = framework_hours(&stats).unwrap();
        assert!((hours - 5.0).abs() < 1e-12);
    }

    #[test]
    fn hours_need_rate_or_total() {
        let stats = facility(&[(ClassLabel::Channel, 100, 0.0)]);
        assert!(matches!(framework_hours(&stats), Err(Error::MissingRate)));
        let zero = facility(&[(ClassLabel::Channel, 10, 1.0)]);
        let mut zero = zero;
        zero.total_hours = Some(5.0);
        assert_eq!(framework_hours(&zero).unwrap().0, 0.0);
    }

    #[test]
    fn identical_tools_zero_difference() {
        let counts = vec![ToolClassCounts {
            class: ClassLabel::Cylinder,
            total: 100,
            modeling_minutes: 5.0,
            auto_a: 40,
            auto_b: 40,
        }];
        let cmp = tool_comparison(&counts).unwrap();
        assert_eq!(cmp.overall_reduction_percent, 0.0);
        assert_eq!(cmp.per_class[0].reduction_percent, 0.0);
    }

    #[test]
    fn invalid_auto_counts_rejected() {
        let counts = vec![ToolClassCounts {
            class: ClassLabel::Cylinder,
            total: 10,
            modeling_minutes: 5.0,
            auto_a: 11,
            auto_b: 0,
        }];
        assert!(matches!(tool_comparison(&counts), Err(Error::InvalidCounts(_))));
    }

    fn curve(samples: Vec<(f64, f64)>, a: f64, b: f64) -> AnnotationCurve {
        AnnotationCurve {
            samples,
            annotation_rate: a,
            correction_rate: b,
        }
    }

    #[test]
    fn constant_accuracy_means_no_preannotation() {
        let c = curve(vec![(0.0, 0.7), (0.5, 0.7), (1.0, 0.7)], 1.0, 2.0);
        assert_eq!(optimal_preannotation(&c).unwrap(), 0.0);
    }

    #[test]
    fn zero_correction_cost_means_no_preannotation() {
        let c = curve(vec![(0.0, 0.2), (0.5, 0.9), (1.0, 0.95)], 1.0, 0.0);
        assert_eq!(optimal_preannotation(&c).unwrap(), 0.0);
    }

    #[test]
    fn optimum_lands_on_knee() {
        // steep accuracy gain until X = 0.3, flat afterwards
        let c = curve(vec![(0.0, 0.5), (0.3, 0.9), (1.0, 0.95)], 1.0, 2.0);
        let x = optimal_preannotation(&c).unwrap();
        assert!((x - 0.3).abs() < 1e-9, "got {x}");
    }

    #[test]
    fn invalid_curves_rejected() {
        let c = curve(vec![(0.0, 0.5), (0.0, 0.6), (1.0, 0.9)], 1.0, 1.0);
        assert!(matches!(optimal_preannotation(&c), Err(Error::InvalidCurve(_))));
        let c = curve(vec![(0.0, 0.5), (1.0, 0.9)], 1.0, 1.0);
        assert!(matches!(optimal_preannotation(&c), Err(Error::InvalidCurve(_))));
    }
}
