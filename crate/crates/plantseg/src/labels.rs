//! Class / instance / boundary label model shared by every stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The eight segmentation target classes. Integer codes 0-7 are fixed and
/// appear verbatim in the sidecar file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    Cylinder = 0,
    Elbow = 1,
    Channel = 2,
    IBeam = 3,
    Angle = 4,
    Flange = 5,
    Valve = 6,
    Other = 7,
}

pub const CLASS_COUNT: usize = 8;

/// The seven shape classes, i.e. everything except `Other`. Mean metrics are
/// taken over these.
pub const SHAPE_CLASSES: [ClassLabel; 7] = [
    ClassLabel::Cylinder,
    ClassLabel::Elbow,
    ClassLabel::Channel,
    ClassLabel::IBeam,
    ClassLabel::Angle,
    ClassLabel::Flange,
    ClassLabel::Valve,
];

pub const ALL_CLASSES: [ClassLabel; 8] = [
    ClassLabel::Cylinder,
    ClassLabel::Elbow,
    ClassLabel::Channel,
    ClassLabel::IBeam,
    ClassLabel::Angle,
    ClassLabel::Flange,
    ClassLabel::Valve,
    ClassLabel::Other,
];

impl ClassLabel {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<ClassLabel> {
        ALL_CLASSES.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Cylinder => "cylinder",
            ClassLabel::Elbow => "elbow",
            ClassLabel::Channel => "channel",
            ClassLabel::IBeam => "ibeam",
            ClassLabel::Angle => "angle",
            ClassLabel::Flange => "flange",
            ClassLabel::Valve => "valve",
            ClassLabel::Other => "other",
        }
    }

    pub fn from_name(name: &str) -> Option<ClassLabel> {
        ALL_CLASSES.iter().copied().find(|c| c.name() == name)
    }
}

/// Per-point labels parallel to a cloud. Instance id 0 means "no instance".
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    pub class: Vec<ClassLabel>,
    pub instance: Vec<u32>,
    pub confidence: Vec<f64>,
    pub boundary: Vec<bool>,
}

impl Labeling {
    /// All-`Other`, unassigned, full-confidence labeling for `n` points.
    pub fn empty(n: usize) -> Labeling {
        Labeling {
            class: vec![ClassLabel::Other; n],
            instance: vec![0; n],
            confidence: vec![1.0; n],
            boundary: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.class.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class.is_empty()
    }

    /// Indices of all points labeled `c` ("class point cluster").
    pub fn class_point_cluster(&self, c: ClassLabel) -> Vec<u32> {
        self.class
            .iter()
            .enumerate()
            .filter(|(_, &cl)| cl == c)
            .map(|(i, _)| i as u32)
            .collect()
    }

    /// Indices of all points belonging to instance `id`.
    pub fn instance_point_cluster(&self, id: u32) -> Result<Vec<u32>> {
        if id == 0 {
            return Err(Error::ReservedId);
        }
        Ok(self
            .instance
            .iter()
            .enumerate()
            .filter(|(_, &inst)| inst == id)
            .map(|(i, _)| i as u32)
            .collect())
    }

    /// Distinct instance ids (> 0) in ascending order.
    pub fn instance_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.instance.iter().copied().filter(|&i| i > 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}
