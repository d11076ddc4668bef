//! Point-cloud toolkit for industrial facility scans: class/instance
//! segmentation of pipes and structural steel, spatial partitioning,
//! evaluation metrics, labor-cost modeling, and a deterministic synthetic
//! scene generator.
//!
//! The pipeline: partition a cloud into windows and overlapping blocks,
//! classify points into eight object classes, grow instances with
//! radius-bounded BFS inside each class (boundary points held out and
//! re-attached), merge block results, then score against ground truth and
//! translate recall into man-hour savings.

pub mod classify;
pub mod cost;
pub mod error;
pub mod evaluate;
pub mod exec;
pub mod geometry;
pub mod instance;
pub mod io;
pub mod labels;
pub mod partition;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod union_find;

pub use error::{Error, Result};
