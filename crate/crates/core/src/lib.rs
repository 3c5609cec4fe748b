#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Redundancy measurement and pruning for multi-camera / LiDAR driving datasets.
//!
//! * [`dataset`]: canonical manifest format, validation, point files.
//! * [`geometry`]: FoV arcs, pinhole crop columns, 2D/3D boxes and IoU.
//! * [`multisource`]: overlap-crop similarity, completeness-guided pruning of
//!   duplicate camera annotations.
//! * [`multimodal`]: camera/LiDAR redundancy ratio, distance pruning, lost ratio.
//! * [`stats`]: Welch's t-test and the special functions behind it.
//! * [`synth`]: deterministic synthetic scenes with ground-truth bookkeeping.
//! * [`report`]: report assembly, CSV/JSON export, quality-dimension tags.

pub mod dataset;
pub mod geometry;
pub mod json;
pub mod multimodal;
pub mod multisource;
pub mod report;
pub mod stats;
pub mod synth;
