//! Evaluation metrics for infrared small-target detection: dataset-level
//! IoU, per-image normalized IoU, detection probability, and false-alarm
//! rate, plus the binarization and component-matching conventions they
//! depend on.
//!
//! Conventions (documented constants, overridable by callers):
//! * probability maps binarize with a strict `> threshold` rule, default 0.5;
//! * connected components use 8-connectivity;
//! * a ground-truth component counts as detected when a predicted component
//!   shares at least one pixel with it or lies within 3 px centroid distance,
//!   matched greedily (nearest centroid first) and one-to-one;
//! * the false-alarm denominator is the full image area, so values land on
//!   the 1e-6 scale customarily reported for this task.

mod accumulator;
mod binarize;
mod components;
mod matching;
mod report;

pub use accumulator::{ImageStats, MetricAccumulator};
pub use binarize::binarize;
pub use components::{connected_components, Component};
pub use matching::{match_components, ComponentMatch};
pub use report::MetricReport;

use thiserror::Error;

/// Default binarization threshold for probability maps.
pub const DEFAULT_THRESHOLD: f64 = 0.5;
/// Default centroid distance tolerance (pixels) for target matching.
pub const DEFAULT_CENTROID_TOL: f64 = 3.0;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("shape mismatch: pred {pred_h}x{pred_w} vs gt {gt_h}x{gt_w}")]
    ShapeMismatch {
        pred_h: usize,
        pred_w: usize,
        gt_h: usize,
        gt_w: usize,
    },
    #[error("empty accumulator: metrics need at least one image")]
    Empty,
}
