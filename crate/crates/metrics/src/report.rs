use serde::{Deserialize, Serialize};

use crate::MetricAccumulator;

/// Flat record of the four metrics plus the conventions they were computed
/// under; serializes to the stable key set
/// `{iou, niou, pd, fa, n, threshold, centroid_tol}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub iou: f64,
    pub niou: f64,
    pub pd: f64,
    pub fa: f64,
    /// Number of images scored.
    pub n: usize,
    /// Binarization threshold the predictions were thresholded at.
    pub threshold: f64,
    /// Centroid tolerance (pixels) used for target matching.
    pub centroid_tol: f64,
}

impl MetricReport {
    pub fn from_accumulator(acc: &MetricAccumulator, threshold: f64, centroid_tol: f64) -> Self {
        Self {
            iou: acc.iou(),
            niou: acc.niou(),
            pd: acc.pd(),
            fa: acc.fa(),
            n: acc.n(),
            threshold,
            centroid_tol,
        }
    }
}

impl std::fmt::Display for MetricReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "iou          {:.6}", self.iou)?;
        writeln!(f, "niou         {:.6}", self.niou)?;
        writeln!(f, "pd           {:.6}", self.pd)?;
        writeln!(f, "fa           {:.6e}", self.fa)?;
        writeln!(f, "n            {}", self.n)?;
        writeln!(f, "threshold    {}", self.threshold)?;
        write!(f, "centroid_tol {}", self.centroid_tol)
    }
}
