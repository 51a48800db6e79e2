use lgir_core::TargetMask;

use crate::{match_components, MetricsError};

/// Per-image raw counts behind the four metrics.
///
/// Pixel counts feed IoU/nIoU (the intersection `tp`, ground-truth area
/// `gt_pixels`, predicted area `pred_pixels` — the equations are symmetric
/// in the last two, so the occasional swapped naming in the literature does
/// not change the value). Component counts feed Pd, and the false-positive
/// pixel count over the image area feeds Fa.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageStats {
    /// Pixels present in both prediction and ground truth.
    pub tp: u64,
    pub gt_pixels: u64,
    pub pred_pixels: u64,
    /// Ground-truth components claimed by a predicted component.
    pub matched_targets: u64,
    /// All ground-truth components.
    pub total_targets: u64,
    /// Pixels belonging to predicted components that matched nothing.
    pub false_pixels: u64,
    /// H·W of the image.
    pub total_pixels: u64,
}

impl ImageStats {
    fn iou(&self) -> f64 {
        let union = self.gt_pixels + self.pred_pixels - self.tp;
        if union == 0 {
            // Correct "no target" prediction: not penalized.
            1.0
        } else {
            self.tp as f64 / union as f64
        }
    }
}

/// Accumulates per-image stats; metrics are computed over the collection.
/// Building one accumulator per worker and merging is equivalent to
/// observing every image into one (merge = list concatenation).
#[derive(Debug, Clone, Default)]
pub struct MetricAccumulator {
    pub images: Vec<ImageStats>,
}

impl MetricAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n(&self) -> usize {
        self.images.len()
    }

    /// Scores one image: binary prediction against ground truth.
    pub fn observe(
        &mut self,
        pred: &TargetMask,
        gt: &TargetMask,
        centroid_tol: f64,
    ) -> Result<(), MetricsError> {
        let (h, w) = (gt.height(), gt.width());
        if (pred.height(), pred.width()) != (h, w) {
            return Err(MetricsError::ShapeMismatch {
                pred_h: pred.height(),
                pred_w: pred.width(),
                gt_h: h,
                gt_w: w,
            });
        }

        let tp = pred
            .pixels
            .iter()
            .zip(gt.pixels.iter())
            .filter(|&(&p, &g)| p && g)
            .count() as u64;

        let matching = match_components(pred, gt, centroid_tol);
        let false_pixels: u64 = matching
            .unmatched_pred()
            .iter()
            .map(|&i| matching.pred_components[i].len() as u64)
            .sum();

        self.images.push(ImageStats {
            tp,
            gt_pixels: gt.foreground_count() as u64,
            pred_pixels: pred.foreground_count() as u64,
            matched_targets: matching.matched_gt_count() as u64,
            total_targets: matching.gt_components.len() as u64,
            false_pixels,
            total_pixels: (h * w) as u64,
        });
        Ok(())
    }

    pub fn merge(&mut self, other: MetricAccumulator) {
        self.images.extend(other.images);
    }

    /// Dataset-level intersection over union: counts are summed across
    /// images before the ratio. Empty-everywhere is a perfect score.
    pub fn iou(&self) -> f64 {
        let tp: u64 = self.images.iter().map(|s| s.tp).sum();
        let union: u64 = self
            .images
            .iter()
            .map(|s| s.gt_pixels + s.pred_pixels - s.tp)
            .sum();
        if union == 0 {
            1.0
        } else {
            tp as f64 / union as f64
        }
    }

    /// Mean of per-image IoU ratios (per-image empty-empty counts as 1).
    pub fn niou(&self) -> f64 {
        if self.images.is_empty() {
            return 1.0;
        }
        self.images.iter().map(ImageStats::iou).sum::<f64>() / self.images.len() as f64
    }

    /// Detection probability: mean over images of (matched gt components /
    /// total gt components). Images with no ground-truth target cannot be
    /// scored and are excluded with a warning; if every image is excluded
    /// the result is 1 (nothing to detect, nothing missed).
    pub fn pd(&self) -> f64 {
        let mut sum = 0.0;
        let mut counted = 0usize;
        for (i, s) in self.images.iter().enumerate() {
            if s.total_targets == 0 {
                log::warn!("pd: image {i} has no ground-truth targets; excluded from the mean");
                continue;
            }
            sum += s.matched_targets as f64 / s.total_targets as f64;
            counted += 1;
        }
        if counted == 0 {
            1.0
        } else {
            sum / counted as f64
        }
    }

    /// False-alarm rate: mean over images of (pixels of unmatched predicted
    /// components / image area). Typically reported ×10⁻⁶.
    pub fn fa(&self) -> f64 {
        if self.images.is_empty() {
            return 0.0;
        }
        self.images
            .iter()
            .map(|s| s.false_pixels as f64 / s.total_pixels as f64)
            .sum::<f64>()
            / self.images.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn mask_from(coords: &[(usize, usize)], h: usize, w: usize) -> TargetMask {
        let mut m = Array2::from_elem((h, w), false);
        for &(r, c) in coords {
            m[[r, c]] = true;
        }
        TargetMask::new(m)
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let gt = mask_from(&[(3, 3), (3, 4), (10, 10)], 16, 16);
        let mut acc = MetricAccumulator::new();
        acc.observe(&gt, &gt, 3.0).unwrap();
        assert_eq!(acc.iou(), 1.0);
        assert_eq!(acc.niou(), 1.0);
        assert_eq!(acc.pd(), 1.0);
        assert_eq!(acc.fa(), 0.0);
    }

    #[test]
    fn disjoint_nonempty_masks_score_zero_iou() {
        let pred = mask_from(&[(0, 0)], 16, 16);
        let gt = mask_from(&[(10, 10)], 16, 16);
        let mut acc = MetricAccumulator::new();
        acc.observe(&pred, &gt, 3.0).unwrap();
        assert_eq!(acc.iou(), 0.0);
        assert_eq!(acc.niou(), 0.0);
        assert_eq!(acc.pd(), 0.0);
    }

    #[test]
    fn hand_counted_two_by_two_case() {
        // pred {(0,0),(0,1)}, gt {(0,1),(1,1)}: TP = 1, union = 3.
        // (2x2 images are below the pipeline minimum but the metric itself
        // is size-agnostic.)
        let pred = mask_from(&[(0, 0), (0, 1)], 2, 2);
        let gt = mask_from(&[(0, 1), (1, 1)], 2, 2);
        let mut acc = MetricAccumulator::new();
        acc.observe(&pred, &gt, 3.0).unwrap();
        assert!((acc.iou() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(acc.iou(), acc.niou());
    }

    #[test]
    fn niou_averages_per_image_ratios() {
        let mut acc = MetricAccumulator::new();
        let gt = mask_from(&[(4, 4), (4, 5)], 16, 16);
        acc.observe(&gt, &gt, 3.0).unwrap(); // IoU 1.0
        let half = mask_from(&[(4, 4)], 16, 16);
        acc.observe(&half, &gt, 3.0).unwrap(); // IoU 0.5
        assert!((acc.niou() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn pd_two_of_three_targets() {
        let gt = mask_from(&[(2, 2), (8, 8), (14, 2)], 16, 16);
        let pred = mask_from(&[(2, 2), (8, 8)], 16, 16);
        let mut acc = MetricAccumulator::new();
        acc.observe(&pred, &gt, 3.0).unwrap();
        assert!((acc.pd() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fa_counts_unmatched_component_pixels() {
        let gt = mask_from(&[(50, 50)], 100, 100);
        // Matched blob at gt + an unmatched 5-pixel blob far away.
        let pred = mask_from(
            &[(50, 50), (10, 10), (10, 11), (10, 12), (11, 10), (11, 11)],
            100,
            100,
        );
        let mut acc = MetricAccumulator::new();
        acc.observe(&pred, &gt, 3.0).unwrap();
        assert!((acc.fa() - 5.0 / 10_000.0).abs() < 1e-12);
    }

    #[test]
    fn empty_everywhere_is_perfect() {
        let mut acc = MetricAccumulator::new();
        acc.observe(&TargetMask::empty(8, 8), &TargetMask::empty(8, 8), 3.0)
            .unwrap();
        assert_eq!(acc.iou(), 1.0);
        assert_eq!(acc.niou(), 1.0);
        assert_eq!(acc.pd(), 1.0); // vacuous: no targets existed
    }

    #[test]
    fn merge_is_concatenation() {
        let gt1 = mask_from(&[(2, 2)], 16, 16);
        let gt2 = mask_from(&[(9, 9), (9, 10)], 16, 16);
        let pred2 = mask_from(&[(9, 9)], 16, 16);

        let mut whole = MetricAccumulator::new();
        whole.observe(&gt1, &gt1, 3.0).unwrap();
        whole.observe(&pred2, &gt2, 3.0).unwrap();

        let mut a = MetricAccumulator::new();
        a.observe(&gt1, &gt1, 3.0).unwrap();
        let mut b = MetricAccumulator::new();
        b.observe(&pred2, &gt2, 3.0).unwrap();

        // merge in both orders: same metric values
        let mut ab = a.clone();
        ab.merge(b.clone());
        let mut ba = b;
        ba.merge(a);

        for acc in [&ab, &ba] {
            assert_eq!(acc.n(), whole.n());
            assert_eq!(acc.iou(), whole.iou());
            assert_eq!(acc.niou(), whole.niou());
            assert_eq!(acc.pd(), whole.pd());
            assert_eq!(acc.fa(), whole.fa());
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut acc = MetricAccumulator::new();
        let err = acc
            .observe(&TargetMask::empty(8, 8), &TargetMask::empty(16, 16), 3.0)
            .unwrap_err();
        assert!(err.to_string().contains("shape mismatch"));
    }
}
