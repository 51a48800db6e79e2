use std::collections::HashSet;

use lgir_core::TargetMask;

use crate::components::{connected_components, Component};

/// Result of pairing predicted components with ground-truth components.
#[derive(Debug, Clone)]
pub struct ComponentMatch {
    pub pred_components: Vec<Component>,
    pub gt_components: Vec<Component>,
    /// `(pred_idx, gt_idx)` pairs; each index appears at most once.
    pub matches: Vec<(usize, usize)>,
}

impl ComponentMatch {
    /// Predicted components that matched no ground-truth component.
    pub fn unmatched_pred(&self) -> Vec<usize> {
        let used: HashSet<usize> = self.matches.iter().map(|&(p, _)| p).collect();
        (0..self.pred_components.len())
            .filter(|i| !used.contains(i))
            .collect()
    }

    /// Number of ground-truth components that were detected.
    pub fn matched_gt_count(&self) -> usize {
        self.matches.len()
    }
}

/// Pairs components of `pred` and `gt` one-to-one.
///
/// A pair is a candidate when the components share at least one pixel or
/// their centroids lie within `centroid_tol` (Euclidean, pixels).
/// Candidates are consumed greedily in order of increasing centroid
/// distance (ties broken by index order, so the result is deterministic).
pub fn match_components(pred: &TargetMask, gt: &TargetMask, centroid_tol: f64) -> ComponentMatch {
    assert!(centroid_tol >= 0.0, "centroid tolerance must be >= 0");
    let pred_components = connected_components(pred);
    let gt_components = connected_components(gt);

    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (pi, pc) in pred_components.iter().enumerate() {
        let p_set: HashSet<(usize, usize)> = pc.pixels.iter().copied().collect();
        let (pr, pcl) = pc.centroid();
        for (gi, gc) in gt_components.iter().enumerate() {
            let (gr, gcl) = gc.centroid();
            let dist = ((pr - gr).powi(2) + (pcl - gcl).powi(2)).sqrt();
            let overlaps = gc.pixels.iter().any(|px| p_set.contains(px));
            if overlaps || dist <= centroid_tol {
                candidates.push((dist, pi, gi));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut pred_used = vec![false; pred_components.len()];
    let mut gt_used = vec![false; gt_components.len()];
    let mut matches = Vec::new();
    for (_, pi, gi) in candidates {
        if !pred_used[pi] && !gt_used[gi] {
            pred_used[pi] = true;
            gt_used[gi] = true;
            matches.push((pi, gi));
        }
    }

    ComponentMatch {
        pred_components,
        gt_components,
        matches,
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
    fn identical_single_blob_matches_once() {
        let m = mask_from(&[(3, 3), (3, 4), (4, 3)], 8, 8);
        let result = match_components(&m, &m, 3.0);
        assert_eq!(result.matches, vec![(0, 0)]);
        assert!(result.unmatched_pred().is_empty());
    }

    #[test]
    fn distant_blob_without_overlap_does_not_match() {
        let pred = mask_from(&[(0, 0)], 16, 16);
        let gt = mask_from(&[(10, 0)], 16, 16);
        let result = match_components(&pred, &gt, 3.0);
        assert!(result.matches.is_empty());
        assert_eq!(result.unmatched_pred(), vec![0]);
    }

    #[test]
    fn one_pred_overlapping_two_gt_matches_once() {
        // Pred is a horizontal bar crossing both gt blobs; one-to-one
        // matching must consume the pred component exactly once, on the
        // closer-centroid gt.
        let pred = mask_from(&[(4, 1), (4, 2), (4, 3), (4, 4), (4, 5), (4, 6)], 9, 9);
        let gt = mask_from(&[(4, 1), (4, 6), (5, 6)], 9, 9);
        let gt_cc = connected_components(&gt);
        assert_eq!(gt_cc.len(), 2);

        let result = match_components(&pred, &gt, 3.0);
        assert_eq!(result.matches.len(), 1);

        // Enumerate candidates by hand: pred centroid (4, 3.5); gt centroids
        // (4, 1) dist 2.5 and (4.5, 6) dist ~2.55 -> greedy picks gt 0.
        assert_eq!(result.matches[0], (0, 0));
    }

    #[test]
    fn centroid_proximity_matches_without_overlap() {
        let pred = mask_from(&[(4, 4)], 12, 12);
        let gt = mask_from(&[(4, 6)], 12, 12);
        assert_eq!(match_components(&pred, &gt, 3.0).matches.len(), 1);
        assert_eq!(match_components(&pred, &gt, 1.0).matches.len(), 0);
    }

    #[test]
    fn overlap_matches_even_when_centroids_are_far() {
        // A long thin pred blob overlaps a tiny gt blob at its end; the
        // centroid distance exceeds the tolerance but overlap still counts.
        let coords: Vec<(usize, usize)> = (0..15).map(|c| (7usize, c)).collect();
        let pred = mask_from(&coords, 16, 16);
        let gt = mask_from(&[(7, 14)], 16, 16);
        let result = match_components(&pred, &gt, 3.0);
        assert_eq!(result.matches.len(), 1);
    }

    #[test]
    fn greedy_is_one_to_one_both_ways() {
        // Two pred blobs near one gt blob: only one may claim it.
        let pred = mask_from(&[(4, 3), (4, 7)], 12, 12);
        let gt = mask_from(&[(4, 5)], 12, 12);
        let result = match_components(&pred, &gt, 3.0);
        assert_eq!(result.matches.len(), 1);
        assert_eq!(result.unmatched_pred().len(), 1);
    }
}
