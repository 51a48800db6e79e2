use lgir_core::{Scalar, TargetMask};
use ndarray::Array2;

/// Thresholds a probability map into a binary mask. Strictly greater-than:
/// a pixel exactly at the threshold stays background, so an all-0.5 map
/// under the default threshold yields an empty mask.
pub fn binarize<S: Scalar>(prob_map: &Array2<S>, threshold: f64) -> TargetMask {
    let t = S::cast_from(threshold);
    TargetMask::new(prob_map.mapv(|p| p > t))
}
