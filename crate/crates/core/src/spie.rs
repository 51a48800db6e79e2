use crate::{CoreError, IrImage, Scalar, TargetMask};

/// SPIE small-target thresholds: a target qualifies when it occupies less
/// than 0.15% of the image, its contrast ratio is below 0.15, and its
/// signal-to-noise ratio is under 1.5.
pub const SPIE_AREA_MAX: f64 = 0.0015;
pub const SPIE_CONTRAST_MAX: f64 = 0.15;
pub const SPIE_SNR_MAX: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpieReport {
    /// Foreground pixel count over total pixel count.
    pub area_ratio: f64,
    /// |mean(target) − mean(background)| / mean(background).
    pub contrast_ratio: f64,
    /// |mean(target) − mean(background)| / stddev(background).
    pub snr: f64,
    pub is_small_target: bool,
}

/// Measures a target against the SPIE small-target criteria.
///
/// Background is the complement of the mask over the whole image (no local
/// window), and stddev is the population standard deviation; both choices
/// are fixed conventions of this artifact, not claims about how any dataset
/// was curated. Degenerate backgrounds (zero mean or zero variance) produce
/// non-finite ratios, which never satisfy the criteria.
pub fn spie_check<S: Scalar>(mask: &TargetMask, image: &IrImage<S>) -> Result<SpieReport, CoreError> {
    let (h, w) = (image.height(), image.width());
    if (mask.height(), mask.width()) != (h, w) {
        return Err(CoreError::ShapeMismatch {
            mask_h: mask.height(),
            mask_w: mask.width(),
            image_h: h,
            image_w: w,
        });
    }

    let mut fg_sum = 0.0f64;
    let mut fg_n = 0usize;
    let mut bg_sum = 0.0f64;
    let mut bg_sq_sum = 0.0f64;
    let mut bg_n = 0usize;
    for (p, &m) in image.pixels.iter().zip(mask.pixels.iter()) {
        let v = p.to_f64_lossy();
        if m {
            fg_sum += v;
            fg_n += 1;
        } else {
            bg_sum += v;
            bg_sq_sum += v * v;
            bg_n += 1;
        }
    }
    if fg_n == 0 {
        return Err(CoreError::NoTarget);
    }
    if bg_n == 0 {
        return Err(CoreError::NoBackground);
    }

    let fg_mean = fg_sum / fg_n as f64;
    let bg_mean = bg_sum / bg_n as f64;
    let bg_var = (bg_sq_sum / bg_n as f64 - bg_mean * bg_mean).max(0.0);
    let bg_std = bg_var.sqrt();
    let diff = (fg_mean - bg_mean).abs();

    let area_ratio = fg_n as f64 / (h * w) as f64;
    let contrast_ratio = diff / bg_mean;
    let snr = diff / bg_std;
    let is_small_target =
        area_ratio < SPIE_AREA_MAX && contrast_ratio < SPIE_CONTRAST_MAX && snr < SPIE_SNR_MAX;

    Ok(SpieReport {
        area_ratio,
        contrast_ratio,
        snr,
        is_small_target,
    })
}
