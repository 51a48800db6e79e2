use crate::{word_count, Sample, Scalar, Split};

/// Minimum image side length accepted by the pipeline.
pub const MIN_IMAGE_SIDE: usize = 16;

/// Outcome of [`validate_sample`]: one line per violated invariant.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every stored invariant of a [`Sample`] and reports violations
/// instead of panicking. Pure: same input, same report, no side effects.
pub fn validate_sample<S: Scalar>(sample: &Sample<S>) -> ValidationReport {
    let mut v = Vec::new();
    let img = &sample.image;

    if img.id.is_empty() {
        v.push("empty image id".to_string());
    }
    let (h, w) = (img.height(), img.width());
    if h < MIN_IMAGE_SIDE || w < MIN_IMAGE_SIDE {
        v.push(format!(
            "image too small: {h}x{w} (minimum {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE})"
        ));
    }

    let mut out_of_range = 0usize;
    let mut first_bad = None;
    for (idx, &p) in img.pixels.indexed_iter() {
        if !(p >= S::zero() && p <= S::one()) {
            out_of_range += 1;
            if first_bad.is_none() {
                first_bad = Some((idx, p));
            }
        }
    }
    if let Some(((r, c), p)) = first_bad {
        v.push(format!(
            "pixel out of range: {out_of_range} value(s) outside [0,1], first at ({r},{c}) = {p}"
        ));
    }

    if let Some(mask) = &sample.mask {
        if (mask.height(), mask.width()) != (h, w) {
            v.push(format!(
                "mask/image shape mismatch: {}x{} vs {h}x{w}",
                mask.height(),
                mask.width()
            ));
        }
    } else if sample.split == Split::Train {
        v.push("train sample missing mask".to_string());
    }

    if let Some(prior) = &sample.prior {
        if prior.text.is_empty() {
            v.push("empty language prior text".to_string());
        }
        let counted = word_count(&prior.text);
        if counted != prior.word_count {
            v.push(format!(
                "language prior word count mismatch: recorded {}, counted {counted}",
                prior.word_count
            ));
        }
    }

    ValidationReport { violations: v }
}
