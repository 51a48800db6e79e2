use ndarray::Array2;

use crate::Scalar;

/// Single-channel infrared image with intensities normalized to `[0, 1]`.
///
/// Construction does not validate; [`crate::validate_sample`] reports
/// violations (range, minimum size, empty id) without panicking, so corrupt
/// inputs can be surfaced as data errors rather than crashes.
#[derive(Debug, Clone, PartialEq)]
pub struct IrImage<S: Scalar = f32> {
    pub pixels: Array2<S>,
    pub id: String,
}

impl<S: Scalar> IrImage<S> {
    pub fn new(id: impl Into<String>, pixels: Array2<S>) -> Self {
        Self {
            pixels,
            id: id.into(),
        }
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }
}

/// Binary ground-truth mask paired with an [`IrImage`] of the same shape.
///
/// `bool` elements make the {0, 1} value invariant unrepresentable rather
/// than merely checked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetMask {
    pub pixels: Array2<bool>,
}

impl TargetMask {
    pub fn new(pixels: Array2<bool>) -> Self {
        Self { pixels }
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            pixels: Array2::from_elem((height, width), false),
        }
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    /// Number of foreground (target) pixels.
    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    pub fn has_target(&self) -> bool {
        self.pixels.iter().any(|&p| p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn foreground_count_counts_true_pixels() {
        let m = TargetMask::new(array![[true, false], [true, true]]);
        assert_eq!(m.foreground_count(), 3);
        assert!(m.has_target());
        assert!(!TargetMask::empty(4, 4).has_target());
    }

    #[test]
    fn image_dims_follow_pixels() {
        let img: IrImage<f32> = IrImage::new("a", Array2::zeros((3, 5)));
        assert_eq!((img.height(), img.width()), (3, 5));
    }
}
