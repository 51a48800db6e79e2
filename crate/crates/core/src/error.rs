use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// The mask has no foreground pixels where a target is required.
    #[error("no target: mask has no foreground pixels")]
    NoTarget,

    /// The mask covers the whole image, leaving no background to measure
    /// contrast or noise against.
    #[error("no background: mask covers every pixel")]
    NoBackground,

    #[error("shape mismatch: mask {mask_h}x{mask_w} vs image {image_h}x{image_w}")]
    ShapeMismatch {
        mask_h: usize,
        mask_w: usize,
        image_h: usize,
        image_w: usize,
    },
}
