//! Domain types shared by the whole workspace: infrared images, target
//! masks, language priors, dataset manifests, sample validation, and the
//! SPIE small-target criteria.
//!
//! Everything here is an in-memory value type; file I/O lives in
//! `lgir-datagen`. All types are immutable after construction and safe to
//! share across threads.

mod error;
mod image;
mod resize;
mod sample;
mod spie;
mod validate;

pub use error::CoreError;
pub use image::{IrImage, TargetMask};
pub use resize::{resize_bilinear, resize_nearest_bool};
pub use sample::{
    word_count, DatasetManifest, LanguagePrior, PriorSource, PromptStyle, Sample, Split, Subset,
};
pub use spie::{spie_check, SpieReport, SPIE_AREA_MAX, SPIE_CONTRAST_MAX, SPIE_SNR_MAX};
pub use validate::{validate_sample, ValidationReport};

/// Floating-point element type for image tensors and network math.
///
/// `f32` is the working precision for training and inference; `f64` exists
/// so numerical tests (finite-difference gradient checks) can run the same
/// code at higher precision.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssignOps
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + Default
    + Send
    + Sync
    + 'static
{
    #[inline]
    fn cast_from(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("finite f64 must convert")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub type IrImage32 = IrImage<f32>;
pub type IrImage64 = IrImage<f64>;
pub type Sample32 = Sample<f32>;
pub type Sample64 = Sample<f64>;
