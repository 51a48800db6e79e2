use lgir_core::{IrImage, LanguagePrior};
use ndarray::Array1;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding dimension mismatch: image {image_dim} vs text {text_dim}")]
    DimensionMismatch { image_dim: usize, text_dim: usize },

    #[error("unknown embedding model '{model_id}'")]
    UnknownModel { model_id: String },

    #[error("missing weights for model '{model_id}': {path} not found")]
    MissingWeights { model_id: String, path: String },

    #[error("unsupported device '{device}' (this build runs on cpu)")]
    Device { device: String },

    #[error("image preprocessing failed: {0}")]
    Preprocess(String),

    #[error("tokenizer error: {0}")]
    Tokenizer(String),

    #[error("encoder backend error: {0}")]
    Backend(String),

    #[error("encoder produced a non-finite value")]
    NonFinite,
}

/// Embedding of a textual description.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbedding {
    pub vector: Array1<f32>,
}

/// Embedding of an infrared image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEmbedding {
    pub vector: Array1<f32>,
}

/// Fused conditioning vector: text + image embeddings summed element-wise,
/// or the image embedding alone when no description is available. The
/// dimension is the provider dimension in both cases.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDescriptor {
    pub vector: Array1<f32>,
    /// Whether a text embedding went into the sum.
    pub has_language: bool,
}

impl TargetDescriptor {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// A pair of encoders into one joint embedding space.
///
/// Implementations must be deterministic (same input, same vector) and emit
/// `dim()`-length vectors from both encoders. Providers are read-only after
/// construction; concurrent encode calls are allowed but may be serialized
/// internally.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn encode_text(&self, prior: &LanguagePrior) -> Result<TextEmbedding, EmbedError>;
    fn encode_image(&self, image: &IrImage<f32>) -> Result<ImageEmbedding, EmbedError>;
}

/// Element-wise sum of the two embeddings; with text absent the image
/// embedding passes through unchanged, so the output shape never depends on
/// language availability.
pub fn build_target_descriptor(
    image_emb: &ImageEmbedding,
    text_emb: Option<&TextEmbedding>,
) -> Result<TargetDescriptor, EmbedError> {
    match text_emb {
        Some(t) => {
            if t.vector.len() != image_emb.vector.len() {
                return Err(EmbedError::DimensionMismatch {
                    image_dim: image_emb.vector.len(),
                    text_dim: t.vector.len(),
                });
            }
            Ok(TargetDescriptor {
                vector: &image_emb.vector + &t.vector,
                has_language: true,
            })
        }
        None => Ok(TargetDescriptor {
            vector: image_emb.vector.clone(),
            has_language: false,
        }),
    }
}

/// Encodes one sample end to end: image always, text when a prior is given.
pub fn descriptor_for(
    provider: &dyn EmbeddingProvider,
    image: &IrImage<f32>,
    prior: Option<&LanguagePrior>,
) -> Result<TargetDescriptor, EmbedError> {
    let image_emb = provider.encode_image(image)?;
    let text_emb = prior.map(|p| provider.encode_text(p)).transpose()?;
    build_target_descriptor(&image_emb, text_emb.as_ref())
}
