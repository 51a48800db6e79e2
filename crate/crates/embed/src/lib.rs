//! Text/image embeddings and their fusion into the target descriptor that
//! conditions the detection network.
//!
//! Two interchangeable providers implement [`EmbeddingProvider`]:
//! * [`StubProvider`] — deterministic hash-based unit vectors, no weights,
//!   no I/O; the default for tests and offline runs.
//! * [`PretrainedProvider`] — a CLIP-style joint text/image encoder loaded
//!   from local safetensors weights (CPU inference via candle).
//!
//! Both encoders of a provider emit vectors of the same dimension, so the
//! descriptor keeps its shape whether or not language is available — that
//! shape stability is what lets a model trained with language run without
//! it (and vice versa).

mod pretrained;
mod stub;
mod types;

pub use pretrained::{model_spec, ModelSpec, PretrainedProvider};
pub use stub::StubProvider;
pub use types::{
    build_target_descriptor, descriptor_for, EmbedError, EmbeddingProvider, ImageEmbedding,
    TargetDescriptor, TextEmbedding,
};
