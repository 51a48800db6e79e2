use lgir_core::{IrImage, LanguagePrior};
use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::{EmbedError, EmbeddingProvider, ImageEmbedding, TextEmbedding};

/// Offline embedding provider: inputs are hashed to a seed that drives a
/// pseudo-random unit-norm vector. Identical inputs map to identical
/// vectors, distinct inputs to (almost surely) distinct ones, and no
/// weights or network access are involved — which makes it the default for
/// tests and for training runs that only need *consistent* conditioning,
/// not semantics.
#[derive(Debug, Clone)]
pub struct StubProvider {
    seed: u64,
    dim: usize,
}

impl StubProvider {
    pub fn new(seed: u64, dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self { seed, dim }
    }

    /// Hash (domain tag, payload) into a unit vector.
    fn vector_for(&self, tag: &[u8], payload: &[u8]) -> Array1<f32> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(tag);
        hasher.update(payload);
        let digest = hasher.finalize();
        let mut rng_seed = [0u8; 32];
        rng_seed.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(rng_seed);

        let mut v = Array1::from_shape_fn(self.dim, |_| {
            let x: f32 = StandardNormal.sample(&mut rng);
            x
        });
        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if norm > 0.0 {
            v.mapv_inplace(|x| x / norm);
        } else {
            v[0] = 1.0;
        }
        v
    }
}

impl EmbeddingProvider for StubProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode_text(&self, prior: &LanguagePrior) -> Result<TextEmbedding, EmbedError> {
        Ok(TextEmbedding {
            vector: self.vector_for(b"text", prior.text.as_bytes()),
        })
    }

    fn encode_image(&self, image: &IrImage<f32>) -> Result<ImageEmbedding, EmbedError> {
        let mut payload = Vec::with_capacity(8 + image.pixels.len() * 4);
        payload.extend_from_slice(&(image.height() as u32).to_le_bytes());
        payload.extend_from_slice(&(image.width() as u32).to_le_bytes());
        for p in image.pixels.iter() {
            payload.extend_from_slice(&p.to_le_bytes());
        }
        Ok(ImageEmbedding {
            vector: self.vector_for(b"image", &payload),
        })
    }
}
