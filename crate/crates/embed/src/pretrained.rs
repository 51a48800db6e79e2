use std::path::Path;

use candle_core::{DType, Device, Tensor};
use candle_nn::VarBuilder;
use candle_transformers::models::clip::{
    text_model::{Activation, ClipTextConfig},
    vision_model::ClipVisionConfig,
    ClipConfig, ClipModel,
};
use lgir_core::{resize_bilinear, IrImage, LanguagePrior};
use ndarray::Array1;
use tokenizers::Tokenizer;

use crate::{EmbedError, EmbeddingProvider, ImageEmbedding, TextEmbedding};

/// Per-channel normalization applied to images before the vision encoder
/// (the constants the encoder family was trained with).
const IMAGE_MEAN: [f32; 3] = [0.481_454_66, 0.457_827_5, 0.408_210_73];
const IMAGE_STD: [f32; 3] = [0.268_629_54, 0.261_302_58, 0.275_777_11];

/// Architecture + tokenizer facts for one pretrained model id.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub model_id: String,
    /// Joint embedding width both encoders project into.
    pub dim: usize,
    /// End-of-text token id; must be the highest id the tokenizer emits,
    /// because the text transformer pools at the argmax position.
    pub eos_token_id: u32,
    pub config: ClipConfig,
}

/// Looks up a known model id (ViT-B/16 is the default choice; ViT-B/32 is
/// also wired up). Weights are NOT fetched here — only the architecture is
/// resolved, so `model_spec("clip-vit-base-patch16").dim` answers shape
/// questions offline.
pub fn model_spec(model_id: &str) -> Result<ModelSpec, EmbedError> {
    match model_id {
        "clip-vit-base-patch16" | "vit-b-16" => Ok(ModelSpec {
            model_id: "clip-vit-base-patch16".to_string(),
            dim: 512,
            eos_token_id: 49_407,
            config: ClipConfig {
                text_config: ClipTextConfig {
                    vocab_size: 49_408,
                    embed_dim: 512,
                    activation: Activation::QuickGelu,
                    intermediate_size: 2048,
                    max_position_embeddings: 77,
                    pad_with: None,
                    num_hidden_layers: 12,
                    num_attention_heads: 8,
                    projection_dim: 512,
                },
                vision_config: ClipVisionConfig {
                    embed_dim: 768,
                    activation: Activation::QuickGelu,
                    intermediate_size: 3072,
                    num_hidden_layers: 12,
                    num_attention_heads: 12,
                    projection_dim: 512,
                    num_channels: 3,
                    image_size: 224,
                    patch_size: 16,
                },
                logit_scale_init_value: 2.6592,
                image_size: 224,
            },
        }),
        "clip-vit-base-patch32" | "vit-b-32" => Ok(ModelSpec {
            model_id: "clip-vit-base-patch32".to_string(),
            dim: 512,
            eos_token_id: 49_407,
            config: ClipConfig {
                text_config: ClipTextConfig::vit_base_patch32(),
                vision_config: ClipVisionConfig::vit_base_patch32(),
                logit_scale_init_value: 2.6592,
                image_size: 224,
            },
        }),
        other => Err(EmbedError::UnknownModel {
            model_id: other.to_string(),
        }),
    }
}

/// CLIP-style joint encoder running on CPU from local weights.
///
/// Expects `model.safetensors` and `tokenizer.json` in the model directory.
/// Inference is pure (no dropout, no state), so identical inputs produce
/// identical vectors.
pub struct PretrainedProvider {
    spec: ModelSpec,
    model: ClipModel,
    tokenizer: Tokenizer,
    device: Device,
}

impl PretrainedProvider {
    /// Loads a registry model (see [`model_spec`]) from `model_dir`.
    pub fn load(model_id: &str, model_dir: &Path, device: &str) -> Result<Self, EmbedError> {
        Self::load_with_spec(model_spec(model_id)?, model_dir, device)
    }

    /// Loads an explicitly-described architecture; lets tests and custom
    /// deployments use sizes the registry does not list.
    pub fn load_with_spec(
        spec: ModelSpec,
        model_dir: &Path,
        device: &str,
    ) -> Result<Self, EmbedError> {
        let device = match device {
            "cpu" => Device::Cpu,
            other => {
                return Err(EmbedError::Device {
                    device: other.to_string(),
                })
            }
        };

        let weights = model_dir.join("model.safetensors");
        let tokenizer_path = model_dir.join("tokenizer.json");
        for path in [&weights, &tokenizer_path] {
            if !path.exists() {
                return Err(EmbedError::MissingWeights {
                    model_id: spec.model_id.clone(),
                    path: path.display().to_string(),
                });
            }
        }

        let data = std::fs::read(&weights).map_err(|e| EmbedError::MissingWeights {
            model_id: spec.model_id.clone(),
            path: format!("{} ({e})", weights.display()),
        })?;
        let vb = VarBuilder::from_buffered_safetensors(data, DType::F32, &device)
            .map_err(|e| EmbedError::Backend(e.to_string()))?;
        let model =
            ClipModel::new(vb, &spec.config).map_err(|e| EmbedError::Backend(e.to_string()))?;
        let tokenizer =
            Tokenizer::from_file(&tokenizer_path).map_err(|e| EmbedError::Tokenizer(e.to_string()))?;

        Ok(Self {
            spec,
            model,
            tokenizer,
            device,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.spec.model_id
    }

    fn token_ids(&self, text: &str) -> Result<Vec<u32>, EmbedError> {
        let enc = self
            .tokenizer
            .encode(text, true)
            .map_err(|e| EmbedError::Tokenizer(e.to_string()))?;
        let mut ids = enc.get_ids().to_vec();
        let eos = self.spec.eos_token_id;
        if ids.last() != Some(&eos) {
            ids.push(eos);
        }
        let max_len = self.spec.config.text_config.max_position_embeddings;
        if ids.len() > max_len {
            ids.truncate(max_len);
            ids[max_len - 1] = eos;
        }
        Ok(ids)
    }
}

fn finite_vector(v: Vec<f32>) -> Result<Array1<f32>, EmbedError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(EmbedError::NonFinite);
    }
    Ok(Array1::from(v))
}

impl EmbeddingProvider for PretrainedProvider {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn encode_text(&self, prior: &LanguagePrior) -> Result<TextEmbedding, EmbedError> {
        let ids = self.token_ids(&prior.text)?;
        let input = Tensor::new(ids.as_slice(), &self.device)
            .and_then(|t| t.unsqueeze(0))
            .map_err(|e| EmbedError::Backend(e.to_string()))?;
        let features = self
            .model
            .get_text_features(&input)
            .and_then(|t| t.squeeze(0))
            .and_then(|t| t.to_vec1::<f32>())
            .map_err(|e| EmbedError::Backend(e.to_string()))?;
        Ok(TextEmbedding {
            vector: finite_vector(features)?,
        })
    }

    fn encode_image(&self, image: &IrImage<f32>) -> Result<ImageEmbedding, EmbedError> {
        if image.pixels.is_empty() {
            return Err(EmbedError::Preprocess("empty image".to_string()));
        }
        let side = self.spec.config.vision_config.image_size;
        let resized = resize_bilinear(&image.pixels, side, side);

        // single-channel IR replicated to the encoder's three channels,
        // then normalized per channel
        let mut data = Vec::with_capacity(3 * side * side);
        for ch in 0..3 {
            for v in resized.iter() {
                data.push((*v - IMAGE_MEAN[ch]) / IMAGE_STD[ch]);
            }
        }
        let pixels = Tensor::from_vec(data, (1, 3, side, side), &self.device)
            .map_err(|e| EmbedError::Backend(e.to_string()))?;
        let features = self
            .model
            .get_image_features(&pixels)
            .and_then(|t| t.squeeze(0))
            .and_then(|t| t.to_vec1::<f32>())
            .map_err(|e| EmbedError::Backend(e.to_string()))?;
        Ok(ImageEmbedding {
            vector: finite_vector(features)?,
        })
    }
}
