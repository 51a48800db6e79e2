//! End-to-end test of the pretrained provider against a tiny
//! randomly-initialized checkpoint written to a tempdir — exercises the
//! real weight-loading, tokenization, preprocessing, and inference paths
//! without network access or real model weights.

use candle_core::{DType, Device};
use candle_nn::{VarBuilder, VarMap};
use candle_transformers::models::clip::{
    text_model::{Activation, ClipTextConfig},
    vision_model::ClipVisionConfig,
    ClipConfig, ClipModel,
};
use lgir_core::{IrImage, LanguagePrior, PriorSource, PromptStyle};
use lgir_embed::{EmbeddingProvider, ModelSpec, PretrainedProvider};
use ndarray::Array2;

fn tiny_spec() -> ModelSpec {
    ModelSpec {
        model_id: "tiny-test-clip".to_string(),
        dim: 32,
        eos_token_id: 63,
        config: ClipConfig {
            text_config: ClipTextConfig {
                vocab_size: 64,
                embed_dim: 32,
                activation: Activation::QuickGelu,
                intermediate_size: 64,
                max_position_embeddings: 16,
                pad_with: None,
                num_hidden_layers: 2,
                num_attention_heads: 2,
                projection_dim: 32,
            },
            vision_config: ClipVisionConfig {
                embed_dim: 32,
                activation: Activation::QuickGelu,
                intermediate_size: 64,
                num_hidden_layers: 2,
                num_attention_heads: 2,
                projection_dim: 32,
                num_channels: 3,
                image_size: 32,
                patch_size: 16,
            },
            logit_scale_init_value: 2.6592,
            image_size: 32,
        },
    }
}

/// Materializes random weights with exactly the tensor names the model
/// expects, by letting the model build itself against a fresh VarMap.
fn write_fixture(dir: &std::path::Path) {
    let spec = tiny_spec();
    let varmap = VarMap::new();
    let vb = VarBuilder::from_varmap(&varmap, DType::F32, &Device::Cpu);
    ClipModel::new(vb, &spec.config).expect("build tiny clip");
    varmap.save(dir.join("model.safetensors")).expect("save weights");

    let vocab: Vec<(&str, u32)> = vec![
        ("[UNK]", 0),
        ("small", 1),
        ("target", 2),
        ("in", 3),
        ("the", 4),
        ("upper", 5),
        ("left", 6),
        ("right", 7),
        ("lower", 8),
        ("center", 9),
        ("corner", 10),
        ("region", 11),
        ("of", 12),
        ("image", 13),
        ("<|endoftext|>", 63),
    ];
    let vocab_json: serde_json::Map<String, serde_json::Value> = vocab
        .into_iter()
        .map(|(k, v)| (k.to_string(), serde_json::json!(v)))
        .collect();
    let tokenizer = serde_json::json!({
        "version": "1.0",
        "truncation": null,
        "padding": null,
        "added_tokens": [],
        "normalizer": {"type": "Lowercase"},
        "pre_tokenizer": {"type": "Whitespace"},
        "post_processor": null,
        "decoder": null,
        "model": {
            "type": "WordLevel",
            "vocab": vocab_json,
            "unk_token": "[UNK]"
        }
    });
    std::fs::write(
        dir.join("tokenizer.json"),
        serde_json::to_string_pretty(&tokenizer).unwrap(),
    )
    .expect("write tokenizer");
}

fn test_image() -> IrImage<f32> {
    IrImage::new(
        "fixture",
        Array2::from_shape_fn((24, 40), |(r, c)| {
            0.2 + 0.6 * (((r * 13 + c * 7) % 11) as f32 / 10.0)
        }),
    )
}

#[test]
fn tiny_checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());

    let provider = PretrainedProvider::load_with_spec(tiny_spec(), dir.path(), "cpu").unwrap();
    assert_eq!(provider.dim(), 32);

    let prior = LanguagePrior::new(
        "small target in the upper left corner",
        PriorSource::Vlm,
        PromptStyle::System,
    );

    // text: deterministic, finite, right width
    let a = provider.encode_text(&prior).unwrap();
    let b = provider.encode_text(&prior).unwrap();
    assert_eq!(a.vector, b.vector);
    assert_eq!(a.vector.len(), 32);
    assert!(a.vector.iter().all(|v| v.is_finite()));

    // a different description maps elsewhere
    let other = LanguagePrior::new(
        "small target in the lower right corner",
        PriorSource::Vlm,
        PromptStyle::System,
    );
    let c = provider.encode_text(&other).unwrap();
    assert!(a.vector.iter().zip(c.vector.iter()).any(|(x, y)| x != y));

    // image: deterministic, finite, right width; preprocessing handles
    // non-square inputs by resizing
    let img = test_image();
    let e1 = provider.encode_image(&img).unwrap();
    let e2 = provider.encode_image(&img).unwrap();
    assert_eq!(e1.vector, e2.vector);
    assert_eq!(e1.vector.len(), 32);
    assert!(e1.vector.iter().all(|v| v.is_finite()));

    // both encoders feed the descriptor
    let td = lgir_embed::descriptor_for(&provider, &img, Some(&prior)).unwrap();
    assert_eq!(td.dim(), 32);
    assert!(td.has_language);
    let expected = &e1.vector + &a.vector;
    assert_eq!(td.vector, expected);
}

#[test]
fn long_text_is_truncated_not_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_fixture(dir.path());
    let provider = PretrainedProvider::load_with_spec(tiny_spec(), dir.path(), "cpu").unwrap();

    // 40 words > max_position_embeddings = 16
    let long = vec!["target"; 40].join(" ");
    let prior = LanguagePrior::new(long, PriorSource::Vlm, PromptStyle::System);
    let v = provider.encode_text(&prior).unwrap();
    assert_eq!(v.vector.len(), 32);
    assert!(v.vector.iter().all(|x| x.is_finite()));
}
