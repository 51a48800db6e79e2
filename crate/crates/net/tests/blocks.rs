//! Contract tests for the model's building blocks: residual U-blocks,
//! the two fusion blocks, and the output block.

mod util;

use lgir_net::fusion::{FusionBlock, LanguageFusionBlock};
use lgir_net::ops::norm::BN_EPS;
use lgir_net::ops::sigmoid;
use lgir_net::output_block::OutputBlock;
use lgir_net::rsu::{mid_channels, Rsu};
use lgir_net::{Graph, NetError, Tensors};
use ndarray::{ArrayD, IxDyn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use util::{fd, randn, zero_params};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- residual U-block

#[test]
fn ublock_zero_weights_map_zeros_to_zeros() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(11);
    let blk = Rsu::new(&mut t, &mut r, "blk", 4, 8, 4, 16);
    // zero every conv weight and bias; norm layers map 0 -> 0 on their own
    zero_params(&mut t, |n| n.ends_with(".conv.weight") || n.ends_with(".conv.bias"));

    let g = Graph::train();
    let x = g.leaf(ArrayD::zeros(IxDyn(&[1, 8, 32, 32])));
    let y = blk.forward(&g, &mut t, x).unwrap();
    assert_eq!(y.shape(), vec![1, 16, 32, 32]);
    assert!(y.value().iter().all(|&v| v == 0.0), "zero input must propagate to zero output");
}

#[test]
fn ublock_shape_contract_height_four() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(12);
    let blk = Rsu::new(&mut t, &mut r, "blk", 4, 8, mid_channels(16), 16);
    let g = Graph::train();
    let x = g.leaf(randn(&mut r, &[1, 8, 32, 32]));
    let y = blk.forward(&g, &mut t, x).unwrap();
    assert_eq!(y.shape(), vec![1, 16, 32, 32]);
    assert!(y.value().iter().all(|v| v.is_finite()));
}

#[test]
fn ublock_input_gradient_matches_finite_differences() {
    let mut r = rng(13);
    let mut t: Tensors<f64> = Tensors::new();
    let blk = Rsu::new(&mut t, &mut r, "blk", 3, 4, 2, 4);
    let x0 = randn(&mut r, &[1, 4, 8, 8]);
    let w_loss = randn(&mut r, &[1, 4, 8, 8]);

    // analytic gradient
    let g = Graph::train();
    let x = g.leaf_requiring_grad(x0.clone());
    let loss = blk.forward(&g, &mut t, x).unwrap().weighted_sum(&w_loss);
    let grads = g.backward(loss);
    let dx = grads.for_var(&x).unwrap().clone();

    // central differences on a strided subset of input entries.
    // Train-mode outputs use batch statistics, so the running-stat drift the
    // probe forwards cause cannot bias the loss values.
    let mut loss_of = |probe: &ArrayD<f64>| -> f64 {
        let g = Graph::train();
        let x = g.leaf(probe.clone());
        blk.forward(&g, &mut t, x).unwrap().weighted_sum(&w_loss).scalar()
    };
    for flat in (0..x0.len()).step_by(7) {
        let want = fd(&x0, flat, 1e-5, &mut loss_of);
        let got = dx.iter().nth(flat).copied().unwrap();
        let rel = (got - want).abs() / got.abs().max(want.abs()).max(1e-3);
        assert!(rel < 1e-4, "entry {flat}: analytic {got} vs fd {want} (rel {rel:.2e})");
    }
}

#[test]
fn ublock_rejects_spatial_sides_below_its_height() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(14);
    let blk = Rsu::new(&mut t, &mut r, "deep_block", 5, 2, 2, 2);
    let g = Graph::train();
    let x = g.leaf(ArrayD::zeros(IxDyn(&[1, 2, 8, 8])));
    match blk.forward(&g, &mut t, x) {
        Err(NetError::SpatialTooSmall { stage, side, needed }) => {
            assert_eq!(stage, "deep_block");
            assert_eq!((side, needed), (8, 16));
        }
        Err(e) => panic!("wrong error kind: {e:?}"),
        Ok(_) => panic!("expected SpatialTooSmall, got a feature map"),
    }
}

#[test]
fn ublock_rejects_sides_its_pooling_cannot_halve() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(15);
    // height 4 pools twice: 18 -> 9 stops the second pool, so 18 is
    // rejected up front even though it exceeds the minimum side of 8.
    let blk = Rsu::new(&mut t, &mut r, "blk", 4, 2, 2, 2);
    let g = Graph::train();
    let x = g.leaf(ArrayD::zeros(IxDyn(&[1, 2, 18, 18])));
    assert!(matches!(
        blk.forward(&g, &mut t, x),
        Err(NetError::SpatialTooSmall { .. })
    ));
}

#[test]
fn ublock_height_two_is_flat_and_handles_tiny_maps() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(16);
    let blk = Rsu::new(&mut t, &mut r, "flat", 2, 3, 2, 6);
    let g = Graph::train();

    let x = g.leaf(randn(&mut r, &[1, 3, 4, 4]));
    let y = blk.forward(&g, &mut t, x).unwrap();
    assert_eq!(y.shape(), vec![1, 6, 4, 4]);

    // no internal pooling, so even a 1x1 map is fine
    let tiny = g.leaf(randn(&mut r, &[2, 3, 1, 1]));
    let y = blk.forward(&g, &mut t, tiny).unwrap();
    assert_eq!(y.shape(), vec![2, 6, 1, 1]);
}

// ---------------------------------------------------------------- descriptor MLP

#[test]
fn target_mlp_with_zeroed_final_layer_returns_its_bias() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(21);
    let lang = LanguageFusionBlock::new(&mut t, &mut r, "lang", 8, 6);
    zero_params(&mut t, |n| n == "lang.mlp.out.weight");
    let bias = t.get(t.find("lang.mlp.out.bias").unwrap()).clone();

    let g = Graph::train();
    let td = g.leaf(ArrayD::zeros(IxDyn(&[2, 8])));
    let v2 = lang.target_mlp(&g, &t, td);
    assert_eq!(v2.shape(), vec![2, 6]);
    let v = v2.value();
    for n in 0..2 {
        for c in 0..6 {
            assert_eq!(v[[n, c]], bias[[c]], "row {n} must equal the output bias");
        }
    }
}

#[test]
fn target_mlp_projects_512_descriptor_to_256_channels() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(22);
    let lang = LanguageFusionBlock::new(&mut t, &mut r, "lang", 512, 256);
    let g = Graph::train();
    let td = g.leaf(randn(&mut r, &[1, 512]));
    assert_eq!(lang.target_mlp(&g, &t, td).shape(), vec![1, 256]);
}

#[test]
fn target_mlp_descriptor_gradient_matches_finite_differences() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(23);
    let lang = LanguageFusionBlock::new(&mut t, &mut r, "lang", 8, 6);
    let td0 = randn(&mut r, &[1, 8]);

    let g = Graph::train();
    let td = g.leaf_requiring_grad(td0.clone());
    let loss = lang.target_mlp(&g, &t, td).sum_all();
    let grads = g.backward(loss);
    let dtd = grads.for_var(&td).unwrap().clone();

    let mut loss_of = |probe: &ArrayD<f64>| -> f64 {
        let g = Graph::train();
        let td = g.leaf(probe.clone());
        lang.target_mlp(&g, &t, td).sum_all().scalar()
    };
    for flat in 0..td0.len() {
        let want = fd(&td0, flat, 1e-6, &mut loss_of);
        let got = dtd.iter().nth(flat).copied().unwrap();
        let rel = (got - want).abs() / got.abs().max(want.abs()).max(1e-3);
        assert!(rel < 1e-4, "entry {flat}: analytic {got} vs fd {want}");
    }
}

// ---------------------------------------------------------------- language attention

#[test]
fn attention_weights_lie_strictly_inside_unit_interval() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(31);
    let lang = LanguageFusionBlock::new(&mut t, &mut r, "lang", 8, 6);
    let g = Graph::train();
    let v1 = g.leaf(randn(&mut r, &[2, 6]));
    let v2 = g.leaf(randn(&mut r, &[2, 6]));
    let w = lang.attention(&g, &mut t, v1, v2).unwrap();
    assert_eq!(w.shape(), vec![2, 6]);
    assert!(w.value().iter().all(|&x| x > 0.0 && x < 1.0));
}

#[test]
fn attention_zeroed_conv_with_fresh_running_stats_gives_exactly_half() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(32);
    let lang = LanguageFusionBlock::new(&mut t, &mut r, "lang", 8, 6);
    zero_params(&mut t, |n| n.starts_with("lang.gconv."));

    // eval mode: normalization uses the untouched running stats (mean 0,
    // var 1), so a zero conv output stays exactly zero -> sigmoid = 1/2
    let g = Graph::eval();
    let v1 = g.leaf(randn(&mut r, &[2, 6]));
    let v2 = g.leaf(randn(&mut r, &[2, 6]));
    let w = lang.attention(&g, &mut t, v1, v2).unwrap();
    assert!(w.value().iter().all(|&x| x == 0.5), "all weights must be exactly 0.5");
}

#[test]
fn attention_is_sensitive_to_argument_order() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(33);
    let lang = LanguageFusionBlock::new(&mut t, &mut r, "lang", 8, 6);

    let g = Graph::eval();
    let ones = g.leaf(ArrayD::from_elem(IxDyn(&[1, 6]), 1.0));
    let zeros = g.leaf(ArrayD::zeros(IxDyn(&[1, 6])));
    let a = lang.attention(&g, &mut t, ones, zeros).unwrap().value();
    let b = lang.attention(&g, &mut t, zeros, ones).unwrap().value();
    let max_diff = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    assert!(max_diff > 1e-6, "swapping the interleave arguments must change the weights");
}

// ---------------------------------------------------------------- language fusion

#[test]
fn language_fusion_gates_are_identity_at_one_and_annihilate_at_zero() {
    let mut r = rng(41);
    let g: Graph<f64> = Graph::train();
    let feat = g.leaf(randn(&mut r, &[2, 6, 5, 7]));
    let ones = g.leaf(ArrayD::from_elem(IxDyn(&[2, 6]), 1.0));
    let zeros = g.leaf(ArrayD::zeros(IxDyn(&[2, 6])));

    let kept = feat.scale_channels(ones).value();
    assert_eq!(*kept, *feat.value(), "unit gates must reproduce the input exactly");
    let gone = feat.scale_channels(zeros).value();
    assert!(gone.iter().all(|&v| v == 0.0), "zero gates must annihilate the input");
}

#[test]
fn language_fusion_ratio_is_spatially_constant_per_channel() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(42);
    let lang = LanguageFusionBlock::new(&mut t, &mut r, "lang", 8, 6);

    let g = Graph::train();
    let feat0 = randn(&mut r, &[2, 6, 5, 7]);
    let feat = g.leaf(feat0.clone());
    let td = g.leaf(randn(&mut r, &[2, 8]));
    let (fused, w) = lang.forward(&g, &mut t, feat, td).unwrap();

    assert_eq!(fused.shape(), vec![2, 6, 5, 7]);
    let wv = w.value();
    assert!(wv.iter().all(|&x| x > 0.0 && x < 1.0));

    let fv = fused.value();
    for n in 0..2 {
        for c in 0..6 {
            for h in 0..5 {
                for x in 0..7 {
                    let inp = feat0[[n, c, h, x]];
                    if inp.abs() > 1e-9 {
                        let ratio = fv[[n, c, h, x]] / inp;
                        assert!(
                            (ratio - wv[[n, c]]).abs() < 1e-12,
                            "gating must be a per-channel scalar multiply"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn language_fusion_rejects_wrong_channel_count() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(43);
    let lang = LanguageFusionBlock::new(&mut t, &mut r, "lang", 8, 6);
    let g = Graph::train();
    let feat = g.leaf(randn(&mut r, &[1, 5, 4, 4]));
    let td = g.leaf(randn(&mut r, &[1, 8]));
    assert!(matches!(
        lang.forward(&g, &mut t, feat, td),
        Err(NetError::ShapeMismatch { .. })
    ));
}

// ---------------------------------------------------------------- encoder/decoder fusion

#[test]
fn fusion_block_maps_zeros_to_zeros() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(51);
    let fuse = FusionBlock::new(&mut t, &mut r, "f", 4);
    let g = Graph::eval();
    let z1 = g.leaf(ArrayD::zeros(IxDyn(&[1, 4, 6, 6])));
    let z2 = g.leaf(ArrayD::zeros(IxDyn(&[1, 4, 6, 6])));
    let out = fuse.forward(&g, &mut t, z1, z2).unwrap();
    assert!(out.value().iter().all(|&v| v == 0.0));
}

#[test]
fn fusion_block_preserves_the_common_shape() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(52);
    let fuse = FusionBlock::new(&mut t, &mut r, "f", 32);
    let g = Graph::train();
    let e = g.leaf(randn(&mut r, &[1, 32, 64, 64]));
    let d = g.leaf(randn(&mut r, &[1, 32, 64, 64]));
    let out = fuse.forward(&g, &mut t, e, d).unwrap();
    assert_eq!(out.shape(), vec![1, 32, 64, 64]);
}

#[test]
fn fusion_block_matches_external_gate_decomposition() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(53);
    let fuse = FusionBlock::new(&mut t, &mut r, "f", 4);

    // nontrivial normalization state so the oracle exercises every term
    for branch in ["enc", "dec"] {
        for (name, offset) in [("gamma", 0.5), ("beta", 0.0), ("running_mean", 0.0)] {
            let id = t.find(&format!("f.{branch}.bn.{name}")).unwrap();
            t.set(id, randn(&mut r, &[4]).mapv(|v| v * 0.3 + offset));
        }
        let id = t.find(&format!("f.{branch}.bn.running_var")).unwrap();
        t.set(id, randn(&mut r, &[4]).mapv(|v| v.abs() + 0.5));
    }

    let enc0 = randn(&mut r, &[2, 4, 3, 3]);
    let dec0 = randn(&mut r, &[2, 4, 3, 3]);
    let g = Graph::eval();
    let out = fuse
        .forward(&g, &mut t, g.leaf(enc0.clone()), g.leaf(dec0.clone()))
        .unwrap()
        .value();

    // recompute gate_e . enc + gate_d . dec step by step from the registry
    let read = |name: &str| t.get(t.find(name).unwrap()).clone();
    let gate = |branch: &str, feat: &ArrayD<f64>, n: usize, c: usize| -> f64 {
        let w = read(&format!("f.{branch}.dw.weight"));
        let b = read(&format!("f.{branch}.dw.bias"));
        let gamma = read(&format!("f.{branch}.bn.gamma"));
        let beta = read(&format!("f.{branch}.bn.beta"));
        let rm = read(&format!("f.{branch}.bn.running_mean"));
        let rv = read(&format!("f.{branch}.bn.running_var"));
        let mut pool = 0.0;
        for h in 0..3 {
            for x in 0..3 {
                pool += feat[[n, c, h, x]];
            }
        }
        pool /= 9.0;
        let z = w[[c, 0, 0, 0]] * pool + b[[c]];
        let normed = (z - rm[[c]]) / (rv[[c]] + BN_EPS).sqrt() * gamma[[c]] + beta[[c]];
        sigmoid(normed)
    };
    for n in 0..2 {
        for c in 0..4 {
            let ge = gate("enc", &enc0, n, c);
            let gd = gate("dec", &dec0, n, c);
            for h in 0..3 {
                for x in 0..3 {
                    let want = ge * enc0[[n, c, h, x]] + gd * dec0[[n, c, h, x]];
                    let got = out[[n, c, h, x]];
                    assert!((got - want).abs() < 1e-12, "{got} vs {want} at {n},{c},{h},{x}");
                }
            }
        }
    }
}

#[test]
fn fusion_block_rejects_mismatched_shapes() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(54);
    let fuse = FusionBlock::new(&mut t, &mut r, "f", 4);
    let g = Graph::train();
    let e = g.leaf(randn(&mut r, &[1, 4, 6, 6]));
    let d = g.leaf(randn(&mut r, &[1, 4, 3, 3]));
    assert!(matches!(
        fuse.forward(&g, &mut t, e, d),
        Err(NetError::ShapeMismatch { .. })
    ));
}

// ---------------------------------------------------------------- output block

fn decoder_maps<'g>(
    g: &'g Graph<f64>,
    r: &mut ChaCha8Rng,
    zeros: bool,
) -> [lgir_net::Var<'g, f64>; 6] {
    let shapes: [[usize; 4]; 6] = [
        [1, 2, 8, 8],
        [1, 2, 4, 4],
        [1, 2, 2, 2],
        [1, 4, 2, 2],
        [1, 4, 1, 1],
        [1, 4, 1, 1],
    ];
    shapes.map(|s| {
        if zeros {
            g.leaf(ArrayD::zeros(IxDyn(&s)))
        } else {
            g.leaf(randn(r, &s))
        }
    })
}

#[test]
fn output_block_zero_weights_reduce_to_bias_constants() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(61);
    let out = OutputBlock::new(&mut t, &mut r, "out", &[2, 2, 2, 4, 4, 4]);
    zero_params(&mut t, |n| n.ends_with(".weight"));

    let g = Graph::eval();
    let maps = decoder_maps(&g, &mut r, true);
    let o = out.forward(&g, &t, &maps, (8, 8)).unwrap();

    let final_bias = t.get(t.find("out.final.bias").unwrap())[[0]];
    assert_eq!(o.final_logits.shape(), vec![1, 1, 8, 8]);
    for &v in o.final_logits.value().iter() {
        assert!((v - final_bias).abs() < 1e-12, "final map must be the bias constant");
    }
    for (k, side) in o.side_logits.iter().enumerate() {
        let side_bias = t.get(t.find(&format!("out.side{}.bias", k + 1)).unwrap())[[0]];
        for &v in side.value().iter() {
            assert!((v - side_bias).abs() < 1e-12, "side {k} must be its bias constant");
        }
    }
}

#[test]
fn output_block_scale_field_lies_in_unit_interval() {
    let mut t: Tensors<f64> = Tensors::new();
    let mut r = rng(62);
    let out = OutputBlock::new(&mut t, &mut r, "out", &[2, 2, 2, 4, 4, 4]);
    let g = Graph::train();
    let maps = decoder_maps(&g, &mut r, false);
    let o = out.forward(&g, &t, &maps, (8, 8)).unwrap();

    assert_eq!(o.scale.shape(), vec![1, 1, 8, 8]);
    assert!(o.scale.value().iter().all(|&v| v > 0.0 && v < 1.0));
    assert_eq!(o.side_logits.len(), 6);
    for side in &o.side_logits {
        assert_eq!(side.shape(), vec![1, 1, 8, 8]);
    }
    assert!(o.final_logits.value().iter().all(|v| v.is_finite()));
}
