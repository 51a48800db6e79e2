//! The full detection network: five encoder u-blocks, a bottleneck
//! decoder, language-conditioned gating at the deepest level, five
//! fusion-merged decoder u-blocks, and the output assembly.

use lgir_core::Scalar;
use ndarray::ArrayD;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fusion::{FusionBlock, LanguageFusionBlock};
use crate::graph::{Graph, Var};
use crate::output_block::{OutputBlock, OutputMaps};
use crate::rsu::{mid_channels, Rsu};
use crate::tensors::Tensors;
use crate::NetError;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct LgnetConfig {
    /// Input image channels (infrared is single-channel).
    pub in_channels: usize,
    /// Output width of encoder stages E1..E5.
    pub stage_channels: [usize; 5],
    /// U-block height per stage; decoders mirror their encoder stage.
    pub ublock_heights: [usize; 5],
    /// Target descriptor length; must match the embedding provider.
    pub descriptor_dim: usize,
    /// (H, W) every input is resized to before the forward pass.
    pub input_size: (usize, usize),
    /// Weight initialization seed.
    pub seed: u64,
}

impl Default for LgnetConfig {
    fn default() -> Self {
        Self {
            in_channels: 1,
            stage_channels: [16, 32, 64, 128, 256],
            ublock_heights: [7, 6, 5, 4, 4],
            descriptor_dim: 512,
            input_size: (512, 512),
            seed: 42,
        }
    }
}

impl LgnetConfig {
    /// Output channels of each decoder D1..D6. D6 keeps the bottleneck
    /// width; D5..D2 step back down the encoder ladder; D1 stays at the
    /// shallowest width.
    pub fn decoder_channels(&self) -> [usize; 6] {
        let c = &self.stage_channels;
        [c[0], c[0], c[1], c[2], c[3], c[4]]
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.in_channels == 0 {
            return Err(NetError::Config("in_channels must be positive".into()));
        }
        if self.descriptor_dim == 0 {
            return Err(NetError::Config("descriptor_dim must be positive".into()));
        }
        if self.stage_channels.iter().any(|&c| c == 0) {
            return Err(NetError::Config("stage channels must be positive".into()));
        }
        if self.stage_channels[4] % 2 != 0 {
            return Err(NetError::Config(
                "deepest stage channels must be even (two-group attention conv)".into(),
            ));
        }
        if self.ublock_heights.iter().any(|&h| h < 2) {
            return Err(NetError::Config("u-block heights must be at least 2".into()));
        }
        let (h, w) = self.input_size;
        // four inter-stage 2× pools
        if h % 16 != 0 || w % 16 != 0 || h == 0 || w == 0 {
            return Err(NetError::Config(format!(
                "input size {h}x{w} must be a positive multiple of 16"
            )));
        }
        for (i, &height) in self.ublock_heights.iter().enumerate() {
            let side = (h.min(w)) >> i; // resolution entering stage i+1
            let need = if height == 2 { 1 } else { 1 << (height - 1) };
            let mult = if height == 2 { 1 } else { 1 << (height - 2) };
            if side < need || side % mult != 0 {
                return Err(NetError::Config(format!(
                    "stage {} at side {side} cannot host a height-{height} u-block",
                    i + 1
                )));
            }
        }
        Ok(())
    }
}

/// One forward pass's outputs; all `Var`s live on the graph passed to
/// [`Lgnet::forward`].
pub struct LgnetOutputs<'g, S: Scalar> {
    /// Final probability map [N, 1, H, W].
    pub final_prob: Var<'g, S>,
    /// D1..D6 probability maps, each upsampled to [N, 1, H, W].
    pub side_probs: Vec<Var<'g, S>>,
    /// Language attention weights applied at the deepest encoder [N, C5].
    pub attention_e5: Var<'g, S>,
    /// Language attention weights applied at the bottleneck decoder [N, C5].
    pub attention_d6: Var<'g, S>,
    /// Spatial scaling field from the output assembly [N, 1, H, W].
    pub scale: Var<'g, S>,
}

pub struct Lgnet<S: Scalar> {
    config: LgnetConfig,
    tensors: Tensors<S>,
    encoders: Vec<Rsu>,
    bottleneck: Rsu,
    /// D5..D1 in forward order.
    decoders: Vec<Rsu>,
    /// Shared between the E5 and D6 applications.
    language: LanguageFusionBlock,
    /// F5..F1, pairing each decoder with its encoder skip.
    fusions: Vec<FusionBlock>,
    output: OutputBlock,
}

impl<S: Scalar> Lgnet<S> {
    pub fn new(config: LgnetConfig) -> Result<Self, NetError> {
        config.validate()?;
        let mut t = Tensors::new();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let c = config.stage_channels;
        let hgt = config.ublock_heights;

        let mut encoders = Vec::with_capacity(5);
        let mut cin = config.in_channels;
        for i in 0..5 {
            encoders.push(Rsu::new(
                &mut t,
                &mut rng,
                &format!("enc{}", i + 1),
                hgt[i],
                cin,
                mid_channels(c[i]),
                c[i],
            ));
            cin = c[i];
        }

        let bottleneck = Rsu::new(
            &mut t,
            &mut rng,
            "dec6",
            hgt[4],
            c[4],
            mid_channels(c[4]),
            c[4],
        );

        // D5..D1: input = fused encoder-level map, output steps back down
        let dec_out = [c[3], c[2], c[1], c[0], c[0]];
        let dec_in = [c[4], c[3], c[2], c[1], c[0]];
        let dec_height = [hgt[4], hgt[3], hgt[2], hgt[1], hgt[0]];
        let mut decoders = Vec::with_capacity(5);
        for i in 0..5 {
            decoders.push(Rsu::new(
                &mut t,
                &mut rng,
                &format!("dec{}", 5 - i),
                dec_height[i],
                dec_in[i],
                mid_channels(dec_out[i]),
                dec_out[i],
            ));
        }

        let language =
            LanguageFusionBlock::new(&mut t, &mut rng, "language", config.descriptor_dim, c[4]);

        let mut fusions = Vec::with_capacity(5);
        for i in 0..5 {
            // F5 gates C5-wide maps, F4 gates C4-wide, ...
            fusions.push(FusionBlock::new(
                &mut t,
                &mut rng,
                &format!("fuse{}", 5 - i),
                c[4 - i],
            ));
        }

        let output = OutputBlock::new(&mut t, &mut rng, "output", &config.decoder_channels());

        Ok(Self {
            config,
            tensors: t,
            encoders,
            bottleneck,
            decoders,
            language,
            fusions,
            output,
        })
    }

    pub fn config(&self) -> &LgnetConfig {
        &self.config
    }

    pub fn tensors(&self) -> &Tensors<S> {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut Tensors<S> {
        &mut self.tensors
    }

    /// Runs the network. `image`: [N, in_channels, H, W] matching the
    /// configured input size. `td`: target descriptors [N, descriptor_dim].
    pub fn forward<'g>(
        &mut self,
        g: &'g Graph<S>,
        image: &ArrayD<S>,
        td: &ArrayD<S>,
    ) -> Result<LgnetOutputs<'g, S>, NetError> {
        let (ih, iw) = self.config.input_size;
        let want = vec![
            image.shape().first().copied().unwrap_or(0),
            self.config.in_channels,
            ih,
            iw,
        ];
        if image.ndim() != 4 || image.shape() != want.as_slice() {
            return Err(NetError::ShapeMismatch {
                what: "network input",
                expected: want,
                got: image.shape().to_vec(),
            });
        }
        let n = image.shape()[0];
        if td.ndim() != 2 || td.shape()[0] != n {
            return Err(NetError::ShapeMismatch {
                what: "target descriptor batch",
                expected: vec![n, self.config.descriptor_dim],
                got: td.shape().to_vec(),
            });
        }
        if td.shape()[1] != self.config.descriptor_dim {
            return Err(NetError::DescriptorLength {
                expected: self.config.descriptor_dim,
                got: td.shape()[1],
            });
        }

        let t = &mut self.tensors;
        let x = g.leaf(image.clone());
        let td_var = g.leaf(td.clone());

        // encoder ladder with 2× pooling between stages
        let mut enc_outs = Vec::with_capacity(5);
        let mut cur = x;
        for (i, enc) in self.encoders.iter().enumerate() {
            if i > 0 {
                cur = g.maxpool2(cur);
            }
            cur = enc.forward(g, t, cur)?;
            check_finite(&cur, enc.name())?;
            enc_outs.push(cur);
        }

        let d6 = self.bottleneck.forward(g, t, enc_outs[4])?;
        check_finite(&d6, "dec6")?;

        // language gating at the deepest level; both applications share
        // parameters, and their fused maps are summed
        let (lf_e5, att_e5) = self.language.forward(g, t, enc_outs[4], td_var)?;
        let (lf_d6, att_d6) = self.language.forward(g, t, d6, td_var)?;
        let mut prev = lf_e5.add(lf_d6);
        check_finite(&prev, "language fusion")?;

        // decoder ladder: fuse encoder skip with the (upsampled) previous
        // decoder output, then run the stage's u-block
        let mut dec_outs: Vec<Var<'g, S>> = Vec::with_capacity(6); // D6..D1
        dec_outs.push(d6);
        for (i, dec) in self.decoders.iter().enumerate() {
            let skip = enc_outs[4 - i];
            let sshape = skip.shape();
            let up = g.upsample_bilinear(prev, sshape[2], sshape[3]);
            let fused = self.fusions[i].forward(g, t, skip, up)?;
            let out = dec.forward(g, t, fused)?;
            check_finite(&out, dec.name())?;
            dec_outs.push(out);
            prev = out;
        }

        // reorder to D1..D6 for the output assembly
        let maps: [Var<'g, S>; 6] = [
            dec_outs[5],
            dec_outs[4],
            dec_outs[3],
            dec_outs[2],
            dec_outs[1],
            dec_outs[0],
        ];
        let OutputMaps {
            final_logits,
            side_logits,
            scale,
        } = self.output.forward(g, t, &maps, (ih, iw))?;

        let final_prob = final_logits.sigmoid();
        check_finite(&final_prob, "output block")?;
        let side_probs: Vec<Var<'g, S>> = side_logits.into_iter().map(|v| v.sigmoid()).collect();

        Ok(LgnetOutputs {
            final_prob,
            side_probs,
            attention_e5: att_e5,
            attention_d6: att_d6,
            scale,
        })
    }
}

fn check_finite<S: Scalar>(v: &Var<'_, S>, stage: &str) -> Result<(), NetError> {
    if v.value().iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(NetError::NonFinite {
            stage: stage.to_string(),
        })
    }
}
