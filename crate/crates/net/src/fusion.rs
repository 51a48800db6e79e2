//! Channel-attention fusion blocks.
//!
//! [`FusionBlock`] merges an encoder skip with the upsampled decoder map:
//! each side is gated by its own squeeze (GAP → depth-wise 1×1 conv →
//! batch norm → sigmoid) and the gated maps are added.
//!
//! [`LanguageFusionBlock`] gates a feature map with weights computed from
//! the pooled features interleaved with an MLP projection of the target
//! descriptor, mixed by a grouped 1×1 convolution (2 groups).

use lgir_core::Scalar;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Var};
use crate::layers::{BatchNorm, Conv2d, Linear};
use crate::ops::conv::ConvSpec;
use crate::tensors::Tensors;
use crate::NetError;

/// GAP → depth-wise 1×1 conv → batch norm → sigmoid, yielding one gate
/// value per channel.
pub struct GateBranch {
    channels: usize,
    dw: Conv2d,
    bn: BatchNorm,
}

impl GateBranch {
    pub fn new<S: Scalar>(t: &mut Tensors<S>, rng: &mut ChaCha8Rng, name: &str, c: usize) -> Self {
        let dw = Conv2d::new(
            t,
            rng,
            &format!("{name}.dw"),
            c,
            c,
            1,
            ConvSpec {
                padding: 0,
                dilation: 1,
                groups: c,
            },
        );
        Self {
            channels: c,
            dw,
            bn: BatchNorm::new(t, &format!("{name}.bn"), c),
        }
    }

    /// feat [N, C, H, W] → gate weights [N, C], each in (0,1).
    pub fn gate<'g, S: Scalar>(
        &self,
        g: &'g Graph<S>,
        t: &mut Tensors<S>,
        feat: Var<'g, S>,
    ) -> Var<'g, S> {
        let n = feat.shape()[0];
        let pooled = feat.gap().reshape(&[n, self.channels, 1, 1]);
        let mixed = self.dw.forward(g, t, pooled);
        let normed = self.bn.forward(g, t, mixed);
        normed.sigmoid().reshape(&[n, self.channels])
    }
}

pub struct FusionBlock {
    enc_branch: GateBranch,
    dec_branch: GateBranch,
}

impl FusionBlock {
    pub fn new<S: Scalar>(t: &mut Tensors<S>, rng: &mut ChaCha8Rng, name: &str, c: usize) -> Self {
        Self {
            enc_branch: GateBranch::new(t, rng, &format!("{name}.enc"), c),
            dec_branch: GateBranch::new(t, rng, &format!("{name}.dec"), c),
        }
    }

    /// Both inputs must share [N, C, H, W]; output has the same shape.
    pub fn forward<'g, S: Scalar>(
        &self,
        g: &'g Graph<S>,
        t: &mut Tensors<S>,
        enc_feat: Var<'g, S>,
        dec_feat: Var<'g, S>,
    ) -> Result<Var<'g, S>, NetError> {
        if enc_feat.shape() != dec_feat.shape() {
            return Err(NetError::ShapeMismatch {
                what: "fusion block inputs",
                expected: enc_feat.shape(),
                got: dec_feat.shape(),
            });
        }
        let ge = self.enc_branch.gate(g, t, enc_feat);
        let gd = self.dec_branch.gate(g, t, dec_feat);
        Ok(enc_feat.scale_channels(ge).add(dec_feat.scale_channels(gd)))
    }
}

pub struct LanguageFusionBlock {
    channels: usize,
    descriptor_dim: usize,
    mlp_in: Linear,
    mlp_out: Linear,
    /// 2C → C, kernel 1, two groups: the interleaved (pooled|projected)
    /// vector is treated as a 2C-channel 1×1 map.
    gconv: Conv2d,
    bn: BatchNorm,
}

impl LanguageFusionBlock {
    pub fn new<S: Scalar>(
        t: &mut Tensors<S>,
        rng: &mut ChaCha8Rng,
        name: &str,
        descriptor_dim: usize,
        c: usize,
    ) -> Self {
        assert!(c % 2 == 0, "grouped attention conv needs an even channel count");
        let gconv = Conv2d::new(
            t,
            rng,
            &format!("{name}.gconv"),
            2 * c,
            c,
            1,
            ConvSpec {
                padding: 0,
                dilation: 1,
                groups: 2,
            },
        );
        Self {
            channels: c,
            descriptor_dim,
            mlp_in: Linear::new(t, rng, &format!("{name}.mlp.in"), descriptor_dim, c),
            mlp_out: Linear::new(t, rng, &format!("{name}.mlp.out"), c, c),
            gconv,
            bn: BatchNorm::new(t, &format!("{name}.bn"), c),
        }
    }

    /// Projects a batch of target descriptors [N, D] to [N, C].
    pub fn target_mlp<'g, S: Scalar>(
        &self,
        g: &'g Graph<S>,
        t: &Tensors<S>,
        td: Var<'g, S>,
    ) -> Var<'g, S> {
        assert_eq!(
            td.shape()[1],
            self.descriptor_dim,
            "descriptor dim mismatch"
        );
        let hidden = self.mlp_in.forward(g, t, td).relu();
        self.mlp_out.forward(g, t, hidden)
    }

    /// Attention weights from pooled features v1 and projected descriptor
    /// v2 (both [N, C]): sigmoid(batchnorm(groupconv(interleave(v1, v2)))).
    pub fn attention<'g, S: Scalar>(
        &self,
        g: &'g Graph<S>,
        t: &mut Tensors<S>,
        v1: Var<'g, S>,
        v2: Var<'g, S>,
    ) -> Result<Var<'g, S>, NetError> {
        let z = v1.interleave(v2)?;
        let n = z.shape()[0];
        let zmap = z.reshape(&[n, 2 * self.channels, 1, 1]);
        let mixed = self.gconv.forward(g, t, zmap);
        let normed = self.bn.forward(g, t, mixed);
        Ok(normed.sigmoid().reshape(&[n, self.channels]))
    }

    /// Gates `feat` [N, C, H, W] with language-conditioned channel weights;
    /// returns the fused map and the weights themselves.
    pub fn forward<'g, S: Scalar>(
        &self,
        g: &'g Graph<S>,
        t: &mut Tensors<S>,
        feat: Var<'g, S>,
        td: Var<'g, S>,
    ) -> Result<(Var<'g, S>, Var<'g, S>), NetError> {
        let shape = feat.shape();
        if shape.len() != 4 || shape[1] != self.channels {
            return Err(NetError::ShapeMismatch {
                what: "language fusion input",
                expected: vec![shape[0], self.channels, shape[2], shape[3]],
                got: shape,
            });
        }
        let v1 = feat.gap();
        let v2 = self.target_mlp(g, t, td);
        let w = self.attention(g, t, v1, v2)?;
        Ok((feat.scale_channels(w), w))
    }
}
