//! Final map assembly: per-decoder 1-channel projections, spatial scaling
//! of the deep maps by weights derived from the shallow maps, and the
//! point-wise reduction to one logit map.

use lgir_core::Scalar;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Var};
use crate::layers::{pointwise, Conv2d};
use crate::tensors::Tensors;
use crate::NetError;

pub struct OutputBlock {
    /// One shared 1-channel projection per decoder (D1..D6); the same
    /// projected maps feed both the side outputs and the final reduction.
    side: Vec<Conv2d>,
    /// 3 → 1 point-wise conv over the concatenated shallow maps; its
    /// sigmoid is the spatial scaling field.
    scale_conv: Conv2d,
    /// 6 → 1 point-wise conv producing the final logit map.
    final_conv: Conv2d,
}

pub struct OutputMaps<'g, S: Scalar> {
    /// Final 1-channel logit map at [N, 1, H, W].
    pub final_logits: Var<'g, S>,
    /// Per-decoder 1-channel logit maps (D1..D6), upsampled to [H, W].
    pub side_logits: Vec<Var<'g, S>>,
    /// The (0,1) spatial scaling field applied to the deep maps.
    pub scale: Var<'g, S>,
}

impl OutputBlock {
    pub fn new<S: Scalar>(
        t: &mut Tensors<S>,
        rng: &mut ChaCha8Rng,
        name: &str,
        decoder_channels: &[usize; 6],
    ) -> Self {
        let side = decoder_channels
            .iter()
            .enumerate()
            .map(|(i, &c)| pointwise(t, rng, &format!("{name}.side{}", i + 1), c, 1))
            .collect();
        Self {
            side,
            scale_conv: pointwise(t, rng, &format!("{name}.scale"), 3, 1),
            final_conv: pointwise(t, rng, &format!("{name}.final"), 6, 1),
        }
    }

    /// `decoder_maps`: D1..D6 at native resolutions. The first three are
    /// the shallow set (they drive the scaling field and pass unscaled);
    /// the last three are the deep set and get multiplied by it.
    pub fn forward<'g, S: Scalar>(
        &self,
        g: &'g Graph<S>,
        t: &Tensors<S>,
        decoder_maps: &[Var<'g, S>; 6],
        out_hw: (usize, usize),
    ) -> Result<OutputMaps<'g, S>, NetError> {
        let (h, w) = out_hw;
        let mut projected = Vec::with_capacity(6);
        for (conv, &map) in self.side.iter().zip(decoder_maps.iter()) {
            let p = conv.forward(g, t, map);
            projected.push(g.upsample_bilinear(p, h, w));
        }
        for p in &projected {
            let s = p.shape();
            if s[1] != 1 || s[2] != h || s[3] != w {
                return Err(NetError::ShapeMismatch {
                    what: "projected decoder map",
                    expected: vec![s[0], 1, h, w],
                    got: s,
                });
            }
        }

        let shallow_cat = g.concat_channels(&projected[0..3]);
        let scale = self.scale_conv.forward(g, t, shallow_cat).sigmoid();

        let mut merged = Vec::with_capacity(6);
        merged.extend_from_slice(&projected[0..3]);
        for &deep in &projected[3..6] {
            merged.push(deep.scale_map(scale));
        }
        let final_logits = self.final_conv.forward(g, t, g.concat_channels(&merged));

        Ok(OutputMaps {
            final_logits,
            side_logits: projected,
            scale,
        })
    }
}
