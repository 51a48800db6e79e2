//! Residual U-block: a local conv transform plus an internal
//! encoder-decoder over `height` levels, summed at the output.

use lgir_core::Scalar;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Var};
use crate::layers::Cbr;
use crate::tensors::Tensors;
use crate::NetError;

pub struct Rsu {
    name: String,
    height: usize,
    /// cin → cout local transform; its output is the residual branch.
    conv_in: Cbr,
    /// enc[0]: cout → mid at full block resolution; enc[1..]: mid → mid,
    /// each preceded by a 2× pool.
    enc: Vec<Cbr>,
    /// Dilated (rate 2) bottom conv at the deepest level, mid → mid.
    bottom: Cbr,
    /// Deepest-first: dec[j] consumes concat(deeper, enc[h−2−j]); the last
    /// one emits cout.
    dec: Vec<Cbr>,
}

impl Rsu {
    /// `height` ≥ 2. Height 2 is the flat edge case: no internal
    /// pooling, just enc → dilated bottom → dec at one resolution — used
    /// where the feature map is too small to pool further.
    pub fn new<S: Scalar>(
        t: &mut Tensors<S>,
        rng: &mut ChaCha8Rng,
        name: &str,
        height: usize,
        cin: usize,
        mid: usize,
        cout: usize,
    ) -> Self {
        assert!(height >= 2, "u-block height must be at least 2");
        let conv_in = Cbr::new(t, rng, &format!("{name}.conv_in"), cin, cout, 1);
        let mut enc = Vec::with_capacity(height - 1);
        enc.push(Cbr::new(t, rng, &format!("{name}.enc1"), cout, mid, 1));
        for lvl in 1..height - 1 {
            enc.push(Cbr::new(
                t,
                rng,
                &format!("{name}.enc{}", lvl + 1),
                mid,
                mid,
                1,
            ));
        }
        let bottom = Cbr::new(t, rng, &format!("{name}.bottom"), mid, mid, 2);
        let mut dec = Vec::with_capacity(height - 1);
        for j in 0..height - 1 {
            let last = j == height - 2;
            dec.push(Cbr::new(
                t,
                rng,
                &format!("{name}.dec{}", height - 1 - j),
                2 * mid,
                if last { cout } else { mid },
                1,
            ));
        }
        Self {
            name: name.to_string(),
            height,
            conv_in,
            enc,
            bottom,
            dec,
        }
    }

    /// Minimum spatial side this block can process.
    pub fn min_side(&self) -> usize {
        if self.height == 2 {
            1
        } else {
            1 << (self.height - 1)
        }
    }

    /// Internal pooling additionally needs the side divisible by this.
    pub fn side_multiple(&self) -> usize {
        if self.height == 2 {
            1
        } else {
            1 << (self.height - 2)
        }
    }

    pub fn check_spatial(&self, h: usize, w: usize) -> Result<(), NetError> {
        let need = self.min_side();
        let mult = self.side_multiple();
        for side in [h, w] {
            if side < need || side % mult != 0 {
                return Err(NetError::SpatialTooSmall {
                    stage: self.name.clone(),
                    side,
                    needed: need,
                });
            }
        }
        Ok(())
    }

    pub fn forward<'g, S: Scalar>(
        &self,
        g: &'g Graph<S>,
        t: &mut Tensors<S>,
        x: Var<'g, S>,
    ) -> Result<Var<'g, S>, NetError> {
        let shape = x.shape();
        assert_eq!(shape.len(), 4, "u-block input 4-D");
        self.check_spatial(shape[2], shape[3])?;

        let local = self.conv_in.forward(g, t, x);
        if self.height == 2 {
            let e = self.enc[0].forward(g, t, local);
            let b = self.bottom.forward(g, t, e);
            let d = self.dec[0].forward(g, t, g.concat_channels(&[b, e]));
            return Ok(d.add(local));
        }

        // encoder ladder: skips[k] lives at resolution /2^k
        let mut skips = Vec::with_capacity(self.height - 1);
        let mut cur = self.enc[0].forward(g, t, local);
        skips.push(cur);
        for enc in &self.enc[1..] {
            cur = enc.forward(g, t, g.maxpool2(cur));
            skips.push(cur);
        }
        let mut up = self.bottom.forward(g, t, cur);

        // decoder ladder back to full resolution
        for (j, dec) in self.dec.iter().enumerate() {
            let skip = skips[self.height - 2 - j];
            let merged = dec.forward(g, t, g.concat_channels(&[up, skip]));
            up = if j + 1 < self.dec.len() {
                let s = merged.shape();
                g.upsample_bilinear(merged, s[2] * 2, s[3] * 2)
            } else {
                merged
            };
        }
        Ok(up.add(local))
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Internal channel width used inside the u-blocks: half the output width,
/// floored at 2 so miniature test configs stay well-formed.
pub fn mid_channels(out_channels: usize) -> usize {
    (out_channels / 2).max(2)
}
