//! Spatial resampling: 2×2 max pooling and bilinear upsampling.

use lgir_core::Scalar;
use ndarray::{Array4, Ix4};

use crate::graph::{Graph, Var};

impl<S: Scalar> Graph<S> {
    /// 2×2 max pooling, stride 2. Requires even spatial dims so the
    /// encoder/decoder ladder stays exactly invertible by 2× upsampling.
    pub fn maxpool2(&self, x: Var<'_, S>) -> Var<'_, S> {
        let xv = x.value();
        let x4 = xv.view().into_dimensionality::<Ix4>().expect("pool input 4-D");
        let (n, c, h, w) = x4.dim();
        assert!(
            h % 2 == 0 && w % 2 == 0 && h >= 2 && w >= 2,
            "maxpool2 needs even spatial dims, got {h}x{w}"
        );
        let (ho, wo) = (h / 2, w / 2);
        let mut out = Array4::<S>::zeros((n, c, ho, wo));
        // flat (iy*w + ix) winner per output cell, for the backward scatter
        let mut argmax = vec![0usize; n * c * ho * wo];
        for bi in 0..n {
            for ci in 0..c {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let (y0, x0) = (oy * 2, ox * 2);
                        let mut best = x4[[bi, ci, y0, x0]];
                        let mut best_at = y0 * w + x0;
                        for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                            let v = x4[[bi, ci, y0 + dy, x0 + dx]];
                            if v > best {
                                best = v;
                                best_at = (y0 + dy) * w + (x0 + dx);
                            }
                        }
                        out[[bi, ci, oy, ox]] = best;
                        argmax[((bi * c + ci) * ho + oy) * wo + ox] = best_at;
                    }
                }
            }
        }
        let requires = self.requires(&[x.id]);
        let grad_fn = requires.then(|| {
            let x_id = x.id;
            let fun: crate::graph::GradFn<S> = Box::new(move |gout, sink| {
                let g4 = gout.view().into_dimensionality::<Ix4>().unwrap();
                let mut dx = Array4::<S>::zeros((n, c, h, w));
                for bi in 0..n {
                    for ci in 0..c {
                        for oy in 0..ho {
                            for ox in 0..wo {
                                let at = argmax[((bi * c + ci) * ho + oy) * wo + ox];
                                dx[[bi, ci, at / w, at % w]] += g4[[bi, ci, oy, ox]];
                            }
                        }
                    }
                }
                sink(x_id, dx.into_dyn());
            });
            fun
        });
        self.push(out.into_dyn(), requires, false, grad_fn)
    }

    /// Bilinear upsampling to an explicit target size, using the same
    /// half-pixel-center convention as the image resizer in the core crate.
    pub fn upsample_bilinear(&self, x: Var<'_, S>, ho: usize, wo: usize) -> Var<'_, S> {
        let xv = x.value();
        let x4 = xv.view().into_dimensionality::<Ix4>().expect("upsample input 4-D");
        let (n, c, h, w) = x4.dim();
        assert!(ho >= 1 && wo >= 1);
        if (ho, wo) == (h, w) {
            // identity; still emit a pass-through node so callers can treat
            // the result uniformly
            let requires = self.requires(&[x.id]);
            let grad_fn = requires.then(|| {
                let x_id = x.id;
                let fun: crate::graph::GradFn<S> =
                    Box::new(move |gout, sink| sink(x_id, gout.clone()));
                fun
            });
            return self.push(xv.as_ref().clone(), requires, false, grad_fn);
        }

        let ytab = axis_table::<S>(h, ho);
        let xtab = axis_table::<S>(w, wo);
        let mut out = Array4::<S>::zeros((n, c, ho, wo));
        for bi in 0..n {
            for ci in 0..c {
                for (oy, &(y0, y1, fy)) in ytab.iter().enumerate() {
                    for (ox, &(x0, x1, fx)) in xtab.iter().enumerate() {
                        let one = S::one();
                        let v = x4[[bi, ci, y0, x0]] * (one - fy) * (one - fx)
                            + x4[[bi, ci, y0, x1]] * (one - fy) * fx
                            + x4[[bi, ci, y1, x0]] * fy * (one - fx)
                            + x4[[bi, ci, y1, x1]] * fy * fx;
                        out[[bi, ci, oy, ox]] = v;
                    }
                }
            }
        }
        let requires = self.requires(&[x.id]);
        let grad_fn = requires.then(|| {
            let x_id = x.id;
            let fun: crate::graph::GradFn<S> = Box::new(move |gout, sink| {
                let g4 = gout.view().into_dimensionality::<Ix4>().unwrap();
                let mut dx = Array4::<S>::zeros((n, c, h, w));
                for bi in 0..n {
                    for ci in 0..c {
                        for (oy, &(y0, y1, fy)) in ytab.iter().enumerate() {
                            for (ox, &(x0, x1, fx)) in xtab.iter().enumerate() {
                                let one = S::one();
                                let gv = g4[[bi, ci, oy, ox]];
                                dx[[bi, ci, y0, x0]] += gv * (one - fy) * (one - fx);
                                dx[[bi, ci, y0, x1]] += gv * (one - fy) * fx;
                                dx[[bi, ci, y1, x0]] += gv * fy * (one - fx);
                                dx[[bi, ci, y1, x1]] += gv * fy * fx;
                            }
                        }
                    }
                }
                sink(x_id, dx.into_dyn());
            });
            fun
        });
        self.push(out.into_dyn(), requires, false, grad_fn)
    }
}

/// Per-output-coordinate (lo, hi, frac) sample table, half-pixel centers,
/// clamped at the borders.
fn axis_table<S: Scalar>(src: usize, dst: usize) -> Vec<(usize, usize, S)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let center = (o as f64 + 0.5) * scale - 0.5;
            let clamped = center.clamp(0.0, (src - 1) as f64);
            let lo = clamped.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, S::cast_from(clamped - lo as f64))
        })
        .collect()
}
