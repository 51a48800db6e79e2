//! Grouped 2-D convolution (stride 1) via im2col + GEMM.
//!
//! The backward pass recomputes the im2col matrix from the saved input
//! instead of caching it: the column matrix is by far the largest transient
//! of the whole network, and one extra gather per conv is much cheaper than
//! holding tens of megabytes per layer for the lifetime of the tape.

use lgir_core::Scalar;
use ndarray::{Array2, Array4, ArrayD, ArrayView4, Ix4};

use crate::graph::{Graph, Var};

#[derive(Clone, Copy, Debug)]
pub struct ConvSpec {
    pub padding: usize,
    pub dilation: usize,
    pub groups: usize,
}

impl Default for ConvSpec {
    fn default() -> Self {
        Self {
            padding: 1,
            dilation: 1,
            groups: 1,
        }
    }
}

fn out_side(input: usize, k: usize, pad: usize, dil: usize) -> usize {
    let span = dil * (k - 1) + 1;
    assert!(
        input + 2 * pad >= span,
        "conv input {input} too small for kernel span {span}"
    );
    input + 2 * pad - span + 1
}

/// Gathers one group's receptive fields into a
/// [(cin_g·kh·kw) × (n·ho·wo)] matrix; column index is ((n·ho)+oy)·wo+ox.
#[allow(clippy::too_many_arguments)]
fn im2col<S: Scalar>(
    x: &ArrayView4<'_, S>,
    ch_off: usize,
    cin_g: usize,
    kh: usize,
    kw: usize,
    spec: ConvSpec,
    ho: usize,
    wo: usize,
) -> Array2<S> {
    let (n, _, h, w) = x.dim();
    let mut cols = Array2::<S>::zeros((cin_g * kh * kw, n * ho * wo));
    for ci in 0..cin_g {
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ci * kh + ky) * kw + kx;
                let mut row_view = cols.row_mut(row);
                for b in 0..n {
                    for oy in 0..ho {
                        let iy = (oy + ky * spec.dilation) as isize - spec.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let base = (b * ho + oy) * wo;
                        for ox in 0..wo {
                            let ix = (ox + kx * spec.dilation) as isize - spec.padding as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            row_view[base + ox] = x[[b, ch_off + ci, iy as usize, ix as usize]];
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add of a column-matrix gradient back onto the input layout
/// (exact transpose of [`im2col`]).
#[allow(clippy::too_many_arguments)]
fn col2im_accumulate<S: Scalar>(
    dcols: &Array2<S>,
    dx: &mut Array4<S>,
    ch_off: usize,
    cin_g: usize,
    kh: usize,
    kw: usize,
    spec: ConvSpec,
    ho: usize,
    wo: usize,
) {
    let (n, _, h, w) = dx.dim();
    for ci in 0..cin_g {
        for ky in 0..kh {
            for kx in 0..kw {
                let row = (ci * kh + ky) * kw + kx;
                let row_view = dcols.row(row);
                for b in 0..n {
                    for oy in 0..ho {
                        let iy = (oy + ky * spec.dilation) as isize - spec.padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let base = (b * ho + oy) * wo;
                        for ox in 0..wo {
                            let ix = (ox + kx * spec.dilation) as isize - spec.padding as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            dx[[b, ch_off + ci, iy as usize, ix as usize]] += row_view[base + ox];
                        }
                    }
                }
            }
        }
    }
}

impl<S: Scalar> Graph<S> {
    /// `x`: [N, Cin, H, W]; `w`: [Cout, Cin/groups, kh, kw]; `b`: [Cout].
    /// Stride is fixed at 1 (the architecture never strides its convs;
    /// resolution changes happen in pooling/upsampling).
    pub fn conv2d(
        &self,
        x: Var<'_, S>,
        w: Var<'_, S>,
        b: Option<Var<'_, S>>,
        spec: ConvSpec,
    ) -> Var<'_, S> {
        let xv = x.value();
        let wv = w.value();
        let x4 = xv.view().into_dimensionality::<Ix4>().expect("conv input 4-D");
        let w4 = wv.view().into_dimensionality::<Ix4>().expect("conv weight 4-D");
        let (n, cin, h, wd) = x4.dim();
        let (cout, cin_g, kh, kw) = w4.dim();
        let g = spec.groups;
        assert!(g >= 1 && cin % g == 0 && cout % g == 0, "groups must divide channels");
        assert_eq!(cin / g, cin_g, "weight in-channels disagree with input");
        let ho = out_side(h, kh, spec.padding, spec.dilation);
        let wo = out_side(wd, kw, spec.padding, spec.dilation);
        let cout_g = cout / g;

        let mut out = Array4::<S>::zeros((n, cout, ho, wo));
        for gi in 0..g {
            let cols = im2col(&x4, gi * cin_g, cin_g, kh, kw, spec, ho, wo);
            let w_flat = w4
                .slice(ndarray::s![gi * cout_g..(gi + 1) * cout_g, .., .., ..])
                .to_shape((cout_g, cin_g * kh * kw))
                .unwrap()
                .to_owned();
            let prod = w_flat.dot(&cols); // [cout_g, n*ho*wo]
            for co in 0..cout_g {
                let row = prod.row(co);
                for bi in 0..n {
                    for oy in 0..ho {
                        let base = (bi * ho + oy) * wo;
                        for ox in 0..wo {
                            out[[bi, gi * cout_g + co, oy, ox]] = row[base + ox];
                        }
                    }
                }
            }
        }
        if let Some(bias) = &b {
            let bv = bias.value();
            for co in 0..cout {
                let add = bv[[co]];
                out.index_axis_mut(ndarray::Axis(1), co).mapv_inplace(|v| v + add);
            }
        }

        let mut parents = vec![x.id, w.id];
        if let Some(bias) = &b {
            parents.push(bias.id);
        }
        let requires = self.requires(&parents);
        let grad_fn = requires.then(|| {
            let xv = xv.clone();
            let wv = wv.clone();
            let (x_id, w_id, b_id) = (x.id, w.id, b.map(|bb| bb.id));
            let fun: crate::graph::GradFn<S> = Box::new(move |gout, sink| {
                let g4 = gout.view().into_dimensionality::<Ix4>().unwrap();
                let x4 = xv.view().into_dimensionality::<Ix4>().unwrap();
                let w4 = wv.view().into_dimensionality::<Ix4>().unwrap();
                let mut dx = Array4::<S>::zeros((n, cin, h, wd));
                let mut dw = Array4::<S>::zeros((cout, cin_g, kh, kw));

                for gi in 0..g {
                    // gradient matrix for this group: [cout_g, n*ho*wo]
                    let mut gmat = Array2::<S>::zeros((cout_g, n * ho * wo));
                    for co in 0..cout_g {
                        let mut row = gmat.row_mut(co);
                        for bi in 0..n {
                            for oy in 0..ho {
                                let base = (bi * ho + oy) * wo;
                                for ox in 0..wo {
                                    row[base + ox] = g4[[bi, gi * cout_g + co, oy, ox]];
                                }
                            }
                        }
                    }
                    let cols = im2col(&x4, gi * cin_g, cin_g, kh, kw, spec, ho, wo);
                    // dW = G · colsᵀ
                    let dwg = gmat.dot(&cols.t());
                    for co in 0..cout_g {
                        for r in 0..cin_g * kh * kw {
                            let (ci, rem) = (r / (kh * kw), r % (kh * kw));
                            dw[[gi * cout_g + co, ci, rem / kw, rem % kw]] = dwg[[co, r]];
                        }
                    }
                    // dX = col2im(Wᵀ · G)
                    let w_flat = w4
                        .slice(ndarray::s![gi * cout_g..(gi + 1) * cout_g, .., .., ..])
                        .to_shape((cout_g, cin_g * kh * kw))
                        .unwrap()
                        .to_owned();
                    let dcols = w_flat.t().dot(&gmat);
                    col2im_accumulate(&dcols, &mut dx, gi * cin_g, cin_g, kh, kw, spec, ho, wo);
                }

                if let Some(bid) = b_id {
                    let mut db = ndarray::Array1::<S>::zeros(cout);
                    for co in 0..cout {
                        db[co] = g4
                            .slice(ndarray::s![.., co, .., ..])
                            .iter()
                            .copied()
                            .sum::<S>();
                    }
                    sink(bid, db.into_dyn());
                }
                sink(w_id, dw.into_dyn());
                sink(x_id, dx.into_dyn());
            });
            fun
        });
        self.push(out.into_dyn(), requires, false, grad_fn)
    }
}

#[allow(dead_code)]
pub fn conv_output_shape(h: usize, w: usize, k: usize, spec: ConvSpec) -> (usize, usize) {
    (
        out_side(h, k, spec.padding, spec.dilation),
        out_side(w, k, spec.padding, spec.dilation),
    )
}

/// Reference convolution: direct 7-deep loop, no im2col, used by tests as
/// an independent oracle.
pub fn conv2d_reference<S: Scalar>(
    x: &ArrayD<S>,
    w: &ArrayD<S>,
    b: Option<&ArrayD<S>>,
    spec: ConvSpec,
) -> ArrayD<S> {
    let x4 = x.view().into_dimensionality::<Ix4>().unwrap();
    let w4 = w.view().into_dimensionality::<Ix4>().unwrap();
    let (n, cin, h, wd) = x4.dim();
    let (cout, cin_g, kh, kw) = w4.dim();
    let g = spec.groups;
    let cout_g = cout / g;
    let ho = out_side(h, kh, spec.padding, spec.dilation);
    let wo = out_side(wd, kw, spec.padding, spec.dilation);
    assert_eq!(cin / g, cin_g);

    let mut out = Array4::<S>::zeros((n, cout, ho, wo));
    for bi in 0..n {
        for co in 0..cout {
            let gi = co / cout_g;
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = b.map_or(S::zero(), |bb| bb[[co]]);
                    for ci in 0..cin_g {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy + ky * spec.dilation) as isize - spec.padding as isize;
                                let ix = (ox + kx * spec.dilation) as isize - spec.padding as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= wd as isize {
                                    continue;
                                }
                                acc = acc
                                    + x4[[bi, gi * cin_g + ci, iy as usize, ix as usize]]
                                        * w4[[co, ci, ky, kx]];
                            }
                        }
                    }
                    out[[bi, co, oy, ox]] = acc;
                }
            }
        }
    }
    out.into_dyn()
}
