//! Differentiable operations on graph [`Var`]s.
//!
//! Shape misuse inside the network is a programming error and panics;
//! the few operations whose contracts say "error" (e.g. interleaving
//! mismatched vectors) return [`NetError`] instead.

pub mod conv;
pub mod loss;
pub mod norm;
pub mod pool;

use lgir_core::Scalar;
use ndarray::{Array2, Array4, ArrayD, Ix2, Ix4, IxDyn};

use crate::graph::{GradFn, Graph, Var};
use crate::NetError;

impl<'g, S: Scalar> Var<'g, S> {
    /// Elementwise sum; shapes must match exactly.
    pub fn add(self, rhs: Var<'g, S>) -> Var<'g, S> {
        let a = self.value();
        let b = rhs.value();
        assert_eq!(a.shape(), b.shape(), "add shape mismatch");
        let out = a.as_ref() + b.as_ref();
        let g = self.graph;
        let requires = g.requires(&[self.id, rhs.id]);
        let grad_fn = requires.then(|| {
            let (aid, bid) = (self.id, rhs.id);
            let fun: GradFn<S> = Box::new(move |gout, sink| {
                sink(bid, gout.clone());
                sink(aid, gout.clone());
            });
            fun
        });
        g.push(out, requires, false, grad_fn)
    }

    pub fn relu(self) -> Var<'g, S> {
        let a = self.value();
        // NaN must survive (not clamp to 0) so the per-stage finiteness
        // checks can report where a value first went bad
        let out = a.mapv(|v| if v > S::zero() || v.is_nan() { v } else { S::zero() });
        let g = self.graph;
        let requires = g.requires(&[self.id]);
        let grad_fn = requires.then(|| {
            let a = a.clone();
            let aid = self.id;
            let fun: GradFn<S> = Box::new(move |gout, sink| {
                let mut dx = gout.clone();
                dx.zip_mut_with(&a, |d, &x| {
                    if x <= S::zero() {
                        *d = S::zero();
                    }
                });
                sink(aid, dx);
            });
            fun
        });
        g.push(out, requires, false, grad_fn)
    }

    pub fn sigmoid(self) -> Var<'g, S> {
        let a = self.value();
        let out = a.mapv(sigmoid_scalar);
        let g = self.graph;
        let requires = g.requires(&[self.id]);
        let grad_fn = requires.then(|| {
            let y = out.clone();
            let aid = self.id;
            let fun: GradFn<S> = Box::new(move |gout, sink| {
                let mut dx = gout.clone();
                dx.zip_mut_with(&y, |d, &s| *d = *d * s * (S::one() - s));
                sink(aid, dx);
            });
            fun
        });
        g.push(out, requires, false, grad_fn)
    }

    /// Global average pooling: [N, C, H, W] → [N, C].
    pub fn gap(self) -> Var<'g, S> {
        let a = self.value();
        let a4 = a.view().into_dimensionality::<Ix4>().expect("gap input 4-D");
        let (n, c, h, w) = a4.dim();
        let inv = S::one() / S::cast_from((h * w) as f64);
        let mut out = Array2::<S>::zeros((n, c));
        for bi in 0..n {
            for ci in 0..c {
                out[[bi, ci]] =
                    a4.index_axis(ndarray::Axis(0), bi).index_axis(ndarray::Axis(0), ci).iter().copied().sum::<S>() * inv;
            }
        }
        let g = self.graph;
        let requires = g.requires(&[self.id]);
        let grad_fn = requires.then(|| {
            let aid = self.id;
            let fun: GradFn<S> = Box::new(move |gout, sink| {
                let g2 = gout.view().into_dimensionality::<Ix2>().unwrap();
                let mut dx = Array4::<S>::zeros((n, c, h, w));
                for bi in 0..n {
                    for ci in 0..c {
                        let gv = g2[[bi, ci]] * inv;
                        dx.slice_mut(ndarray::s![bi, ci, .., ..]).fill(gv);
                    }
                }
                sink(aid, dx.into_dyn());
            });
            fun
        });
        g.push(out.into_dyn(), requires, false, grad_fn)
    }

    /// Affine map: x [N, I] · wᵀ + b, with w [O, I], b [O].
    pub fn linear(self, w: Var<'g, S>, b: Var<'g, S>) -> Var<'g, S> {
        let xv = self.value();
        let wv = w.value();
        let bv = b.value();
        let x2 = xv.view().into_dimensionality::<Ix2>().expect("linear input 2-D");
        let w2 = wv.view().into_dimensionality::<Ix2>().expect("linear weight 2-D");
        let (n, i) = x2.dim();
        let (o, i2) = w2.dim();
        assert_eq!(i, i2, "linear in-features mismatch");
        assert_eq!(bv.len(), o, "linear bias length mismatch");
        let mut out = x2.dot(&w2.t());
        for bi in 0..n {
            for oi in 0..o {
                out[[bi, oi]] = out[[bi, oi]] + bv[[oi]];
            }
        }
        let g = self.graph;
        let requires = g.requires(&[self.id, w.id, b.id]);
        let grad_fn = requires.then(|| {
            let xv = xv.clone();
            let wv = wv.clone();
            let (xid, wid, bid) = (self.id, w.id, b.id);
            let fun: GradFn<S> = Box::new(move |gout, sink| {
                let g2 = gout.view().into_dimensionality::<Ix2>().unwrap();
                let x2 = xv.view().into_dimensionality::<Ix2>().unwrap();
                let w2 = wv.view().into_dimensionality::<Ix2>().unwrap();
                let db = g2.sum_axis(ndarray::Axis(0));
                let dw = g2.t().dot(&x2);
                let dx = g2.dot(&w2);
                sink(bid, db.into_dyn());
                sink(wid, dw.into_dyn());
                sink(xid, dx.into_dyn());
            });
            fun
        });
        g.push(out.into_dyn(), requires, false, grad_fn)
    }

    /// Alternating merge of two [N, C] vectors into [N, 2C]:
    /// out[·, 2k] = self[·, k], out[·, 2k+1] = other[·, k].
    pub fn interleave(self, other: Var<'g, S>) -> Result<Var<'g, S>, NetError> {
        let a = self.value();
        let b = other.value();
        let a2 = a.view().into_dimensionality::<Ix2>().expect("interleave input 2-D");
        let b2 = b.view().into_dimensionality::<Ix2>().expect("interleave input 2-D");
        if a2.dim() != b2.dim() {
            return Err(NetError::ShapeMismatch {
                what: "interleave operands",
                expected: a.shape().to_vec(),
                got: b.shape().to_vec(),
            });
        }
        let (n, c) = a2.dim();
        let mut out = Array2::<S>::zeros((n, 2 * c));
        for bi in 0..n {
            for k in 0..c {
                out[[bi, 2 * k]] = a2[[bi, k]];
                out[[bi, 2 * k + 1]] = b2[[bi, k]];
            }
        }
        let g = self.graph;
        let requires = g.requires(&[self.id, other.id]);
        let grad_fn = requires.then(|| {
            let (aid, bid) = (self.id, other.id);
            let fun: GradFn<S> = Box::new(move |gout, sink| {
                let g2 = gout.view().into_dimensionality::<Ix2>().unwrap();
                let mut da = Array2::<S>::zeros((n, c));
                let mut db = Array2::<S>::zeros((n, c));
                for bi in 0..n {
                    for k in 0..c {
                        da[[bi, k]] = g2[[bi, 2 * k]];
                        db[[bi, k]] = g2[[bi, 2 * k + 1]];
                    }
                }
                sink(bid, db.into_dyn());
                sink(aid, da.into_dyn());
            });
            fun
        });
        Ok(g.push(out.into_dyn(), requires, false, grad_fn))
    }

    /// Scalar projection Σᵢ wᵢ·xᵢ (w is a constant); the workhorse for
    /// reducing arbitrary outputs to a differentiable scalar.
    pub fn weighted_sum(self, w: &ArrayD<S>) -> Var<'g, S> {
        let a = self.value();
        assert_eq!(a.shape(), w.shape(), "weighted_sum shape mismatch");
        let total = a.iter().zip(w.iter()).map(|(&x, &c)| x * c).sum::<S>();
        let out = ArrayD::from_elem(IxDyn(&[]), total);
        let g = self.graph;
        let requires = g.requires(&[self.id]);
        let grad_fn = requires.then(|| {
            let w = w.clone();
            let aid = self.id;
            let fun: GradFn<S> = Box::new(move |gout, sink| {
                let gs = gout[IxDyn(&[])];
                sink(aid, w.mapv(|c| c * gs));
            });
            fun
        });
        g.push(out, requires, false, grad_fn)
    }

    /// Sum of all entries as a scalar node.
    pub fn sum_all(self) -> Var<'g, S> {
        let ones = ArrayD::from_elem(self.value().raw_dim(), S::one());
        self.weighted_sum(&ones)
    }

    /// Reinterprets the buffer with a new shape of equal length.
    pub fn reshape(self, shape: &[usize]) -> Var<'g, S> {
        let a = self.value();
        assert_eq!(
            a.len(),
            shape.iter().product::<usize>(),
            "reshape length mismatch"
        );
        let out = a
            .as_ref()
            .clone()
            .into_shape_with_order(IxDyn(shape))
            .expect("contiguous reshape");
        let g = self.graph;
        let requires = g.requires(&[self.id]);
        let grad_fn = requires.then(|| {
            let aid = self.id;
            let orig = a.shape().to_vec();
            let fun: GradFn<S> = Box::new(move |gout, sink| {
                let dx = gout
                    .clone()
                    .into_shape_with_order(IxDyn(&orig))
                    .expect("contiguous reshape");
                sink(aid, dx);
            });
            fun
        });
        g.push(out, requires, false, grad_fn)
    }

    /// Per-channel gating: x [N, C, H, W] scaled by s [N, C].
    pub fn scale_channels(self, s: Var<'g, S>) -> Var<'g, S> {
        let xv = self.value();
        let sv = s.value();
        let x4 = xv.view().into_dimensionality::<Ix4>().expect("scale input 4-D");
        let s2 = sv.view().into_dimensionality::<Ix2>().expect("scale weights 2-D");
        let (n, c, h, w) = x4.dim();
        assert_eq!(s2.dim(), (n, c), "channel gate shape mismatch");
        let mut out = Array4::<S>::zeros((n, c, h, w));
        for bi in 0..n {
            for ci in 0..c {
                let sc = s2[[bi, ci]];
                for yy in 0..h {
                    for xx in 0..w {
                        out[[bi, ci, yy, xx]] = x4[[bi, ci, yy, xx]] * sc;
                    }
                }
            }
        }
        let g = self.graph;
        let requires = g.requires(&[self.id, s.id]);
        let grad_fn = requires.then(|| {
            let xv = xv.clone();
            let sv = sv.clone();
            let (xid, sid) = (self.id, s.id);
            let fun: GradFn<S> = Box::new(move |gout, sink| {
                let g4 = gout.view().into_dimensionality::<Ix4>().unwrap();
                let x4 = xv.view().into_dimensionality::<Ix4>().unwrap();
                let s2 = sv.view().into_dimensionality::<Ix2>().unwrap();
                let mut dx = Array4::<S>::zeros((n, c, h, w));
                let mut ds = Array2::<S>::zeros((n, c));
                for bi in 0..n {
                    for ci in 0..c {
                        let sc = s2[[bi, ci]];
                        let mut acc = S::zero();
                        for yy in 0..h {
                            for xx in 0..w {
                                let gv = g4[[bi, ci, yy, xx]];
                                dx[[bi, ci, yy, xx]] = gv * sc;
                                acc = acc + gv * x4[[bi, ci, yy, xx]];
                            }
                        }
                        ds[[bi, ci]] = acc;
                    }
                }
                sink(sid, ds.into_dyn());
                sink(xid, dx.into_dyn());
            });
            fun
        });
        g.push(out.into_dyn(), requires, false, grad_fn)
    }

    /// Spatial gating: x [N, C, H, W] scaled by a one-channel map
    /// s [N, 1, H, W], broadcast over channels.
    pub fn scale_map(self, s: Var<'g, S>) -> Var<'g, S> {
        let xv = self.value();
        let sv = s.value();
        let x4 = xv.view().into_dimensionality::<Ix4>().expect("scale input 4-D");
        let s4 = sv.view().into_dimensionality::<Ix4>().expect("scale map 4-D");
        let (n, c, h, w) = x4.dim();
        assert_eq!(s4.dim(), (n, 1, h, w), "scale map shape mismatch");
        let mut out = Array4::<S>::zeros((n, c, h, w));
        for bi in 0..n {
            for ci in 0..c {
                for yy in 0..h {
                    for xx in 0..w {
                        out[[bi, ci, yy, xx]] = x4[[bi, ci, yy, xx]] * s4[[bi, 0, yy, xx]];
                    }
                }
            }
        }
        let g = self.graph;
        let requires = g.requires(&[self.id, s.id]);
        let grad_fn = requires.then(|| {
            let xv = xv.clone();
            let sv = sv.clone();
            let (xid, sid) = (self.id, s.id);
            let fun: GradFn<S> = Box::new(move |gout, sink| {
                let g4 = gout.view().into_dimensionality::<Ix4>().unwrap();
                let x4 = xv.view().into_dimensionality::<Ix4>().unwrap();
                let s4 = sv.view().into_dimensionality::<Ix4>().unwrap();
                let mut dx = Array4::<S>::zeros((n, c, h, w));
                let mut ds = Array4::<S>::zeros((n, 1, h, w));
                for bi in 0..n {
                    for yy in 0..h {
                        for xx in 0..w {
                            let sc = s4[[bi, 0, yy, xx]];
                            let mut acc = S::zero();
                            for ci in 0..c {
                                let gv = g4[[bi, ci, yy, xx]];
                                dx[[bi, ci, yy, xx]] = gv * sc;
                                acc = acc + gv * x4[[bi, ci, yy, xx]];
                            }
                            ds[[bi, 0, yy, xx]] = acc;
                        }
                    }
                }
                sink(sid, ds.into_dyn());
                sink(xid, dx.into_dyn());
            });
            fun
        });
        g.push(out.into_dyn(), requires, false, grad_fn)
    }
}

impl<S: Scalar> Graph<S> {
    /// Concatenates 4-D maps along the channel axis.
    pub fn concat_channels<'g>(&'g self, parts: &[Var<'g, S>]) -> Var<'g, S> {
        assert!(!parts.is_empty());
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let dims: Vec<(usize, usize, usize, usize)> = values
            .iter()
            .map(|v| {
                v.view()
                    .into_dimensionality::<Ix4>()
                    .expect("concat input 4-D")
                    .dim()
            })
            .collect();
        let (n, _, h, w) = dims[0];
        for d in &dims {
            assert!(
                d.0 == n && d.2 == h && d.3 == w,
                "concat inputs disagree outside the channel axis"
            );
        }
        let c_total: usize = dims.iter().map(|d| d.1).sum();
        let mut out = Array4::<S>::zeros((n, c_total, h, w));
        let mut off = 0;
        for (v, d) in values.iter().zip(&dims) {
            let v4 = v.view().into_dimensionality::<Ix4>().unwrap();
            out.slice_mut(ndarray::s![.., off..off + d.1, .., ..])
                .assign(&v4);
            off += d.1;
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        let requires = self.requires(&ids);
        let grad_fn = requires.then(|| {
            let channels: Vec<usize> = dims.iter().map(|d| d.1).collect();
            let fun: GradFn<S> = Box::new(move |gout, sink| {
                let g4 = gout.view().into_dimensionality::<Ix4>().unwrap();
                let mut off = 0;
                for (&pid, &ch) in ids.iter().zip(&channels) {
                    let part = g4.slice(ndarray::s![.., off..off + ch, .., ..]).to_owned();
                    sink(pid, part.into_dyn());
                    off += ch;
                }
            });
            fun
        });
        self.push(out.into_dyn(), requires, false, grad_fn)
    }
}

fn sigmoid_scalar<S: Scalar>(v: S) -> S {
    // split on sign for numerical stability at large |v|
    if v >= S::zero() {
        S::one() / (S::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (S::one() + e)
    }
}

/// CPU reference sigmoid used by layer code paths that need the plain
/// function outside a graph.
pub fn sigmoid<S: Scalar>(v: S) -> S {
    sigmoid_scalar(v)
}

#[allow(unused)]
pub(crate) fn to_dyn4<S: Scalar>(a: Array4<S>) -> ArrayD<S> {
    a.into_dyn()
}
