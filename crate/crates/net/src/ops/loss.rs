//! Binary cross-entropy, averaged per element.

use lgir_core::Scalar;
use ndarray::{ArrayD, IxDyn};

use crate::graph::{Graph, Var};

/// Probabilities are clamped to [CLAMP, 1−CLAMP] before the logs so a
/// saturated sigmoid cannot produce an infinite loss term.
pub const BCE_CLAMP: f64 = 1e-7;

impl<S: Scalar> Graph<S> {
    /// Mean binary cross-entropy of predicted probabilities `p` against
    /// targets `t` (same shape, values in [0,1]). Returns a scalar node.
    pub fn bce_mean(&self, p: Var<'_, S>, t: &ArrayD<S>) -> Var<'_, S> {
        let pv = p.value();
        assert_eq!(pv.shape(), t.shape(), "bce prediction/target shapes differ");
        let count = pv.len();
        assert!(count > 0);
        let lo = S::cast_from(BCE_CLAMP);
        let hi = S::one() - lo;
        let inv_n = S::one() / S::cast_from(count as f64);

        let mut acc = S::zero();
        for (&pi, &ti) in pv.iter().zip(t.iter()) {
            let pc = clamp(pi, lo, hi);
            acc = acc - (ti * pc.ln() + (S::one() - ti) * (S::one() - pc).ln());
        }
        let loss = ArrayD::from_elem(IxDyn(&[]), acc * inv_n);

        let requires = self.requires(&[p.id]);
        let grad_fn = requires.then(|| {
            let pv = pv.clone();
            let t = t.clone();
            let p_id = p.id;
            let fun: crate::graph::GradFn<S> = Box::new(move |gout, sink| {
                let gscale = gout[IxDyn(&[])] * inv_n;
                let mut dp = ArrayD::<S>::zeros(pv.raw_dim());
                for ((d, &pi), &ti) in dp.iter_mut().zip(pv.iter()).zip(t.iter()) {
                    // zero gradient in the clamped region: the clamp is a
                    // flat extension of the loss surface there
                    if pi > lo && pi < hi {
                        *d = gscale * (pi - ti) / (pi * (S::one() - pi));
                    }
                }
                sink(p_id, dp);
            });
            fun
        });
        self.push(loss, requires, false, grad_fn)
    }
}

fn clamp<S: Scalar>(v: S, lo: S, hi: S) -> S {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

/// Scalar oracle mirroring the graph op, for tests.
pub fn bce_mean_reference<S: Scalar>(p: &ArrayD<S>, t: &ArrayD<S>) -> S {
    let lo = S::cast_from(BCE_CLAMP);
    let hi = S::one() - lo;
    let mut acc = S::zero();
    for (&pi, &ti) in p.iter().zip(t.iter()) {
        let pc = clamp(pi, lo, hi);
        acc = acc - (ti * pc.ln() + (S::one() - ti) * (S::one() - pc).ln());
    }
    acc / S::cast_from(p.len() as f64)
}
