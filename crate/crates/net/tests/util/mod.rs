//! Shared helpers for the integration tests.
#![allow(dead_code)]

use lgir_net::{Tensors, Var};
use ndarray::{ArrayD, IxDyn};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn randn(rng: &mut ChaCha8Rng, shape: &[usize]) -> ArrayD<f64> {
    let mut a = ArrayD::zeros(IxDyn(shape));
    for v in a.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    a
}

pub fn randn32(rng: &mut ChaCha8Rng, shape: &[usize]) -> ArrayD<f32> {
    randn(rng, shape).mapv(|v| v as f32)
}

/// Central finite difference of `f` w.r.t. one entry of `x`.
pub fn fd(x: &ArrayD<f64>, flat: usize, h: f64, f: &mut dyn FnMut(&ArrayD<f64>) -> f64) -> f64 {
    let mut hi = x.clone();
    *hi.iter_mut().nth(flat).unwrap() += h;
    let mut lo = x.clone();
    *lo.iter_mut().nth(flat).unwrap() -= h;
    (f(&hi) - f(&lo)) / (2.0 * h)
}

/// Zeroes every parameter whose name satisfies the predicate.
pub fn zero_params<S: lgir_core::Scalar>(t: &mut Tensors<S>, pred: impl Fn(&str) -> bool) {
    let ids: Vec<_> = t.param_ids();
    for id in ids {
        if pred(t.name(id)) {
            let z = ArrayD::zeros(t.get(id).raw_dim());
            t.set(id, z);
        }
    }
}

pub fn assert_all_close(got: &Var<'_, f64>, want: &ArrayD<f64>, tol: f64, what: &str) {
    let v = got.value();
    assert_eq!(v.shape(), want.shape(), "{what}: shape");
    for (a, e) in v.iter().zip(want.iter()) {
        assert!((a - e).abs() < tol, "{what}: {a} vs {e}");
    }
}
