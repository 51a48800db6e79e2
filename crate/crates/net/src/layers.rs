//! Parameter-owning layers. A layer holds [`TensorId`]s into the model's
//! [`Tensors`] registry and binds them into a [`Graph`] on each forward.

use lgir_core::Scalar;
use ndarray::{Array1, ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Graph, Var};
use crate::ops::conv::ConvSpec;
use crate::tensors::{TensorId, Tensors};

/// Running statistics integrate batch moments with this weight
/// (running = (1−m)·running + m·batch).
pub const BN_MOMENTUM: f64 = 0.1;

pub(crate) fn bind<'g, S: Scalar>(g: &'g Graph<S>, t: &Tensors<S>, id: TensorId) -> Var<'g, S> {
    g.param(t.get_shared(id), id)
}

/// Fan-in-scaled uniform init on (−1/√fan_in, 1/√fan_in).
fn uniform_init<S: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> ArrayD<S> {
    assert!(fan_in > 0);
    let bound = 1.0 / (fan_in as f64).sqrt();
    let mut out = ArrayD::<S>::zeros(IxDyn(shape));
    for v in out.iter_mut() {
        *v = S::cast_from(rng.random_range(-bound..bound));
    }
    out
}

pub struct Conv2d {
    pub w: TensorId,
    pub b: TensorId,
    pub spec: ConvSpec,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<S: Scalar>(
        t: &mut Tensors<S>,
        rng: &mut ChaCha8Rng,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
        spec: ConvSpec,
    ) -> Self {
        assert!(cin % spec.groups == 0 && cout % spec.groups == 0);
        let cin_g = cin / spec.groups;
        let fan_in = cin_g * k * k;
        let w = t.param(
            format!("{name}.weight"),
            uniform_init(rng, &[cout, cin_g, k, k], fan_in),
        );
        let b = t.param(format!("{name}.bias"), uniform_init(rng, &[cout], fan_in));
        Self { w, b, spec }
    }

    pub fn forward<'g, S: Scalar>(
        &self,
        g: &'g Graph<S>,
        t: &Tensors<S>,
        x: Var<'g, S>,
    ) -> Var<'g, S> {
        g.conv2d(x, bind(g, t, self.w), Some(bind(g, t, self.b)), self.spec)
    }
}

pub struct BatchNorm {
    pub gamma: TensorId,
    pub beta: TensorId,
    pub running_mean: TensorId,
    pub running_var: TensorId,
}

impl BatchNorm {
    pub fn new<S: Scalar>(t: &mut Tensors<S>, name: &str, c: usize) -> Self {
        Self {
            gamma: t.param(format!("{name}.gamma"), ArrayD::from_elem(IxDyn(&[c]), S::one())),
            beta: t.param(format!("{name}.beta"), ArrayD::zeros(IxDyn(&[c]))),
            running_mean: t.buffer(format!("{name}.running_mean"), ArrayD::zeros(IxDyn(&[c]))),
            running_var: t.buffer(
                format!("{name}.running_var"),
                ArrayD::from_elem(IxDyn(&[c]), S::one()),
            ),
        }
    }

    /// Applies normalization; in training mode also folds the batch moments
    /// into the running statistics (the only state a forward pass mutates).
    pub fn forward<'g, S: Scalar>(
        &self,
        g: &'g Graph<S>,
        t: &mut Tensors<S>,
        x: Var<'g, S>,
    ) -> Var<'g, S> {
        let rm = as_vec1(t.get(self.running_mean));
        let rv = as_vec1(t.get(self.running_var));
        let out = g.batchnorm(x, bind(g, t, self.gamma), bind(g, t, self.beta), &rm, &rv);
        if let (Some(mean), Some(var)) = (out.batch_mean, out.batch_var) {
            let m = S::cast_from(BN_MOMENTUM);
            let keep = S::one() - m;
            let new_mean = rm.mapv(|v| v * keep) + mean.mapv(|v| v * m);
            let new_var = rv.mapv(|v| v * keep) + var.mapv(|v| v * m);
            t.set(self.running_mean, new_mean.into_dyn());
            t.set(self.running_var, new_var.into_dyn());
        }
        out.y
    }
}

fn as_vec1<S: Scalar>(a: &ArrayD<S>) -> Array1<S> {
    a.view()
        .into_dimensionality::<ndarray::Ix1>()
        .expect("1-D tensor")
        .to_owned()
}

/// Conv → batch norm → ReLU, the basic building unit of the U-blocks.
/// 3×3 kernel with padding = dilation keeps spatial dims unchanged.
pub struct Cbr {
    pub conv: Conv2d,
    pub bn: BatchNorm,
}

impl Cbr {
    pub fn new<S: Scalar>(
        t: &mut Tensors<S>,
        rng: &mut ChaCha8Rng,
        name: &str,
        cin: usize,
        cout: usize,
        dilation: usize,
    ) -> Self {
        let spec = ConvSpec {
            padding: dilation,
            dilation,
            groups: 1,
        };
        Self {
            conv: Conv2d::new(t, rng, &format!("{name}.conv"), cin, cout, 3, spec),
            bn: BatchNorm::new(t, &format!("{name}.bn"), cout),
        }
    }

    pub fn forward<'g, S: Scalar>(
        &self,
        g: &'g Graph<S>,
        t: &mut Tensors<S>,
        x: Var<'g, S>,
    ) -> Var<'g, S> {
        let c = self.conv.forward(g, t, x);
        self.bn.forward(g, t, c).relu()
    }
}

pub struct Linear {
    pub w: TensorId,
    pub b: TensorId,
}

impl Linear {
    pub fn new<S: Scalar>(
        t: &mut Tensors<S>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_features: usize,
        out_features: usize,
    ) -> Self {
        Self {
            w: t.param(
                format!("{name}.weight"),
                uniform_init(rng, &[out_features, in_features], in_features),
            ),
            b: t.param(
                format!("{name}.bias"),
                uniform_init(rng, &[out_features], in_features),
            ),
        }
    }

    pub fn forward<'g, S: Scalar>(
        &self,
        g: &'g Graph<S>,
        t: &Tensors<S>,
        x: Var<'g, S>,
    ) -> Var<'g, S> {
        x.linear(bind(g, t, self.w), bind(g, t, self.b))
    }
}

/// 1×1 convolution (point-wise channel mix).
pub fn pointwise(t: &mut Tensors<impl Scalar>, rng: &mut ChaCha8Rng, name: &str, cin: usize, cout: usize) -> Conv2d {
    Conv2d::new(
        t,
        rng,
        name,
        cin,
        cout,
        1,
        ConvSpec {
            padding: 0,
            dilation: 1,
            groups: 1,
        },
    )
}
