//! Central finite-difference probes for verifying analytic gradients,
//! from single entries up to a whole-network sweep.

use std::sync::Arc;

use lgir_core::Scalar;
use ndarray::{ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::Graph;
use crate::lgnet::{Lgnet, LgnetConfig};
use crate::loss::deep_supervision_loss;
use crate::tensors::{TensorId, Tensors};
use crate::NetError;

/// Frozen copy of every tensor value in a registry (cheap: Arc clones).
pub struct Snapshot<S: Scalar> {
    values: Vec<Arc<ArrayD<S>>>,
}

pub fn snapshot<S: Scalar>(t: &Tensors<S>) -> Snapshot<S> {
    Snapshot {
        values: t.ids().map(|id| t.get_shared(id)).collect(),
    }
}

pub fn restore<S: Scalar>(t: &mut Tensors<S>, snap: &Snapshot<S>) {
    for (id, value) in t.ids().collect::<Vec<_>>().into_iter().zip(&snap.values) {
        t.set_shared(id, value.clone());
    }
}

/// d(loss)/d(tensor[flat]) by central differences. The whole registry is
/// restored after each probe, so state the loss function mutates as a side
/// effect (running statistics) cannot drift between evaluations.
pub fn central_diff<S, F>(
    t: &mut Tensors<S>,
    id: TensorId,
    flat: usize,
    h: f64,
    mut loss: F,
) -> f64
where
    S: Scalar,
    F: FnMut(&mut Tensors<S>) -> f64,
{
    let snap = snapshot(t);
    let mut probe = |t: &mut Tensors<S>, delta: f64| -> f64 {
        let mut v = t.get(id).clone();
        let slot = v.iter_mut().nth(flat).expect("flat index in range");
        *slot = *slot + S::cast_from(delta);
        t.set(id, v);
        loss(t)
    };
    let hi = probe(t, h);
    restore(t, &snap);
    let lo = probe(t, -h);
    restore(t, &snap);
    (hi - lo) / (2.0 * h)
}

/// |a − b| / max(|a|, |b|, floor): symmetric relative error with an
/// absolute floor so near-zero derivative pairs compare sanely.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// How a whole-network gradient sweep probes and judges.
pub struct GradCheckSettings {
    /// Random entries checked per parameter tensor (all of them when the
    /// tensor is smaller).
    pub probes_per_tensor: usize,
    /// Finite-difference step.
    pub step: f64,
    /// Maximum accepted relative error per probe.
    pub tolerance: f64,
    /// Absolute floor inside [`rel_err`].
    pub floor: f64,
    /// Seeds the probe positions and the synthetic sample.
    pub seed: u64,
    /// Batch size of the synthetic sample (≥ 2 keeps batch statistics
    /// away from their degenerate single-sample case).
    pub batch: usize,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        Self {
            probes_per_tensor: 5,
            // Small enough that second-order truncation stays below the
            // tolerance even where batch statistics are nearly degenerate
            // (deepest stage runs at 1×1 spatial, so the normalizer's
            // curvature is on the eps scale); f64 roundoff on the secant
            // is still orders of magnitude below the signal.
            step: 1e-6,
            tolerance: 1e-3,
            floor: 1e-5,
            seed: 1234,
            batch: 2,
        }
    }
}

pub struct GradCheckReport {
    pub tensors: usize,
    pub probes: usize,
    pub worst: f64,
    pub worst_at: String,
    /// One line per probe (or tensor) that violated the tolerance.
    pub failures: Vec<String>,
}

/// Sweeps every parameter tensor of a network built from `config`,
/// comparing analytic gradients of the deep-supervision loss on one
/// random sample against central finite differences. Meant for miniature
/// configs; the cost is two forward passes per probe.
pub fn check_model(
    config: &LgnetConfig,
    settings: &GradCheckSettings,
) -> Result<GradCheckReport, NetError> {
    let mut model = Lgnet::<f64>::new(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let (ih, iw) = config.input_size;
    let uniform = |rng: &mut ChaCha8Rng, shape: &[usize]| -> ArrayD<f64> {
        let mut a = ArrayD::zeros(IxDyn(shape));
        for v in a.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        a
    };
    let image = uniform(&mut rng, &[settings.batch, config.in_channels, ih, iw]);
    let td = uniform(&mut rng, &[settings.batch, config.descriptor_dim]);
    let gt = uniform(&mut rng, &[settings.batch, 1, ih, iw])
        .mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });

    // one analytic backward for everything
    let grads = {
        let g = Graph::train();
        let out = model.forward(&g, &image, &td)?;
        let loss = deep_supervision_loss(&out, &gt);
        g.backward(loss)
    };

    // Loss under the registry's current values. Training mode both times:
    // the analytic gradient differentiates through batch statistics, so
    // the probes must use them too.
    let mut loss_at = |model: &mut Lgnet<f64>| -> f64 {
        let g = Graph::train();
        let out = model.forward(&g, &image, &td).expect("probe forward");
        deep_supervision_loss(&out, &gt).scalar()
    };

    let mut report = GradCheckReport {
        tensors: 0,
        probes: 0,
        worst: 0.0,
        worst_at: String::new(),
        failures: Vec::new(),
    };
    for id in model.tensors().param_ids() {
        let name = model.tensors().name(id).to_string();
        let len = model.tensors().get(id).len();
        report.tensors += 1;
        let Some(analytic) = grads.for_tensor(id).cloned() else {
            report
                .failures
                .push(format!("{name}: no gradient reached this parameter"));
            continue;
        };

        let picks: Vec<usize> = if len <= settings.probes_per_tensor {
            (0..len).collect()
        } else {
            rand::seq::index::sample(&mut rng, len, settings.probes_per_tensor).into_vec()
        };
        for flat in picks {
            let got = analytic.iter().nth(flat).copied().unwrap();
            let want = {
                let snap = snapshot(model.tensors());
                let mut probe = |model: &mut Lgnet<f64>, delta: f64| -> f64 {
                    let t = model.tensors_mut();
                    let mut v = t.get(id).clone();
                    let slot = v.iter_mut().nth(flat).unwrap();
                    *slot += delta;
                    t.set(id, v);
                    loss_at(model)
                };
                let hi = probe(&mut model, settings.step);
                restore(model.tensors_mut(), &snap);
                let lo = probe(&mut model, -settings.step);
                restore(model.tensors_mut(), &snap);
                (hi - lo) / (2.0 * settings.step)
            };
            let err = rel_err(got, want, settings.floor);
            report.probes += 1;
            if err > report.worst {
                report.worst = err;
                report.worst_at = format!("{name}[{flat}]");
            }
            if err > settings.tolerance {
                report.failures.push(format!(
                    "{name}[{flat}]: analytic {got:.6e} vs finite difference {want:.6e} (rel {err:.3e})"
                ));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn central_diff_matches_quadratic_derivative() {
        let mut t: Tensors<f64> = Tensors::new();
        let id = t.param("x", ArrayD::from_elem(IxDyn(&[2]), 3.0));
        // loss = x0² + 2·x1  → d/dx0 = 6, d/dx1 = 2
        let loss = |t: &mut Tensors<f64>| {
            let x = t.get(id);
            x[[0]] * x[[0]] + 2.0 * x[[1]]
        };
        let d0 = central_diff(&mut t, id, 0, 1e-5, loss);
        let d1 = central_diff(&mut t, id, 1, 1e-5, loss);
        assert!(rel_err(d0, 6.0, 1e-12) < 1e-8, "{d0}");
        assert!(rel_err(d1, 2.0, 1e-12) < 1e-8, "{d1}");
        // registry restored
        assert_eq!(t.get(id)[[0]], 3.0);
    }

    #[test]
    fn rel_err_uses_the_floor_near_zero() {
        assert!(rel_err(0.0, 1e-15, 1e-6) < 1e-8);
        assert_eq!(rel_err(2.0, 1.0, 1e-6), 0.5);
    }
}
