//! Optimizers and the learning-rate schedule.
//!
//! The default optimizer follows the Adan update rule (first/difference/
//! second-moment EMAs with bias correction and decoupled weight decay);
//! AdamW is available as a fallback.

use std::collections::HashMap;

use lgir_core::Scalar;
use ndarray::ArrayD;

use crate::graph::Gradients;
use crate::tensors::{TensorId, Tensors};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum OptimizerKind {
    Adan,
    AdamW,
}

/// Adan moment coefficients (the β values are the *update* weights,
/// i.e. ema = (1−β)·ema + β·term).
pub const ADAN_BETA1: f64 = 0.02;
pub const ADAN_BETA2: f64 = 0.08;
pub const ADAN_BETA3: f64 = 0.01;
pub const ADAN_EPS: f64 = 1e-8;

pub const ADAMW_BETA1: f64 = 0.9;
pub const ADAMW_BETA2: f64 = 0.999;
pub const ADAMW_EPS: f64 = 1e-8;

pub struct Optimizer<S: Scalar> {
    kind: OptimizerKind,
    weight_decay: f64,
    step_count: u64,
    /// Per-parameter moment buffers; layout depends on the kind
    /// (Adan: [m, v, n, prev_grad]; AdamW: [m, v]).
    slots: HashMap<TensorId, Vec<ArrayD<S>>>,
}

impl<S: Scalar> Optimizer<S> {
    pub fn new(kind: OptimizerKind, weight_decay: f64) -> Self {
        Self {
            kind,
            weight_decay,
            step_count: 0,
            slots: HashMap::new(),
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn weight_decay(&self) -> f64 {
        self.weight_decay
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Applies one update with the given learning rate to every parameter
    /// that received a gradient.
    pub fn step(&mut self, t: &mut Tensors<S>, grads: &Gradients<S>, lr: f64) {
        let k = self.step_count + 1;
        for id in t.param_ids() {
            let Some(grad) = grads.for_tensor(id) else {
                continue;
            };
            match self.kind {
                OptimizerKind::Adan => self.adan_update(t, id, grad.clone(), lr, k),
                OptimizerKind::AdamW => self.adamw_update(t, id, grad, lr, k),
            }
        }
        self.step_count = k;
    }

    fn adan_update(&mut self, t: &mut Tensors<S>, id: TensorId, grad: ArrayD<S>, lr: f64, k: u64) {
        let (b1, b2, b3) = (
            S::cast_from(ADAN_BETA1),
            S::cast_from(ADAN_BETA2),
            S::cast_from(ADAN_BETA3),
        );
        let one = S::one();
        let first_step = !self.slots.contains_key(&id);
        let slots = self.slots.entry(id).or_insert_with(|| {
            vec![
                ArrayD::zeros(grad.raw_dim()),
                ArrayD::zeros(grad.raw_dim()),
                ArrayD::zeros(grad.raw_dim()),
                ArrayD::zeros(grad.raw_dim()),
            ]
        });
        let diff = if first_step {
            ArrayD::zeros(grad.raw_dim())
        } else {
            &grad - &slots[3]
        };

        // m ← (1−β1)m + β1 g
        slots[0].zip_mut_with(&grad, |m, &g| *m = (one - b1) * *m + b1 * g);
        // v ← (1−β2)v + β2 (g − g_prev)
        slots[1].zip_mut_with(&diff, |v, &d| *v = (one - b2) * *v + b2 * d);
        // n ← (1−β3)n + β3 (g + (1−β2)(g − g_prev))²
        {
            let n = &mut slots[2];
            for ((nv, &g), &d) in n.iter_mut().zip(grad.iter()).zip(diff.iter()) {
                let u = g + (one - b2) * d;
                *nv = (one - b3) * *nv + b3 * u * u;
            }
        }

        let bc1 = one - (one - b1).powi(k as i32);
        let bc2 = one - (one - b2).powi(k as i32);
        let bc3 = one - (one - b3).powi(k as i32);
        let eps = S::cast_from(ADAN_EPS);
        let lr_s = S::cast_from(lr);
        let decay = S::cast_from(1.0 + lr * self.weight_decay);

        let mut theta = t.get(id).clone();
        for (((p, &m), &v), &n) in theta
            .iter_mut()
            .zip(slots[0].iter())
            .zip(slots[1].iter())
            .zip(slots[2].iter())
        {
            let denom = (n / bc3).sqrt() + eps;
            let update = (m / bc1 + (one - b2) * (v / bc2)) / denom;
            *p = (*p - lr_s * update) / decay;
        }
        slots[3] = grad;
        t.set(id, theta);
    }

    fn adamw_update(&mut self, t: &mut Tensors<S>, id: TensorId, grad: &ArrayD<S>, lr: f64, k: u64) {
        let (b1, b2) = (S::cast_from(ADAMW_BETA1), S::cast_from(ADAMW_BETA2));
        let one = S::one();
        let slots = self.slots.entry(id).or_insert_with(|| {
            vec![ArrayD::zeros(grad.raw_dim()), ArrayD::zeros(grad.raw_dim())]
        });
        slots[0].zip_mut_with(grad, |m, &g| *m = b1 * *m + (one - b1) * g);
        slots[1].zip_mut_with(grad, |v, &g| *v = b2 * *v + (one - b2) * g * g);

        let bc1 = one - b1.powi(k as i32);
        let bc2 = one - b2.powi(k as i32);
        let eps = S::cast_from(ADAMW_EPS);
        let lr_s = S::cast_from(lr);
        let wd = S::cast_from(lr * self.weight_decay);

        let mut theta = t.get(id).clone();
        for ((p, &m), &v) in theta.iter_mut().zip(slots[0].iter()).zip(slots[1].iter()) {
            let update = (m / bc1) / ((v / bc2).sqrt() + eps);
            *p = *p - wd * *p - lr_s * update;
        }
        t.set(id, theta);
    }

    /// Moment buffers as named entries for serialization, keyed
    /// "{tensor_name}#{slot_index}".
    pub fn state_entries(&self, t: &Tensors<S>) -> Vec<(String, ArrayD<S>)> {
        let mut ids: Vec<_> = self.slots.keys().copied().collect();
        ids.sort();
        let mut out = Vec::new();
        for id in ids {
            for (j, slot) in self.slots[&id].iter().enumerate() {
                out.push((format!("{}#{}", t.name(id), j), slot.clone()));
            }
        }
        out
    }

    /// Restores moment buffers saved by [`Optimizer::state_entries`].
    pub fn load_state(
        &mut self,
        t: &Tensors<S>,
        entries: &[(String, ArrayD<S>)],
        step_count: u64,
    ) -> Result<(), crate::NetError> {
        self.step_count = step_count;
        self.slots.clear();
        for (key, value) in entries {
            let (name, idx) = key.rsplit_once('#').ok_or_else(|| {
                crate::NetError::Checkpoint(format!("malformed optimizer slot key {key:?}"))
            })?;
            let slot: usize = idx.parse().map_err(|_| {
                crate::NetError::Checkpoint(format!("malformed optimizer slot index in {key:?}"))
            })?;
            let id = t.find(name).ok_or_else(|| {
                crate::NetError::Checkpoint(format!("optimizer state for unknown tensor {name:?}"))
            })?;
            let slots = self.slots.entry(id).or_default();
            if slots.len() <= slot {
                slots.resize(slot + 1, ArrayD::zeros(value.raw_dim()));
            }
            slots[slot] = value.clone();
        }
        Ok(())
    }
}

/// Linear warmup to the base rate over `warmup_epochs`, constant after.
pub fn warmup_lr(base: f64, epoch: usize, warmup_epochs: usize) -> f64 {
    if warmup_epochs > 0 && epoch < warmup_epochs {
        base * (epoch + 1) as f64 / warmup_epochs as f64
    } else {
        base
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_ramps_linearly_then_holds() {
        assert_eq!(warmup_lr(1.0, 0, 4), 0.25);
        assert_eq!(warmup_lr(1.0, 1, 4), 0.5);
        assert_eq!(warmup_lr(1.0, 3, 4), 1.0);
        assert_eq!(warmup_lr(1.0, 9, 4), 1.0);
        assert_eq!(warmup_lr(0.3, 5, 0), 0.3);
    }
}
