//! Named storage for model state.
//!
//! All weights and normalization statistics live in one flat registry,
//! addressed by stable [`TensorId`] handles. Layers keep ids, not arrays,
//! so the whole model can be snapshotted, updated by an optimizer, or
//! serialized by iterating the registry — no per-layer plumbing.

use lgir_core::Scalar;
use ndarray::ArrayD;
use std::collections::HashMap;
use std::sync::Arc;

/// Stable handle to one tensor in a [`Tensors`] registry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TensorId(pub(crate) usize);

impl TensorId {
    pub fn index(&self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorKind {
    /// Trained by the optimizer.
    Param,
    /// Persistent but not optimized (running statistics).
    Buffer,
}

struct Entry<S: Scalar> {
    name: String,
    kind: TensorKind,
    // Arc so a forward pass can bind weights into the graph without copying
    value: Arc<ArrayD<S>>,
}

pub struct Tensors<S: Scalar> {
    entries: Vec<Entry<S>>,
    by_name: HashMap<String, TensorId>,
}

impl<S: Scalar> Default for Tensors<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tensors<S> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    fn register(&mut self, name: String, kind: TensorKind, value: ArrayD<S>) -> TensorId {
        let id = TensorId(self.entries.len());
        let prev = self.by_name.insert(name.clone(), id);
        assert!(prev.is_none(), "duplicate tensor name {name:?}");
        self.entries.push(Entry {
            name,
            kind,
            value: Arc::new(value),
        });
        id
    }

    pub fn param(&mut self, name: impl Into<String>, value: ArrayD<S>) -> TensorId {
        self.register(name.into(), TensorKind::Param, value)
    }

    pub fn buffer(&mut self, name: impl Into<String>, value: ArrayD<S>) -> TensorId {
        self.register(name.into(), TensorKind::Buffer, value)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: TensorId) -> &ArrayD<S> {
        &self.entries[id.0].value
    }

    /// Shared handle to a tensor's current value (cheap; used to bind
    /// weights into a graph).
    pub fn get_shared(&self, id: TensorId) -> Arc<ArrayD<S>> {
        self.entries[id.0].value.clone()
    }

    /// [`Tensors::set`] without re-wrapping (used to restore snapshots).
    pub fn set_shared(&mut self, id: TensorId, value: Arc<ArrayD<S>>) {
        let slot = &mut self.entries[id.0];
        assert_eq!(slot.value.shape(), value.shape());
        slot.value = value;
    }

    /// Replaces a tensor's value; the shape is part of the model contract
    /// and must not change.
    pub fn set(&mut self, id: TensorId, value: ArrayD<S>) {
        let slot = &mut self.entries[id.0];
        assert_eq!(
            slot.value.shape(),
            value.shape(),
            "shape change on tensor {:?}",
            slot.name
        );
        slot.value = Arc::new(value);
    }

    pub fn name(&self, id: TensorId) -> &str {
        &self.entries[id.0].name
    }

    pub fn kind(&self, id: TensorId) -> TensorKind {
        self.entries[id.0].kind
    }

    pub fn find(&self, name: &str) -> Option<TensorId> {
        self.by_name.get(name).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = TensorId> + '_ {
        (0..self.entries.len()).map(TensorId)
    }

    pub fn param_ids(&self) -> Vec<TensorId> {
        self.ids()
            .filter(|&id| self.kind(id) == TensorKind::Param)
            .collect()
    }

    /// Total number of scalar parameters (excludes buffers).
    pub fn param_count(&self) -> usize {
        self.param_ids().iter().map(|&id| self.get(id).len()).sum()
    }
}
