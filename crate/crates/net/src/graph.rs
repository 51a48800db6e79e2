//! Reverse-mode automatic differentiation on a per-forward tape.
//!
//! Every forward pass builds a fresh [`Graph`]; nodes hold their value plus
//! a closure that routes the incoming gradient to their parents. Backward
//! walks node ids in reverse (construction order is already topological),
//! accumulating gradients and keeping only those of parameters and
//! explicitly-tracked leaves. Dropping the graph frees all activations.
//!
//! The tape is deliberately single-threaded: training steps here are
//! CPU-bound matmuls, and a thread-free tape keeps the backward logic and
//! the batch-norm buffer updates trivially correct.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use lgir_core::Scalar;
use ndarray::ArrayD;

use crate::tensors::TensorId;

/// Gradient routing callback: receives the gradient flowing into the node
/// and a sink that accumulates contributions into parent nodes by id.
pub(crate) type GradFn<S> = Box<dyn Fn(&ArrayD<S>, &mut dyn FnMut(usize, ArrayD<S>))>;

pub(crate) struct Node<S: Scalar> {
    pub value: Arc<ArrayD<S>>,
    pub grad_fn: Option<GradFn<S>>,
    /// Gradient survives backward (parameters and tracked leaves).
    pub keep_grad: bool,
    /// Gradients flow through this node.
    pub requires_grad: bool,
}

/// One forward pass's computation tape.
pub struct Graph<S: Scalar> {
    pub(crate) nodes: RefCell<Vec<Node<S>>>,
    tensor_vars: RefCell<HashMap<TensorId, usize>>,
    train: bool,
    grad_enabled: bool,
}

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g, S: Scalar> {
    pub(crate) graph: &'g Graph<S>,
    pub(crate) id: usize,
}

impl<S: Scalar> Graph<S> {
    /// Training-mode tape: batch statistics in normalization layers, full
    /// gradient bookkeeping.
    pub fn train() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            tensor_vars: RefCell::new(HashMap::new()),
            train: true,
            grad_enabled: true,
        }
    }

    /// Inference-mode tape: running statistics, no gradient closures.
    pub fn eval() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            tensor_vars: RefCell::new(HashMap::new()),
            train: false,
            grad_enabled: false,
        }
    }

    pub fn is_train(&self) -> bool {
        self.train
    }

    pub(crate) fn push(
        &self,
        value: ArrayD<S>,
        requires_grad: bool,
        keep_grad: bool,
        grad_fn: Option<GradFn<S>>,
    ) -> Var<'_, S> {
        self.push_shared(Arc::new(value), requires_grad, keep_grad, grad_fn)
    }

    pub(crate) fn push_shared(
        &self,
        value: Arc<ArrayD<S>>,
        requires_grad: bool,
        keep_grad: bool,
        grad_fn: Option<GradFn<S>>,
    ) -> Var<'_, S> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            grad_fn,
            keep_grad,
            requires_grad,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    /// Constant input: no gradient tracked.
    pub fn leaf(&self, value: ArrayD<S>) -> Var<'_, S> {
        self.push(value, false, false, None)
    }

    /// Input whose gradient should survive backward (e.g. for checking
    /// d(loss)/d(input) numerically).
    pub fn leaf_requiring_grad(&self, value: ArrayD<S>) -> Var<'_, S> {
        self.push(value, self.grad_enabled, true, None)
    }

    /// Registers a model tensor as a graph leaf; its gradient can later be
    /// fetched by [`TensorId`] from the [`Gradients`]. Binding the same
    /// tensor twice (shared weights) returns the original node so gradient
    /// contributions from every use site accumulate in one place.
    pub fn param(&self, value: Arc<ArrayD<S>>, id: TensorId) -> Var<'_, S> {
        if let Some(&existing) = self.tensor_vars.borrow().get(&id) {
            return Var {
                graph: self,
                id: existing,
            };
        }
        let var = self.push_shared(value, self.grad_enabled, true, None);
        self.tensor_vars.borrow_mut().insert(id, var.id);
        var
    }

    pub(crate) fn value_of(&self, id: usize) -> Arc<ArrayD<S>> {
        self.nodes.borrow()[id].value.clone()
    }

    pub(crate) fn requires(&self, ids: &[usize]) -> bool {
        if !self.grad_enabled {
            return false;
        }
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    /// Reverse pass from a scalar loss. Consumes nothing; the graph can be
    /// inspected afterwards, but a second backward from the same tape is
    /// not supported (gradients of intermediates are dropped as it walks).
    pub fn backward(&self, loss: Var<'_, S>) -> Gradients<S> {
        let nodes = self.nodes.borrow();
        assert_eq!(
            nodes[loss.id].value.len(),
            1,
            "backward starts from a scalar loss"
        );
        let mut grads: Vec<Option<ArrayD<S>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(ArrayD::from_elem(nodes[loss.id].value.shape(), S::one()));

        for id in (0..=loss.id).rev() {
            let Some(gout) = grads[id].take() else {
                continue;
            };
            let node = &nodes[id];
            if let Some(grad_fn) = &node.grad_fn {
                grad_fn(&gout, &mut |pid, contribution| {
                    debug_assert!(pid < id, "gradient must flow to earlier nodes");
                    match &mut grads[pid] {
                        Some(acc) => *acc += &contribution,
                        slot @ None => *slot = Some(contribution),
                    }
                });
            }
            if node.keep_grad {
                grads[id] = Some(gout);
            }
        }

        Gradients {
            grads,
            tensor_vars: self.tensor_vars.borrow().clone(),
        }
    }
}

/// Gradients produced by one backward pass.
pub struct Gradients<S: Scalar> {
    grads: Vec<Option<ArrayD<S>>>,
    tensor_vars: HashMap<TensorId, usize>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of the loss w.r.t. a registered model tensor. `None` when
    /// the tensor never entered the graph (or gradients were disabled).
    pub fn for_tensor(&self, id: TensorId) -> Option<&ArrayD<S>> {
        self.tensor_vars
            .get(&id)
            .and_then(|&var| self.grads[var].as_ref())
    }

    /// Gradient w.r.t. a kept leaf var.
    pub fn for_var(&self, var: &Var<'_, S>) -> Option<&ArrayD<S>> {
        self.grads[var.id].as_ref()
    }
}

impl<'g, S: Scalar> Var<'g, S> {
    pub(crate) fn graph(&self) -> &'g Graph<S> {
        self.graph
    }

    /// Snapshot of the node's value (cheap: Arc clone).
    pub fn value(&self) -> Arc<ArrayD<S>> {
        self.graph.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes.borrow()[self.id].value.shape().to_vec()
    }

    /// Scalar content of a one-element node.
    pub fn scalar(&self) -> S {
        let v = self.value();
        assert_eq!(v.len(), 1, "scalar() on non-scalar node");
        *v.iter().next().unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn backward_through_add_accumulates_fan_out() {
        let g: Graph<f64> = Graph::train();
        let x = g.leaf_requiring_grad(ArrayD::from_elem(IxDyn(&[1]), 3.0));
        // loss = x + x  => dloss/dx = 2
        let y = x.add(x);
        let grads = g.backward(y);
        assert_eq!(grads.for_var(&x).unwrap()[[0]], 2.0);
    }

    #[test]
    fn constants_get_no_gradient() {
        let g: Graph<f64> = Graph::train();
        let x = g.leaf(ArrayD::from_elem(IxDyn(&[1]), 3.0));
        let y = x.add(x);
        let grads = g.backward(y);
        assert!(grads.for_var(&x).is_none());
    }

    #[test]
    fn eval_graph_builds_no_grad_closures() {
        let g: Graph<f64> = Graph::eval();
        let x = g.leaf_requiring_grad(ArrayD::from_elem(IxDyn(&[1]), 3.0));
        let y = x.add(x);
        assert!(!g.nodes.borrow()[y.id].requires_grad);
        assert!(g.nodes.borrow()[y.id].grad_fn.is_none());
    }
}
