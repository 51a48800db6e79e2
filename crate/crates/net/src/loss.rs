//! Deep-supervision objective: BCE at every decoder's upsampled output
//! plus BCE at the final map, equally weighted.

use lgir_core::Scalar;
use ndarray::ArrayD;

use crate::graph::Var;
use crate::lgnet::LgnetOutputs;
use crate::ops::loss::bce_mean_reference;

/// Sum of the seven per-map mean BCE terms. `gt` must match the output
/// maps' [N, 1, H, W] shape with values in [0, 1].
pub fn deep_supervision_loss<'g, S: Scalar>(
    outputs: &LgnetOutputs<'g, S>,
    gt: &ArrayD<S>,
) -> Var<'g, S> {
    let mut total = outputs.final_prob.graph().bce_mean(outputs.final_prob, gt);
    for side in &outputs.side_probs {
        total = total.add(side.graph().bce_mean(*side, gt));
    }
    total
}

/// Plain-array mirror of [`deep_supervision_loss`] used as a test oracle
/// and for evaluation outside a graph.
pub fn deep_supervision_loss_value<S: Scalar>(
    side_probs: &[ArrayD<S>],
    final_prob: &ArrayD<S>,
    gt: &ArrayD<S>,
) -> S {
    let mut total = bce_mean_reference(final_prob, gt);
    for side in side_probs {
        total = total + bce_mean_reference(side, gt);
    }
    total
}
