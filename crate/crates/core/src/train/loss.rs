//! Training objectives: cross-entropy, the L1 penalty on centered
//! activations, and their sum.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::norm::NormState;
use crate::tensor::Tensor;

/// Mean over the batch of −log softmax(logits)\[target\]; scalar node.
pub fn cross_entropy_loss(g: &mut Graph, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
    g.cross_entropy(logits, targets)
}

/// λ · (Σ over retained tensors of Σ|v_j|) / total element count, as a plain
/// value. Zero when λ = 0 or no states are given.
pub fn l1_activation_penalty(states: &[NormState], lambda: f64) -> Result<Tensor> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument {
            what: format!("lambda must be >= 0, got {lambda}"),
        });
    }
    let total: usize = states.iter().map(|s| s.v.len()).sum();
    if lambda == 0.0 || total == 0 {
        return Tensor::scalar(0.0);
    }
    let sum_abs: f64 = states
        .iter()
        .map(|s| s.v.data().iter().map(|v| v.abs()).sum::<f64>())
        .sum();
    Tensor::scalar(lambda * sum_abs / total as f64)
}

/// Tape form of the penalty over the chosen activation nodes; the |·|
/// subgradient is 0 at exactly 0.
pub fn l1_penalty_node(g: &mut Graph, activations: &[NodeId], lambda: f64) -> Result<NodeId> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument {
            what: format!("lambda must be >= 0, got {lambda}"),
        });
    }
    let total: usize = activations.iter().map(|&id| g.value(id).len()).sum();
    if lambda == 0.0 || total == 0 {
        return Ok(g.leaf(Tensor::scalar(0.0)?));
    }
    let mut acc: Option<NodeId> = None;
    for &id in activations {
        let a = g.abs(id)?;
        let s = g.sum(a)?;
        acc = Some(match acc {
            Some(prev) => g.add(prev, s)?,
            None => s,
        });
    }
    g.scale(acc.expect("nonempty activations"), lambda / total as f64)
}

/// Regularized objective: task loss plus penalty; gradients flow to both.
pub fn total_objective(g: &mut Graph, loss: NodeId, penalty: NodeId) -> Result<NodeId> {
    g.add(loss, penalty)
}

/// Mean |v_j| across all retained normalizer states — the sparsity telemetry
/// the L1 term drives down.
pub fn mean_abs_v(states: &[NormState]) -> f64 {
    let total: usize = states.iter().map(|s| s.v.len()).sum();
    if total == 0 {
        return 0.0;
    }
    let sum_abs: f64 = states
        .iter()
        .map(|s| s.v.data().iter().map(|v| v.abs()).sum::<f64>())
        .sum();
    sum_abs / total as f64
}
