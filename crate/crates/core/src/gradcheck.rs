//! Central-difference gradient checking, the correctness oracle every
//! differentiable operation is held against.

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::tensor::Tensor;

/// Maximum relative disagreement between the tape gradient of `f` and central
/// finite differences at `x`.
///
/// `f` builds a scalar node from a leaf; it is re-evaluated at 2·len(x) probe
/// points. The error at each coordinate is
/// |analytic − numeric| / max(1e-8, |analytic| + |numeric|),
/// and the maximum over coordinates is returned.
pub fn grad_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, NodeId) -> Result<NodeId>,
{
    grad_check_multi(|g, ids| f(g, ids[0]), std::slice::from_ref(x), eps)
}

/// [`grad_check`] over several independent inputs at once (e.g. activations
/// plus parameters); returns the maximum error across all coordinates of all
/// inputs.
pub fn grad_check_multi<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let per_input = grad_check_raw(f, inputs, eps)?;
    Ok(per_input
        .iter()
        .flat_map(|cmp| {
            cmp.analytic
                .data()
                .iter()
                .zip(cmp.numeric.iter())
                .map(|(&a, &n)| (a - n).abs() / (1e-8f64).max(a.abs() + n.abs()))
        })
        .fold(0.0, f64::max))
}

/// Vector-level variant: for each input, the ∞-norm of the gradient
/// disagreement relative to the ∞-norm of the gradients themselves. Central
/// differences carry an absolute noise floor around 1e-11, so isolated
/// near-cancelled coordinates cannot meet tight per-coordinate relative
/// bounds; comparing whole gradient vectors is the scale-honest check.
pub fn grad_check_vector_multi<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    let per_input = grad_check_raw(f, inputs, eps)?;
    Ok(per_input
        .iter()
        .map(|cmp| {
            let mut diff = 0.0f64;
            let mut scale_a = 0.0f64;
            let mut scale_n = 0.0f64;
            for (&a, &n) in cmp.analytic.data().iter().zip(cmp.numeric.iter()) {
                diff = diff.max((a - n).abs());
                scale_a = scale_a.max(a.abs());
                scale_n = scale_n.max(n.abs());
            }
            diff / (1e-8f64).max(scale_a + scale_n)
        })
        .fold(0.0, f64::max))
}

struct GradComparison {
    analytic: Tensor,
    numeric: Vec<f64>,
}

fn grad_check_raw<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<Vec<GradComparison>>
where
    F: Fn(&mut Graph, &[NodeId]) -> Result<NodeId>,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::InvalidArgument {
            what: format!("eps must lie in (0, 1e-2], got {eps}"),
        });
    }
    if inputs.is_empty() {
        return Err(Error::InvalidArgument {
            what: "grad_check needs at least one input".into(),
        });
    }

    let analytic = {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
        let loss = f(&mut g, &ids)?;
        let grads = g.backward(loss)?;
        ids.iter()
            .zip(inputs)
            .map(|(&id, t)| grads.get_or_zeros(id, t.shape()))
            .collect::<Vec<_>>()
    };

    let eval = |probe: &[Tensor]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = probe.iter().map(|t| g.leaf(t.clone())).collect();
        let loss = f(&mut g, &ids)?;
        let v = g.value(loss);
        if !v.is_scalar() {
            return Err(Error::NonScalarLoss {
                shape: v.shape().to_vec(),
            });
        }
        Ok(v.scalar_value())
    };

    let mut out = Vec::with_capacity(inputs.len());
    let mut probe: Vec<Tensor> = inputs.to_vec();
    for (slot, input) in inputs.iter().enumerate() {
        let mut numeric = Vec::with_capacity(input.len());
        for coord in 0..input.len() {
            let mut plus = input.data().to_vec();
            plus[coord] += eps;
            let mut minus = input.data().to_vec();
            minus[coord] -= eps;

            probe[slot] = Tensor::new(input.shape().to_vec(), plus)
                .map_err(|e| check_failed(coord, &e))?;
            let f_plus = eval(&probe).map_err(|e| check_failed(coord, &e))?;

            probe[slot] = Tensor::new(input.shape().to_vec(), minus)
                .map_err(|e| check_failed(coord, &e))?;
            let f_minus = eval(&probe).map_err(|e| check_failed(coord, &e))?;

            probe[slot] = input.clone();
            numeric.push((f_plus - f_minus) / (2.0 * eps));
        }
        out.push(GradComparison {
            analytic: analytic[slot].clone(),
            numeric,
        });
    }
    Ok(out)
}

fn check_failed(coordinate: usize, source: &Error) -> Error {
    Error::CheckFailed {
        coordinate,
        detail: source.to_string(),
    }
}
