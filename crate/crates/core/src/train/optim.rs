//! Parameter updates: SGD with momentum and bias-corrected Adam.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::models::ParamSet;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Optimizer with per-parameter state; the step counter advances on every
/// call, gradient or not.
#[derive(Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    momentum: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    steps: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl Optimizer {
    pub fn sgd(lr: f64, momentum: f64) -> Result<Self> {
        // lr = 0 is a valid fixed point (evaluation-style run)
        if !lr.is_finite() || lr < 0.0 {
            return Err(Error::InvalidArgument {
                what: format!("learning rate must be finite and >= 0, got {lr}"),
            });
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument {
                what: format!("momentum must lie in [0, 1), got {momentum}"),
            });
        }
        Ok(Optimizer {
            kind: OptimizerKind::Sgd,
            lr,
            momentum,
            beta1: 0.0,
            beta2: 0.0,
            eps: 0.0,
            steps: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        })
    }

    pub fn adam(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self> {
        if !lr.is_finite() || lr < 0.0 {
            return Err(Error::InvalidArgument {
                what: format!("learning rate must be finite and >= 0, got {lr}"),
            });
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
            return Err(Error::InvalidArgument {
                what: format!("bad adam constants ({beta1}, {beta2}, {eps})"),
            });
        }
        Ok(Optimizer {
            kind: OptimizerKind::Adam,
            lr,
            momentum: 0.0,
            beta1,
            beta2,
            eps,
            steps: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. Gradients must be keyed exactly like the
    /// parameters.
    pub fn step(&mut self, params: &mut ParamSet, grads: &BTreeMap<String, Tensor>) -> Result<()> {
        for key in grads.keys() {
            if params.get(key).is_err() {
                return Err(Error::KeyMismatch { key: key.clone() });
            }
        }
        let names: Vec<String> = params.names().cloned().collect();
        for name in &names {
            let grad = grads
                .get(name)
                .ok_or_else(|| Error::KeyMismatch { key: name.clone() })?;
            let current = params.get(name)?;
            if grad.shape() != current.shape() {
                return Err(Error::ShapeMismatch {
                    op: "optimizer step",
                    lhs: grad.shape().to_vec(),
                    rhs: current.shape().to_vec(),
                });
            }
            let updated = match self.kind {
                OptimizerKind::Sgd => self.sgd_update(name, current, grad),
                OptimizerKind::Adam => self.adam_update(name, current, grad),
            }?;
            params.set(name, updated)?;
        }
        self.steps += 1;
        Ok(())
    }

    fn sgd_update(&mut self, name: &str, w: &Tensor, g: &Tensor) -> Result<Tensor> {
        let vel = self
            .first
            .entry(name.to_string())
            .or_insert_with(|| vec![0.0; w.len()]);
        let mut out = w.data().to_vec();
        for ((o, v), &gi) in out.iter_mut().zip(vel.iter_mut()).zip(g.data()) {
            *v = self.momentum * *v + gi;
            *o -= self.lr * *v;
        }
        Tensor::new(w.shape().to_vec(), out)
    }

    fn adam_update(&mut self, name: &str, w: &Tensor, g: &Tensor) -> Result<Tensor> {
        let t = (self.steps + 1) as f64;
        let m = self
            .first
            .entry(name.to_string())
            .or_insert_with(|| vec![0.0; w.len()]);
        let v = self
            .second
            .entry(name.to_string())
            .or_insert_with(|| vec![0.0; w.len()]);
        let bias1 = 1.0 - self.beta1.powf(t);
        let bias2 = 1.0 - self.beta2.powf(t);
        let mut out = w.data().to_vec();
        for (((o, mi), vi), &gi) in out.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()).zip(g.data())
        {
            *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
            *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
            let m_hat = *mi / bias1;
            let v_hat = *vi / bias2;
            *o -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Tensor::new(w.shape().to_vec(), out)
    }
}
