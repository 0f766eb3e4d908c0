//! Define-by-run reverse-mode differentiation.
//!
//! A [`Graph`] is an append-only tape of primitive operations: every method
//! that produces a node records the inputs it needs for its backward rule,
//! and node ids are topologically ordered by construction. [`Graph::backward`]
//! walks the tape once in reverse, accumulating gradients additively across
//! fan-out. Graphs are rebuilt per forward pass and confined to one logical
//! thread.

use crate::error::{Error, Result};
use crate::region::{self, NormRegion};
use crate::tensor::{self, BinaryOp, Tensor, UnaryOp};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(pub(crate) usize);

impl NodeId {
    pub fn index(&self) -> usize {
        self.0
    }
}

/// Elementwise operation selector mirroring the public `elementwise` entry
/// point; unary variants reject a second operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseOp {
    Add,
    Sub,
    Mul,
    Div,
    Abs,
    Sqrt,
    Tanh,
    Sigmoid,
    Relu,
    Square,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Unary { kind: UnaryOp, x: NodeId },
    Binary { kind: BinaryOp, a: NodeId, b: NodeId },
    Shift { x: NodeId },
    Scale { x: NodeId, c: f64 },
    Matmul { a: NodeId, b: NodeId },
    Conv2d { x: NodeId, w: NodeId, pad: usize, stride: usize },
    RegionMean { x: NodeId, region: NormRegion },
    Sum { x: NodeId },
    Mean { x: NodeId },
    SliceCols { x: NodeId, start: usize },
    Reshape { x: NodeId },
    MeanPool2 { x: NodeId },
    CrossEntropy { logits: NodeId, targets: Vec<usize>, softmax: Tensor },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Append-only tape of recorded operations.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradient of the loss with respect to every reached node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient for a node, if the loss depends on it.
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient for a node, or zeros of the given shape when the loss does
    /// not depend on it.
    pub fn get_or_zeros(&self, id: NodeId, shape: &[usize]) -> Tensor {
        match self.get(id) {
            Some(g) => g.clone(),
            None => Tensor::zeros(shape),
        }
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input tensor and returns its node.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// Forward value of a node.
    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Elementwise dispatch: binary kinds require `b`, unary kinds reject it.
    pub fn elementwise(&mut self, op: ElementwiseOp, a: NodeId, b: Option<NodeId>) -> Result<NodeId> {
        use ElementwiseOp as E;
        match (op, b) {
            (E::Add, Some(b)) => self.add(a, b),
            (E::Sub, Some(b)) => self.sub(a, b),
            (E::Mul, Some(b)) => self.mul(a, b),
            (E::Div, Some(b)) => self.div(a, b),
            (E::Abs, None) => self.abs(a),
            (E::Sqrt, None) => self.sqrt(a),
            (E::Tanh, None) => self.tanh(a),
            (E::Sigmoid, None) => self.sigmoid(a),
            (E::Relu, None) => self.relu(a),
            (E::Square, None) => self.square(a),
            (E::Add | E::Sub | E::Mul | E::Div, None) => Err(Error::InvalidArgument {
                what: format!("{op:?} requires a second operand"),
            }),
            (_, Some(_)) => Err(Error::InvalidArgument {
                what: format!("{op:?} takes a single operand"),
            }),
        }
    }

    fn binary(&mut self, kind: BinaryOp, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).binary(kind, self.value(b))?;
        Ok(self.push(value, Op::Binary { kind, a, b }))
    }

    fn unary(&mut self, kind: UnaryOp, x: NodeId) -> Result<NodeId> {
        let value = self.value(x).unary(kind)?;
        Ok(self.push(value, Op::Unary { kind, x }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinaryOp::Mul, a, b)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary(BinaryOp::Div, a, b)
    }

    pub fn abs(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(UnaryOp::Abs, x)
    }

    pub fn sqrt(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(UnaryOp::Sqrt, x)
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(UnaryOp::Tanh, x)
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(UnaryOp::Sigmoid, x)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(UnaryOp::Relu, x)
    }

    pub fn square(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(UnaryOp::Square, x)
    }

    /// x + c for a constant c (no gradient to the constant).
    pub fn shift(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        let value = self.value(x).shift(c)?;
        Ok(self.push(value, Op::Shift { x }))
    }

    /// c · x for a constant c.
    pub fn scale(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        let value = self.value(x).scale(c)?;
        Ok(self.push(value, Op::Scale { x, c }))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::Matmul { a, b }))
    }

    pub fn conv2d(&mut self, x: NodeId, w: NodeId, pad: usize, stride: usize) -> Result<NodeId> {
        let value = tensor::conv2d(self.value(x), self.value(w), pad, stride)?;
        Ok(self.push(value, Op::Conv2d { x, w, pad, stride }))
    }

    /// Mean over each position's accumulation set, broadcast back to the
    /// input shape.
    pub fn region_mean(&mut self, x: NodeId, region: &NormRegion) -> Result<NodeId> {
        let value = region::region_mean(self.value(x), region)?;
        Ok(self.push(value, Op::RegionMean { x, region: *region }))
    }

    /// Sum of all elements, as a scalar node of shape `[1]`.
    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let value = Tensor::scalar(self.value(x).data().iter().sum())?;
        Ok(self.push(value, Op::Sum { x }))
    }

    /// Mean of all elements, as a scalar node of shape `[1]`.
    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        let t = self.value(x);
        let value = Tensor::scalar(t.data().iter().sum::<f64>() / t.len() as f64)?;
        Ok(self.push(value, Op::Mean { x }))
    }

    pub fn slice_cols(&mut self, x: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let value = tensor::slice_cols(self.value(x), start, len)?;
        Ok(self.push(value, Op::SliceCols { x, start }))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.value(x).reshaped(shape)?;
        Ok(self.push(value, Op::Reshape { x }))
    }

    pub fn mean_pool2(&mut self, x: NodeId) -> Result<NodeId> {
        let value = tensor::mean_pool2(self.value(x))?;
        Ok(self.push(value, Op::MeanPool2 { x }))
    }

    /// Mean over rows of −log softmax(logits)\[target\], computed with
    /// max-subtraction. Scalar output.
    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let t = self.value(logits);
        if t.rank() != 2 || t.shape()[0] != targets.len() {
            return Err(Error::ShapeMismatch {
                op: "cross_entropy",
                lhs: t.shape().to_vec(),
                rhs: vec![targets.len()],
            });
        }
        let (n, k) = (t.shape()[0], t.shape()[1]);
        if let Some(&bad) = targets.iter().find(|&&c| c >= k) {
            return Err(Error::TargetOutOfRange {
                target: bad,
                classes: k,
            });
        }
        let mut softmax = vec![0.0; n * k];
        let mut total = 0.0;
        for i in 0..n {
            let row = &t.data()[i * k..(i + 1) * k];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut denom = 0.0;
            for (j, &l) in row.iter().enumerate() {
                let e = (l - max).exp();
                softmax[i * k + j] = e;
                denom += e;
            }
            for j in 0..k {
                softmax[i * k + j] /= denom;
            }
            total += denom.ln() - (row[targets[i]] - max);
        }
        let value = Tensor::scalar(total / n as f64)?;
        let softmax = Tensor::new(vec![n, k], softmax)?;
        Ok(self.push(
            value,
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                softmax,
            },
        ))
    }

    /// Reverse pass from a scalar loss node. Returns ∂loss/∂node for every
    /// node the loss depends on; fan-out contributions accumulate additively.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if !loss_value.is_scalar() {
            return Err(Error::NonScalarLoss {
                shape: loss_value.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::ones(loss_value.shape()));
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].clone() else { continue };
            match &self.nodes[id].op {
                Op::Leaf => {}
                Op::Unary { kind, x } => {
                    let delta = self.unary_backward(*kind, *x, NodeId(id), &g)?;
                    Tensor::accumulate(&mut grads[x.0], delta);
                }
                Op::Binary { kind, a, b } => {
                    let (da, db) = self.binary_backward(*kind, *a, *b, &g)?;
                    Tensor::accumulate(&mut grads[a.0], da);
                    Tensor::accumulate(&mut grads[b.0], db);
                }
                Op::Shift { x } => {
                    Tensor::accumulate(&mut grads[x.0], g);
                }
                Op::Scale { x, c } => {
                    Tensor::accumulate(&mut grads[x.0], g.scale(*c)?);
                }
                Op::Matmul { a, b } => {
                    let da = g.matmul(&self.value(*b).transposed()?)?;
                    let db = self.value(*a).transposed()?.matmul(&g)?;
                    Tensor::accumulate(&mut grads[a.0], da);
                    Tensor::accumulate(&mut grads[b.0], db);
                }
                Op::Conv2d { x, w, pad, stride } => {
                    let (dx, dw) =
                        tensor::conv2d_backward(self.value(*x), self.value(*w), *pad, *stride, &g)?;
                    Tensor::accumulate(&mut grads[x.0], dx);
                    Tensor::accumulate(&mut grads[w.0], dw);
                }
                Op::RegionMean { x, region } => {
                    let dx = region::region_mean_backward(&g, region)?;
                    Tensor::accumulate(&mut grads[x.0], dx);
                }
                Op::Sum { x } => {
                    let shape = self.value(*x).shape();
                    Tensor::accumulate(&mut grads[x.0], Tensor::ones(shape).scale(g.scalar_value())?);
                }
                Op::Mean { x } => {
                    let t = self.value(*x);
                    let c = g.scalar_value() / t.len() as f64;
                    Tensor::accumulate(&mut grads[x.0], Tensor::ones(t.shape()).scale(c)?);
                }
                Op::SliceCols { x, start } => {
                    let dx = tensor::slice_cols_backward(&g, self.value(*x).shape(), *start)?;
                    Tensor::accumulate(&mut grads[x.0], dx);
                }
                Op::Reshape { x } => {
                    let dx = g.reshaped(self.value(*x).shape())?;
                    Tensor::accumulate(&mut grads[x.0], dx);
                }
                Op::MeanPool2 { x } => {
                    let dx = tensor::mean_pool2_backward(&g, self.value(*x).shape())?;
                    Tensor::accumulate(&mut grads[x.0], dx);
                }
                Op::CrossEntropy {
                    logits,
                    targets,
                    softmax,
                } => {
                    let (n, k) = (softmax.shape()[0], softmax.shape()[1]);
                    let scale = g.scalar_value() / n as f64;
                    let mut dl = softmax.data().to_vec();
                    for (i, &t) in targets.iter().enumerate() {
                        dl[i * k + t] -= 1.0;
                    }
                    dl.iter_mut().for_each(|v| *v *= scale);
                    Tensor::accumulate(&mut grads[logits.0], Tensor::new(vec![n, k], dl)?);
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn unary_backward(&self, kind: UnaryOp, x: NodeId, out: NodeId, g: &Tensor) -> Result<Tensor> {
        let xv = self.value(x);
        let yv = self.value(out);
        let local: Vec<f64> = match kind {
            // subgradient 0 at exactly 0
            UnaryOp::Abs => xv
                .data()
                .iter()
                .map(|&v| if v > 0.0 {
                    1.0
                } else if v < 0.0 {
                    -1.0
                } else {
                    0.0
                })
                .collect(),
            UnaryOp::Sqrt => yv.data().iter().map(|&y| 0.5 / y).collect(),
            UnaryOp::Tanh => yv.data().iter().map(|&y| 1.0 - y * y).collect(),
            UnaryOp::Sigmoid => yv.data().iter().map(|&y| y * (1.0 - y)).collect(),
            UnaryOp::Relu => xv
                .data()
                .iter()
                .map(|&v| if v > 0.0 { 1.0 } else { 0.0 })
                .collect(),
            UnaryOp::Square => xv.data().iter().map(|&v| 2.0 * v).collect(),
        };
        let local = Tensor::new(xv.shape().to_vec(), local).map_err(|e| match e {
            Error::NonFinite { .. } => Error::NonFinite {
                context: format!("backward of {kind:?}"),
            },
            other => other,
        })?;
        g.binary(BinaryOp::Mul, &local)
    }

    fn binary_backward(
        &self,
        kind: BinaryOp,
        a: NodeId,
        b: NodeId,
        g: &Tensor,
    ) -> Result<(Tensor, Tensor)> {
        let av = self.value(a);
        let bv = self.value(b);
        let (da, db) = match kind {
            BinaryOp::Add => (g.clone(), g.clone()),
            BinaryOp::Sub => (g.clone(), g.scale(-1.0)?),
            BinaryOp::Mul => (g.binary(BinaryOp::Mul, bv)?, g.binary(BinaryOp::Mul, av)?),
            BinaryOp::Div => {
                let da = g.binary(BinaryOp::Div, bv)?;
                // −g · a / b²
                let b2 = bv.unary(UnaryOp::Square)?;
                let db = g
                    .binary(BinaryOp::Mul, av)?
                    .binary(BinaryOp::Div, &b2)?
                    .scale(-1.0)?;
                (da, db)
            }
        };
        Ok((da.reduce_to(av.shape())?, db.reduce_to(bv.shape())?))
    }
}
