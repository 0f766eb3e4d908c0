//! Dense row-major f64 tensors and the value-level kernels every other
//! module builds on. Tensors are immutable after construction; all
//! operations allocate their result.
//!
//! Canonical layouts: N×D for 2-d activations, N×C×H×W for 4-d images.
//! Broadcasting is right-aligned and limited to extent-1 axes.

use crate::error::{Error, Result};

/// Elementwise operations taking one operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Abs,
    Sqrt,
    Tanh,
    Sigmoid,
    Relu,
    Square,
}

/// Elementwise operations taking two operands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Dense n-dimensional array of finite f64 values in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, checking the shape/data contract: every extent is at
    /// least 1, the data length matches the shape product, and every value is
    /// finite.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::InvalidShape {
                reason: format!("extents must all be >= 1, got {shape:?}"),
            });
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::DataLength {
                expected,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("tensor construction (flat index {pos})"),
            });
        }
        Ok(Tensor { shape, data })
    }

    /// All-zero tensor. Panics on a degenerate shape; shapes here come from
    /// code, not user input.
    pub fn zeros(shape: &[usize]) -> Self {
        assert!(
            !shape.is_empty() && shape.iter().all(|&e| e >= 1),
            "zeros: bad shape {shape:?}"
        );
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    /// All-one tensor.
    pub fn ones(shape: &[usize]) -> Self {
        let mut t = Tensor::zeros(shape);
        t.data.iter_mut().for_each(|v| *v = 1.0);
        t
    }

    /// Constant tensor.
    pub fn full(shape: &[usize], value: f64) -> Result<Self> {
        let len: usize = shape.iter().product();
        Tensor::new(shape.to_vec(), vec![value; len])
    }

    /// Scalar tensor of shape `[1]`.
    pub fn scalar(value: f64) -> Result<Self> {
        Tensor::new(vec![1], vec![value])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// True when every extent is 1.
    pub fn is_scalar(&self) -> bool {
        self.shape.iter().all(|&e| e == 1)
    }

    /// The single value of a scalar tensor.
    pub fn scalar_value(&self) -> f64 {
        debug_assert!(self.is_scalar(), "scalar_value on shape {:?}", self.shape);
        self.data[0]
    }

    /// Value at a multi-index (row-major).
    pub fn at(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut lin = 0usize;
        for (d, (&i, &n)) in idx.iter().zip(&self.shape).enumerate() {
            debug_assert!(i < n, "index {i} out of bounds at axis {d}");
            lin = lin * n + i;
        }
        self.data[lin]
    }

    /// Same data under a new shape with equal element count.
    pub fn reshaped(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape.to_vec(), self.data.clone())
    }

    /// Elementwise unary operation.
    pub fn unary(&self, op: UnaryOp) -> Result<Tensor> {
        if op == UnaryOp::Sqrt {
            if let Some(v) = self.data.iter().find(|v| **v < 0.0) {
                return Err(Error::Domain {
                    op: "sqrt",
                    detail: format!("negative operand {v}"),
                });
            }
        }
        let data = self
            .data
            .iter()
            .map(|&x| match op {
                UnaryOp::Abs => x.abs(),
                UnaryOp::Sqrt => x.sqrt(),
                UnaryOp::Tanh => x.tanh(),
                UnaryOp::Sigmoid => 1.0 / (1.0 + (-x).exp()),
                UnaryOp::Relu => {
                    if x > 0.0 {
                        x
                    } else {
                        0.0
                    }
                }
                UnaryOp::Square => x * x,
            })
            .collect();
        Tensor::new(self.shape.clone(), data)
    }

    /// Elementwise binary operation under extent-1 broadcasting.
    pub fn binary(&self, op: BinaryOp, rhs: &Tensor) -> Result<Tensor> {
        if op == BinaryOp::Div {
            if let Some(v) = rhs.data.iter().find(|v| **v == 0.0) {
                return Err(Error::Domain {
                    op: "div",
                    detail: format!("zero divisor element {v}"),
                });
            }
        }
        let out_shape = broadcast_shape(&self.shape, &rhs.shape).map_err(|_| {
            Error::ShapeMismatch {
                op: "elementwise",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            }
        })?;
        let la = BroadcastLayout::new(&self.shape, &out_shape);
        let lb = BroadcastLayout::new(&rhs.shape, &out_shape);
        let len: usize = out_shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; out_shape.len()];
        for _ in 0..len {
            let a = self.data[la.offset(&idx)];
            let b = rhs.data[lb.offset(&idx)];
            data.push(match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => a / b,
            });
            increment(&mut idx, &out_shape);
        }
        Tensor::new(out_shape, data)
    }

    /// x + c for a plain constant.
    pub fn shift(&self, c: f64) -> Result<Tensor> {
        Tensor::new(self.shape.clone(), self.data.iter().map(|x| x + c).collect())
    }

    /// c · x for a plain constant.
    pub fn scale(&self, c: f64) -> Result<Tensor> {
        Tensor::new(self.shape.clone(), self.data.iter().map(|x| x * c).collect())
    }

    /// Standard matrix product of 2-d tensors (N×K · K×M → N×M).
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || rhs.rank() != 2 || self.shape[1] != rhs.shape[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: rhs.shape.clone(),
            });
        }
        let (n, k) = (self.shape[0], self.shape[1]);
        let m = rhs.shape[1];
        let mut data = vec![0.0; n * m];
        for i in 0..n {
            for kk in 0..k {
                let a = self.data[i * k + kk];
                if a == 0.0 {
                    continue;
                }
                let row = &rhs.data[kk * m..(kk + 1) * m];
                let out = &mut data[i * m..(i + 1) * m];
                for (o, &b) in out.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Tensor::new(vec![n, m], data)
    }

    /// Transpose of a 2-d tensor.
    pub fn transposed(&self) -> Result<Tensor> {
        if self.rank() != 2 {
            return Err(Error::InvalidShape {
                reason: format!("transpose expects rank 2, got {:?}", self.shape),
            });
        }
        let (n, m) = (self.shape[0], self.shape[1]);
        let mut data = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                data[j * n + i] = self.data[i * m + j];
            }
        }
        Tensor::new(vec![m, n], data)
    }

    /// Sums a gradient back down to `target` after broadcasting, adding over
    /// every axis the forward op expanded.
    pub fn reduce_to(&self, target: &[usize]) -> Result<Tensor> {
        if self.shape == target {
            return Ok(self.clone());
        }
        let layout = BroadcastLayout::new(target, &self.shape);
        let target_len: usize = target.iter().product();
        let mut data = vec![0.0; target_len];
        let mut idx = vec![0usize; self.shape.len()];
        for &v in &self.data {
            data[layout.offset(&idx)] += v;
            increment(&mut idx, &self.shape);
        }
        Tensor::new(target.to_vec(), data)
    }

    fn add_in_place(&mut self, rhs: &Tensor) {
        debug_assert_eq!(self.shape, rhs.shape);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }

    /// Gradient accumulation across fan-out.
    pub(crate) fn accumulate(slot: &mut Option<Tensor>, delta: Tensor) {
        match slot {
            Some(t) => t.add_in_place(&delta),
            None => *slot = Some(delta),
        }
    }
}

/// Right-aligned broadcast shape; each aligned extent pair must be equal or
/// contain a 1.
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let ea = if i < rank - a.len() { 1 } else { a[i - (rank - a.len())] };
        let eb = if i < rank - b.len() { 1 } else { b[i - (rank - b.len())] };
        out[i] = if ea == eb || eb == 1 {
            ea
        } else if ea == 1 {
            eb
        } else {
            return Err(Error::ShapeMismatch {
                op: "broadcast",
                lhs: a.to_vec(),
                rhs: b.to_vec(),
            });
        };
    }
    Ok(out)
}

/// Maps an output multi-index to a flat offset in a (possibly broadcast)
/// operand: broadcast axes get stride 0.
struct BroadcastLayout {
    strides: Vec<usize>,
}

impl BroadcastLayout {
    fn new(from: &[usize], to: &[usize]) -> Self {
        let rank = to.len();
        let pad = rank - from.len();
        let mut strides = vec![0usize; rank];
        let mut acc = 1usize;
        for i in (0..from.len()).rev() {
            strides[pad + i] = if from[i] == 1 { 0 } else { acc };
            acc *= from[i];
        }
        BroadcastLayout { strides }
    }

    fn offset(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }
}

/// Row-major odometer increment.
fn increment(idx: &mut [usize], shape: &[usize]) {
    for axis in (0..shape.len()).rev() {
        idx[axis] += 1;
        if idx[axis] < shape[axis] {
            return;
        }
        idx[axis] = 0;
    }
}

/// Zero-padded cross-correlation of x (N×C×H×W) with kernels w (F×C×k×k).
pub fn conv2d(x: &Tensor, w: &Tensor, pad: usize, stride: usize) -> Result<Tensor> {
    let (n, c, h, wd, f, k) = conv_dims(x, w, pad, stride)?;
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let xs = x.data();
    let ws = w.data();
    let mut out = vec![0.0; n * f * oh * ow];
    for in_ in 0..n {
        for fo in 0..f {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ci in 0..c {
                        for ky in 0..k {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..k {
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if ix < 0 || ix >= wd as isize {
                                    continue;
                                }
                                let xi = ((in_ * c + ci) * h + iy as usize) * wd + ix as usize;
                                let wi = ((fo * c + ci) * k + ky) * k + kx;
                                acc += xs[xi] * ws[wi];
                            }
                        }
                    }
                    out[((in_ * f + fo) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    Tensor::new(vec![n, f, oh, ow], out)
}

/// Gradients of `conv2d` with respect to the input and the kernels.
pub fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    pad: usize,
    stride: usize,
    upstream: &Tensor,
) -> Result<(Tensor, Tensor)> {
    let (n, c, h, wd, f, k) = conv_dims(x, w, pad, stride)?;
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    if upstream.shape() != [n, f, oh, ow] {
        return Err(Error::ShapeMismatch {
            op: "conv2d backward",
            lhs: upstream.shape().to_vec(),
            rhs: vec![n, f, oh, ow],
        });
    }
    let xs = x.data();
    let ws = w.data();
    let up = upstream.data();
    let mut dx = vec![0.0; xs.len()];
    let mut dw = vec![0.0; ws.len()];
    for in_ in 0..n {
        for fo in 0..f {
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = up[((in_ * f + fo) * oh + oy) * ow + ox];
                    if g == 0.0 {
                        continue;
                    }
                    for ci in 0..c {
                        for ky in 0..k {
                            let iy = (oy * stride + ky) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            for kx in 0..k {
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if ix < 0 || ix >= wd as isize {
                                    continue;
                                }
                                let xi = ((in_ * c + ci) * h + iy as usize) * wd + ix as usize;
                                let wi = ((fo * c + ci) * k + ky) * k + kx;
                                dx[xi] += g * ws[wi];
                                dw[wi] += g * xs[xi];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((Tensor::new(x.shape().to_vec(), dx)?, Tensor::new(w.shape().to_vec(), dw)?))
}

fn conv_dims(
    x: &Tensor,
    w: &Tensor,
    pad: usize,
    stride: usize,
) -> Result<(usize, usize, usize, usize, usize, usize)> {
    if x.rank() != 4 || w.rank() != 4 {
        return Err(Error::ShapeMismatch {
            op: "conv2d",
            lhs: x.shape().to_vec(),
            rhs: w.shape().to_vec(),
        });
    }
    let (n, c, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (f, cw, kh, kw) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    if cw != c || kh != kw {
        return Err(Error::ShapeMismatch {
            op: "conv2d",
            lhs: x.shape().to_vec(),
            rhs: w.shape().to_vec(),
        });
    }
    let k = kh;
    if k % 2 == 0 {
        return Err(Error::InvalidArgument {
            what: format!("conv2d kernel extent must be odd, got {k}"),
        });
    }
    if stride == 0 {
        return Err(Error::InvalidArgument {
            what: "conv2d stride must be >= 1".into(),
        });
    }
    if h + 2 * pad < k || wd + 2 * pad < k {
        return Err(Error::ShapeMismatch {
            op: "conv2d (kernel exceeds padded input)",
            lhs: vec![h, wd],
            rhs: vec![k, k],
        });
    }
    Ok((n, c, h, wd, f, k))
}

/// 2×2 mean pooling with stride 2; spatial extents must be even.
pub fn mean_pool2(x: &Tensor) -> Result<Tensor> {
    if x.rank() != 4 || !x.shape()[2].is_multiple_of(2) || !x.shape()[3].is_multiple_of(2) {
        return Err(Error::InvalidShape {
            reason: format!("mean_pool2 expects N×C×even×even, got {:?}", x.shape()),
        });
    }
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (oh, ow) = (h / 2, w / 2);
    let xs = x.data();
    let mut out = vec![0.0; n * c * oh * ow];
    for nc in 0..n * c {
        for oy in 0..oh {
            for ox in 0..ow {
                let base = nc * h * w + 2 * oy * w + 2 * ox;
                let s = xs[base] + xs[base + 1] + xs[base + w] + xs[base + w + 1];
                out[(nc * oh + oy) * ow + ox] = s * 0.25;
            }
        }
    }
    Tensor::new(vec![n, c, oh, ow], out)
}

/// Gradient of `mean_pool2`: each input position receives a quarter of its
/// pool cell's upstream value.
pub fn mean_pool2_backward(upstream: &Tensor, input_shape: &[usize]) -> Result<Tensor> {
    let (n, c, h, w) = (
        input_shape[0],
        input_shape[1],
        input_shape[2],
        input_shape[3],
    );
    let (oh, ow) = (h / 2, w / 2);
    let up = upstream.data();
    let mut dx = vec![0.0; n * c * h * w];
    for nc in 0..n * c {
        for oy in 0..oh {
            for ox in 0..ow {
                let g = up[(nc * oh + oy) * ow + ox] * 0.25;
                let base = nc * h * w + 2 * oy * w + 2 * ox;
                dx[base] += g;
                dx[base + 1] += g;
                dx[base + w] += g;
                dx[base + w + 1] += g;
            }
        }
    }
    Tensor::new(input_shape.to_vec(), dx)
}

/// Contiguous column block `[start, start+len)` of a 2-d tensor.
pub fn slice_cols(x: &Tensor, start: usize, len: usize) -> Result<Tensor> {
    if x.rank() != 2 || start + len > x.shape()[1] || len == 0 {
        return Err(Error::InvalidShape {
            reason: format!(
                "slice_cols [{start}, {}) out of bounds for {:?}",
                start + len,
                x.shape()
            ),
        });
    }
    let (n, m) = (x.shape()[0], x.shape()[1]);
    let mut data = Vec::with_capacity(n * len);
    for i in 0..n {
        data.extend_from_slice(&x.data()[i * m + start..i * m + start + len]);
    }
    Tensor::new(vec![n, len], data)
}

/// Scatters a column-slice gradient back into the full width.
pub fn slice_cols_backward(upstream: &Tensor, input_shape: &[usize], start: usize) -> Result<Tensor> {
    let (n, m) = (input_shape[0], input_shape[1]);
    let len = upstream.shape()[1];
    let mut dx = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..len {
            dx[i * m + start + j] = upstream.data()[i * len + j];
        }
    }
    Tensor::new(input_shape.to_vec(), dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn construction_contract() {
        assert!(matches!(
            Tensor::new(vec![2, 2], vec![1.0; 3]),
            Err(Error::DataLength { expected: 4, got: 3 })
        ));
        assert!(matches!(
            Tensor::new(vec![0], vec![]),
            Err(Error::InvalidShape { .. })
        ));
        assert!(matches!(
            Tensor::new(vec![2], vec![1.0, f64::NAN]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn add_identity_element() {
        let out = t(&[2], &[1.0, 2.0]).binary(BinaryOp::Add, &t(&[2], &[0.0, 0.0])).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0]);
    }

    #[test]
    fn mul_direct_values() {
        let out = t(&[2], &[3.0, 4.0]).binary(BinaryOp::Mul, &t(&[2], &[2.0, 2.0])).unwrap();
        assert_eq!(out.data(), &[6.0, 8.0]);
    }

    #[test]
    fn sqrt_negative_is_domain_error() {
        assert!(matches!(
            t(&[1], &[-1.0]).unary(UnaryOp::Sqrt),
            Err(Error::Domain { op: "sqrt", .. })
        ));
    }

    #[test]
    fn div_by_zero_is_domain_error() {
        assert!(matches!(
            t(&[2], &[1.0, 1.0]).binary(BinaryOp::Div, &t(&[2], &[1.0, 0.0])),
            Err(Error::Domain { op: "div", .. })
        ));
    }

    #[test]
    fn broadcasting_extent_one_only() {
        let a = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let row = t(&[2], &[10.0, 20.0]);
        let out = a.binary(BinaryOp::Add, &row).unwrap();
        assert_eq!(out.data(), &[11.0, 22.0, 13.0, 24.0]);
        let bad = t(&[3], &[0.0; 3]);
        assert!(matches!(
            a.binary(BinaryOp::Add, &bad),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn reduce_to_sums_broadcast_axes() {
        let g = t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let reduced = g.reduce_to(&[3]).unwrap();
        assert_eq!(reduced.data(), &[5.0, 7.0, 9.0]);
        let reduced = g.reduce_to(&[2, 1]).unwrap();
        assert_eq!(reduced.data(), &[6.0, 15.0]);
    }

    #[test]
    fn matmul_identity() {
        let i2 = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let m = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(i2.matmul(&m).unwrap().data(), m.data());
    }

    #[test]
    fn matmul_direct_value() {
        let a = t(&[1, 2], &[1.0, 2.0]);
        let b = t(&[2, 1], &[3.0, 4.0]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), &[1, 1]);
        assert_eq!(c.data(), &[11.0]);
    }

    #[test]
    fn matmul_inner_extent_mismatch() {
        let a = t(&[2, 3], &[0.0; 6]);
        let b = t(&[2, 3], &[0.0; 6]);
        assert!(matches!(a.matmul(&b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn conv_identity_kernel() {
        let x = t(&[1, 1, 3, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let w = t(&[1, 1, 1, 1], &[1.0]);
        let y = conv2d(&x, &w, 0, 1).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn conv_ones_kernel_interior() {
        let c = 2.5;
        let x = Tensor::full(&[1, 1, 5, 5], c).unwrap();
        let w = Tensor::ones(&[1, 1, 3, 3]);
        let y = conv2d(&x, &w, 1, 1).unwrap();
        assert_eq!(y.shape(), &[1, 1, 5, 5]);
        // interior positions see the full 3×3 support
        assert!((y.at(&[0, 0, 2, 2]) - 9.0 * c).abs() < 1e-12);
        // corners see only 4 in-bounds taps
        assert!((y.at(&[0, 0, 0, 0]) - 4.0 * c).abs() < 1e-12);
    }

    #[test]
    fn conv_kernel_exceeding_input_is_shape_error() {
        let x = Tensor::ones(&[1, 1, 2, 2]);
        let w = Tensor::ones(&[1, 1, 3, 3]);
        assert!(matches!(conv2d(&x, &w, 0, 1), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn pool_is_cell_mean() {
        let x = t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let y = mean_pool2(&x).unwrap();
        assert_eq!(y.data(), &[2.5]);
    }

    #[test]
    fn slice_cols_roundtrip() {
        let x = t(&[2, 4], &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let s = slice_cols(&x, 1, 2).unwrap();
        assert_eq!(s.data(), &[1.0, 2.0, 5.0, 6.0]);
        let back = slice_cols_backward(&s, &[2, 4], 1).unwrap();
        assert_eq!(back.data(), &[0.0, 1.0, 2.0, 0.0, 0.0, 5.0, 6.0, 0.0]);
    }
}
