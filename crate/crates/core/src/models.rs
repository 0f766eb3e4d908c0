//! Desk-scale architectures with explicit normalizer insertion points: an
//! MLP, a small ConvNet, and an LSTM cell with per-gate normalization.
//! Every pre-activation is normalized before the nonlinearity (z → v → y).

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::norm::{
    normalize_node, spec_preset, DnWindow, InputLayout, NormState, PresetConfig, PresetKind,
    TapedNorm,
};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Mlp,
    Convnet,
    CharLstm,
}

/// Normalizer template instantiated at every insertion point; the per-layer
/// channel extent and rank come from the layer itself, the per-layer affine
/// parameters live in the [`ParamSet`].
#[derive(Debug, Clone, Copy)]
pub struct NormConfig {
    pub preset: PresetKind,
    pub sigma: f64,
    pub lambda_l1: f64,
    pub affine: bool,
    pub dn_window: DnWindow,
    pub sigma_zero_ack: bool,
}

impl NormConfig {
    pub fn new(preset: PresetKind) -> Self {
        NormConfig {
            preset,
            sigma: 1.0,
            lambda_l1: 0.0,
            affine: true,
            dn_window: DnWindow::default(),
            sigma_zero_ack: false,
        }
    }

    fn preset_config(&self, layout: InputLayout, channels: usize) -> PresetConfig {
        PresetConfig {
            kind: self.preset,
            layout,
            channels,
            dn_window: self.dn_window,
            sigma: self.sigma,
            lambda_l1: self.lambda_l1,
            affine: false, // affine parameters come from the ParamSet
            sigma_zero_ack: self.sigma_zero_ack,
        }
    }
}

/// Architecture plus the normalizer applied after each pre-activation.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// MLP input width; char-LSTM vocabulary size.
    pub input_features: usize,
    /// ConvNet input planes (C, H, W).
    pub image: (usize, usize, usize),
    /// MLP hidden widths, ConvNet channel counts, or `[lstm_hidden]`.
    pub hidden: Vec<usize>,
    /// ConvNet kernel extent (odd).
    pub kernel: usize,
    pub classes: usize,
    pub activation: Activation,
    pub norm: NormConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::InvalidArgument {
                what: "model needs at least one hidden layer".into(),
            });
        }
        if self.classes < 2 {
            return Err(Error::InvalidArgument {
                what: format!("class count must be >= 2, got {}", self.classes),
            });
        }
        match self.kind {
            ModelKind::Mlp => {
                if self.input_features == 0 {
                    return Err(Error::InvalidArgument {
                        what: "mlp input width must be >= 1".into(),
                    });
                }
            }
            ModelKind::Convnet => {
                if self.kernel.is_multiple_of(2) {
                    return Err(Error::InvalidArgument {
                        what: format!("conv kernel must be odd, got {}", self.kernel),
                    });
                }
                let (_, mut h, mut w) = self.image;
                for _ in &self.hidden {
                    if h % 2 != 0 || w % 2 != 0 {
                        return Err(Error::InvalidArgument {
                            what: format!(
                                "spatial extents must halve under pooling; got {h}×{w} at a stack"
                            ),
                        });
                    }
                    h /= 2;
                    w /= 2;
                }
            }
            ModelKind::CharLstm => {
                if self.hidden.len() != 1 {
                    return Err(Error::InvalidArgument {
                        what: "char-lstm takes exactly one hidden width".into(),
                    });
                }
                if self.input_features == 0 {
                    return Err(Error::InvalidArgument {
                        what: "char-lstm vocabulary must be >= 1".into(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Named weight/bias/gain tensors with deterministic (sorted) iteration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    entries: BTreeMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        let name = name.into();
        let prior = self.entries.insert(name.clone(), tensor);
        debug_assert!(prior.is_none(), "duplicate parameter {name}");
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.entries.get(name).ok_or_else(|| Error::KeyMismatch {
            key: name.to_string(),
        })
    }

    pub fn set(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        match self.entries.get_mut(name) {
            Some(slot) => {
                *slot = tensor;
                Ok(())
            }
            None => Err(Error::KeyMismatch {
                key: name.to_string(),
            }),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.entries.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.entries.keys()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Deterministic initialization: weights from a fan-in-scaled uniform
/// distribution, biases zero, normalizer gains one.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ParamSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamSet::new();
    let mut uniform = |shape: &[usize], fan_in: usize| -> Tensor {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let len: usize = shape.iter().product();
        let data: Vec<f64> = (0..len).map(|_| rng.random_range(-bound..bound)).collect();
        Tensor::new(shape.to_vec(), data).expect("init draw")
    };

    match cfg.kind {
        ModelKind::Mlp => {
            let mut fan_in = cfg.input_features;
            for (i, &width) in cfg.hidden.iter().enumerate() {
                params.insert(format!("l{i:02}.w"), uniform(&[fan_in, width], fan_in));
                params.insert(format!("l{i:02}.b"), Tensor::zeros(&[width]));
                if cfg.norm.affine {
                    params.insert(format!("l{i:02}.norm.gain"), Tensor::ones(&[width]));
                    params.insert(format!("l{i:02}.norm.bias"), Tensor::zeros(&[width]));
                }
                fan_in = width;
            }
            params.insert("head.w", uniform(&[fan_in, cfg.classes], fan_in));
            params.insert("head.b", Tensor::zeros(&[cfg.classes]));
        }
        ModelKind::Convnet => {
            let (mut c_in, mut h, mut w) = cfg.image;
            let k = cfg.kernel;
            for (i, &c) in cfg.hidden.iter().enumerate() {
                let fan_in = c_in * k * k;
                params.insert(format!("l{i:02}.w"), uniform(&[c, c_in, k, k], fan_in));
                params.insert(format!("l{i:02}.b"), Tensor::zeros(&[c]));
                if cfg.norm.affine {
                    params.insert(format!("l{i:02}.norm.gain"), Tensor::ones(&[c]));
                    params.insert(format!("l{i:02}.norm.bias"), Tensor::zeros(&[c]));
                }
                c_in = c;
                h /= 2;
                w /= 2;
            }
            let flat = c_in * h * w;
            params.insert("head.w", uniform(&[flat, cfg.classes], flat));
            params.insert("head.b", Tensor::zeros(&[cfg.classes]));
        }
        ModelKind::CharLstm => {
            let hdim = cfg.hidden[0];
            let vocab = cfg.input_features;
            params.insert("cell.wx", uniform(&[vocab, 4 * hdim], vocab));
            params.insert("cell.wh", uniform(&[hdim, 4 * hdim], hdim));
            params.insert("cell.b", Tensor::zeros(&[4 * hdim]));
            if cfg.norm.affine {
                for gate in GATE_NAMES {
                    params.insert(format!("cell.norm_{gate}.gain"), Tensor::ones(&[hdim]));
                    params.insert(format!("cell.norm_{gate}.bias"), Tensor::zeros(&[hdim]));
                }
            }
            params.insert("head.w", uniform(&[hdim, cfg.classes], hdim));
            params.insert("head.b", Tensor::zeros(&[cfg.classes]));
        }
    }
    Ok(params)
}

const GATE_NAMES: [&str; 4] = ["i", "f", "g", "o"];

/// Parameter tensors staged as graph leaves, keyed like the [`ParamSet`].
#[derive(Debug, Clone)]
pub struct ParamNodes {
    ids: BTreeMap<String, NodeId>,
}

impl ParamNodes {
    /// Builds the mapping from explicit (name, node) pairs; used when the
    /// leaves are managed externally, e.g. to run finite differences over
    /// parameters.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, NodeId)>) -> Self {
        ParamNodes {
            ids: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<NodeId> {
        self.ids.get(name).copied().ok_or_else(|| Error::KeyMismatch {
            key: name.to_string(),
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, NodeId)> {
        self.ids.iter().map(|(k, &v)| (k, v))
    }
}

/// Leafs every parameter onto the graph in deterministic order.
pub fn stage_params(g: &mut Graph, params: &ParamSet) -> ParamNodes {
    let ids = params
        .iter()
        .map(|(name, tensor)| (name.clone(), g.leaf(tensor.clone())))
        .collect();
    ParamNodes { ids }
}

/// Logits plus the per-insertion-point normalizer states.
#[derive(Debug)]
pub struct ForwardResult {
    pub logits: NodeId,
    pub states: Vec<TapedNorm>,
}

fn activation(g: &mut Graph, x: NodeId, act: Activation) -> Result<NodeId> {
    match act {
        Activation::Relu => g.relu(x),
        Activation::Tanh => g.tanh(x),
    }
}

fn apply_norm(
    g: &mut Graph,
    z: NodeId,
    norm: &NormConfig,
    layout: InputLayout,
    channels: usize,
    affine: Option<(NodeId, NodeId)>,
) -> Result<TapedNorm> {
    let spec = spec_preset(&norm.preset_config(layout, channels))?;
    let (gain, bias) = match affine {
        Some((gain, bias)) => (Some(gain), Some(bias)),
        None => (None, None),
    };
    normalize_node(g, z, spec.region_a(), spec.region_b(), norm.sigma, gain, bias)
}

fn affine_nodes(
    params: &ParamNodes,
    norm: &NormConfig,
    prefix: &str,
) -> Result<Option<(NodeId, NodeId)>> {
    if !norm.affine {
        return Ok(None);
    }
    Ok(Some((
        params.get(&format!("{prefix}.gain"))?,
        params.get(&format!("{prefix}.bias"))?,
    )))
}

fn head(g: &mut Graph, h: NodeId, params: &ParamNodes) -> Result<NodeId> {
    let w = params.get("head.w")?;
    let b = params.get("head.b")?;
    let z = g.matmul(h, w)?;
    g.add(z, b)
}

/// Per layer: z = x·W + b, normalize, activation; then a linear head.
pub fn mlp_forward(
    g: &mut Graph,
    params: &ParamNodes,
    x: NodeId,
    cfg: &ModelConfig,
) -> Result<ForwardResult> {
    let shape = g.value(x).shape().to_vec();
    if shape.len() != 2 || shape[1] != cfg.input_features {
        return Err(Error::ShapeMismatch {
            op: "mlp input",
            lhs: shape,
            rhs: vec![0, cfg.input_features],
        });
    }
    let mut h = x;
    let mut states = Vec::with_capacity(cfg.hidden.len());
    for (i, &width) in cfg.hidden.iter().enumerate() {
        let layer = format!("l{i:02}");
        let result = (|| {
            let w = params.get(&format!("{layer}.w"))?;
            let b = params.get(&format!("{layer}.b"))?;
            let z = g.matmul(h, w)?;
            let z = g.add(z, b)?;
            let affine = affine_nodes(params, &cfg.norm, &format!("{layer}.norm"))?;
            let taped = apply_norm(g, z, &cfg.norm, InputLayout::Features, width, affine)?;
            let out = activation(g, taped.out, cfg.activation)?;
            Ok::<_, Error>((taped, out))
        })()
        .map_err(|e| e.with_context(format!("mlp layer {i}")))?;
        states.push(result.0);
        h = result.1;
    }
    let logits = head(g, h, params)?;
    Ok(ForwardResult { logits, states })
}

/// Conv → normalize → activation → 2×2 mean-pool stacks, then flatten into a
/// linear head.
pub fn convnet_forward(
    g: &mut Graph,
    params: &ParamNodes,
    x: NodeId,
    cfg: &ModelConfig,
) -> Result<ForwardResult> {
    let shape = g.value(x).shape().to_vec();
    let (c0, h0, w0) = cfg.image;
    if shape.len() != 4 || shape[1] != c0 || shape[2] != h0 || shape[3] != w0 {
        return Err(Error::ShapeMismatch {
            op: "convnet input",
            lhs: shape,
            rhs: vec![0, c0, h0, w0],
        });
    }
    let n = shape[0];
    let pad = cfg.kernel / 2;
    let mut h = x;
    let (mut c_in, mut hh, mut ww) = cfg.image;
    let mut states = Vec::with_capacity(cfg.hidden.len());
    for (i, &c) in cfg.hidden.iter().enumerate() {
        let layer = format!("l{i:02}");
        let result = (|| {
            let w = params.get(&format!("{layer}.w"))?;
            let b = params.get(&format!("{layer}.b"))?;
            let z = g.conv2d(h, w, pad, 1)?;
            let b = g.reshape(b, &[c, 1, 1])?;
            let z = g.add(z, b)?;
            let affine = affine_nodes(params, &cfg.norm, &format!("{layer}.norm"))?;
            let taped = apply_norm(g, z, &cfg.norm, InputLayout::Image, c, affine)?;
            let a = activation(g, taped.out, cfg.activation)?;
            let pooled = g.mean_pool2(a)?;
            Ok::<_, Error>((taped, pooled))
        })()
        .map_err(|e| e.with_context(format!("conv stack {i}")))?;
        states.push(result.0);
        h = result.1;
        c_in = c;
        hh /= 2;
        ww /= 2;
    }
    let flat = g.reshape(h, &[n, c_in * hh * ww])?;
    let logits = head(g, flat, params)?;
    Ok(ForwardResult { logits, states })
}

/// One LSTM step output.
#[derive(Debug)]
pub struct LstmStep {
    pub h: NodeId,
    pub c: NodeId,
    pub states: Vec<TapedNorm>,
}

/// Gate pre-activations z = x_t·W_x + h_prev·W_h + b, normalized per gate
/// block (statistics within each block, per timestep), then standard gating:
/// i, f, o sigmoid, g tanh, c = f⊙c_prev + i⊙g, h = o⊙tanh(c).
pub fn lstm_cell_forward(
    g: &mut Graph,
    params: &ParamNodes,
    x_t: NodeId,
    h_prev: NodeId,
    c_prev: NodeId,
    cfg: &ModelConfig,
) -> Result<LstmStep> {
    let hdim = cfg.hidden[0];
    let wx = params.get("cell.wx")?;
    let wh = params.get("cell.wh")?;
    let b = params.get("cell.b")?;
    let zx = g.matmul(x_t, wx)?;
    let zh = g.matmul(h_prev, wh)?;
    let z = g.add(zx, zh)?;
    let z = g.add(z, b)?;

    let mut norm_out = Vec::with_capacity(4);
    let mut states = Vec::with_capacity(4);
    for (gi, gate) in GATE_NAMES.iter().enumerate() {
        let block = g.slice_cols(z, gi * hdim, hdim)?;
        let affine = affine_nodes(params, &cfg.norm, &format!("cell.norm_{gate}"))?;
        let taped = apply_norm(g, block, &cfg.norm, InputLayout::Features, hdim, affine)
            .map_err(|e| e.with_context(format!("lstm gate {gate}")))?;
        norm_out.push(taped.out);
        states.push(taped);
    }

    let i = g.sigmoid(norm_out[0])?;
    let f = g.sigmoid(norm_out[1])?;
    let cand = g.tanh(norm_out[2])?;
    let o = g.sigmoid(norm_out[3])?;
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let ct = g.tanh(c)?;
    let h = g.mul(o, ct)?;
    Ok(LstmStep { h, c, states })
}

/// Dispatch for the feed-forward kinds; the char-LSTM unrolls its cell in
/// the training loop instead.
pub fn model_forward(
    g: &mut Graph,
    params: &ParamNodes,
    x: NodeId,
    cfg: &ModelConfig,
) -> Result<ForwardResult> {
    match cfg.kind {
        ModelKind::Mlp => mlp_forward(g, params, x, cfg),
        ModelKind::Convnet => convnet_forward(g, params, x, cfg),
        ModelKind::CharLstm => Err(Error::InvalidArgument {
            what: "char-lstm forward requires unrolling; use lstm_cell_forward".into(),
        }),
    }
}

/// Value-level forward: builds a private graph and returns logits plus the
/// materialized normalizer states.
pub fn forward_values(
    params: &ParamSet,
    x: &Tensor,
    cfg: &ModelConfig,
) -> Result<(Tensor, Vec<NormState>)> {
    let mut g = Graph::new();
    let nodes = stage_params(&mut g, params);
    let xid = g.leaf(x.clone());
    let result = model_forward(&mut g, &nodes, xid, cfg)?;
    let logits = g.value(result.logits).clone();
    let states = result.states.iter().map(|s| s.state(&g)).collect();
    Ok((logits, states))
}
