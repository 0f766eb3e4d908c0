//! The parameterized two-step normalizer.
//!
//! One operator covers batch, layer, and divisive normalization: a
//! subtractive step centers each pre-activation against the mean over its
//! range-A accumulation set, and a divisive step rescales by the smoothed
//! root second moment over range B,
//!
//!   v_j = z_j − mean over A_j of z,
//!   y_j = v_j / (σ² + mean over B_j of v²)^½,
//!
//! optionally followed by a per-channel affine output γ⊙y + β. The presets
//! differ only in how A and B are chosen; the smoothing constant σ trades
//! full normalization (σ→0) against a plain rescaling (σ→∞).
//!
//! Gradients come in two independent routes: the closed-form backward in
//! [`normalize_backward`] and the tape composition built by
//! [`normalize_node`]. Both are exact and are held to agree with each other
//! and with finite differences (see [`verify`]).

pub mod verify;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::region::{region_count, region_mean, region_sum, ChannelSpan, NormRegion, SpaceSpan};
use crate::tensor::{BinaryOp, Tensor, UnaryOp};

/// Per-channel affine output parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub gain: Tensor,
    pub bias: Tensor,
}

/// A full normalizer configuration: subtractive range A (absent to skip
/// centering), divisive range B, smoothing constant σ, optional affine
/// output, and the L1 weight λ consumed by training.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerSpec {
    region_a: Option<NormRegion>,
    region_b: NormRegion,
    sigma: f64,
    lambda_l1: f64,
    affine: Option<Affine>,
}

impl NormalizerSpec {
    /// Builds a spec with σ > 0. A zero σ can yield a zero denominator and
    /// must be acknowledged explicitly via [`NormalizerSpec::with_sigma_zero`].
    pub fn new(region_a: Option<NormRegion>, region_b: NormRegion, sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidArgument {
                what: format!("sigma must be finite and >= 0, got {sigma}"),
            });
        }
        if sigma == 0.0 {
            return Err(Error::InvalidArgument {
                what: "sigma = 0 can produce a zero denominator; construct with \
                       with_sigma_zero to acknowledge"
                    .into(),
            });
        }
        Ok(NormalizerSpec {
            region_a,
            region_b,
            sigma,
            lambda_l1: 0.0,
            affine: None,
        })
    }

    /// Builds a spec with σ = 0 (acknowledged unsmoothed denominator).
    pub fn with_sigma_zero(region_a: Option<NormRegion>, region_b: NormRegion) -> Self {
        NormalizerSpec {
            region_a,
            region_b,
            sigma: 0.0,
            lambda_l1: 0.0,
            affine: None,
        }
    }

    /// Attaches per-channel affine parameters; gain and bias extents must
    /// agree.
    pub fn with_affine(mut self, gain: Tensor, bias: Tensor) -> Result<Self> {
        if gain.rank() != 1 || gain.shape() != bias.shape() {
            return Err(Error::ShapeMismatch {
                op: "affine parameters",
                lhs: gain.shape().to_vec(),
                rhs: bias.shape().to_vec(),
            });
        }
        self.affine = Some(Affine { gain, bias });
        Ok(self)
    }

    /// Sets the L1 activation-penalty weight λ ≥ 0.
    pub fn with_lambda(mut self, lambda_l1: f64) -> Result<Self> {
        if !lambda_l1.is_finite() || lambda_l1 < 0.0 {
            return Err(Error::InvalidArgument {
                what: format!("lambda_l1 must be finite and >= 0, got {lambda_l1}"),
            });
        }
        self.lambda_l1 = lambda_l1;
        Ok(self)
    }

    pub fn region_a(&self) -> Option<&NormRegion> {
        self.region_a.as_ref()
    }

    pub fn region_b(&self) -> &NormRegion {
        &self.region_b
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda_l1(&self) -> f64 {
        self.lambda_l1
    }

    pub fn affine(&self) -> Option<&Affine> {
        self.affine.as_ref()
    }
}

/// Forward state retained for the L1 penalty and the closed-form backward.
#[derive(Debug, Clone, PartialEq)]
pub struct NormState {
    /// Centered activations v.
    pub v: Tensor,
    /// Per-position divisor (σ² + mean over B of v²)^½.
    pub denom: Tensor,
}

/// Subtractive step: v_j = z_j − mean over A_j; identity when no range A is
/// given.
pub fn center(z: &Tensor, region_a: Option<&NormRegion>) -> Result<Tensor> {
    match region_a {
        Some(region) => {
            let mean = region_mean(z, region)?;
            z.binary(BinaryOp::Sub, &mean)
        }
        None => Ok(z.clone()),
    }
}

/// Divisive step: y_j = v_j / (σ² + mean over B_j of v²)^½.
///
/// With σ = 0 every accumulation window must contain a nonzero value, else
/// the denominator vanishes and a [`Error::ZeroDenominator`] is returned.
pub fn divisive(v: &Tensor, region_b: &NormRegion, sigma: f64) -> Result<(Tensor, NormState)> {
    let denom = divisor(v, region_b, sigma)?;
    let y = v.binary(BinaryOp::Div, &denom)?;
    Ok((
        y,
        NormState {
            v: v.clone(),
            denom,
        },
    ))
}

fn divisor(v: &Tensor, region_b: &NormRegion, sigma: f64) -> Result<Tensor> {
    let sq = v.unary(UnaryOp::Square)?;
    let m2 = region_mean(&sq, region_b)?;
    let denom = m2.shift(sigma * sigma)?.unary(UnaryOp::Sqrt)?;
    if sigma == 0.0 && denom.data().contains(&0.0) {
        return Err(Error::ZeroDenominator);
    }
    Ok(denom)
}

/// Full pipeline: center, divide, optional affine output. Returns the output
/// and the retained state (v for the L1 penalty, denom for backward).
pub fn normalize_forward(z: &Tensor, spec: &NormalizerSpec) -> Result<(Tensor, NormState)> {
    spec.region_b.validate_for(z.shape())?;
    if let Some(a) = &spec.region_a {
        a.validate_for(z.shape())?;
    }
    let v = center(z, spec.region_a.as_ref())?;
    let (y, state) = divisive(&v, &spec.region_b, spec.sigma)?;
    let out = match &spec.affine {
        Some(aff) => {
            let gain = reshape_per_channel(&aff.gain, z.shape())?;
            let bias = reshape_per_channel(&aff.bias, z.shape())?;
            y.binary(BinaryOp::Mul, &gain)?.binary(BinaryOp::Add, &bias)?
        }
        None => y,
    };
    Ok((out, state))
}

/// Closed-form gradients of the full pipeline.
///
/// For the divisive step, ∂y_j/∂v_k = δ_jk/denom_j − v_j·v_k/(|B_j|·denom_j³)
/// for k ∈ B_j; membership symmetry folds the k-sum into one region_sum.
/// Composition with the centering Jacobian (δ_jk − 1/|A_j| for k ∈ A_j)
/// yields dz. Returns (dz, dgain, dbias); the affine gradients are present
/// only when the spec carries affine parameters.
pub fn normalize_backward(
    state: &NormState,
    spec: &NormalizerSpec,
    upstream: &Tensor,
) -> Result<(Tensor, Option<Tensor>, Option<Tensor>)> {
    if upstream.shape() != state.v.shape() || state.denom.shape() != state.v.shape() {
        return Err(Error::SpecMismatch {
            reason: format!(
                "upstream {:?} vs state {:?}/{:?}",
                upstream.shape(),
                state.v.shape(),
                state.denom.shape()
            ),
        });
    }
    spec.region_b.validate_for(state.v.shape())?;
    if let Some(a) = &spec.region_a {
        a.validate_for(state.v.shape())?;
    }

    let (up_y, dgain, dbias) = match &spec.affine {
        Some(aff) => {
            let gain = reshape_per_channel(&aff.gain, state.v.shape())?;
            let y = state.v.binary(BinaryOp::Div, &state.denom)?;
            let dgain = upstream
                .binary(BinaryOp::Mul, &y)?
                .reduce_to(gain.shape())?
                .reshaped(aff.gain.shape())?;
            let dbias = upstream
                .reduce_to(gain.shape())?
                .reshaped(aff.bias.shape())?;
            (upstream.binary(BinaryOp::Mul, &gain)?, Some(dgain), Some(dbias))
        }
        None => (upstream.clone(), None, None),
    };

    // dv_k = up_k/denom_k − v_k · Σ_{j ∈ B_k} up_j·v_j/(|B_j|·denom_j³)
    let count_b = region_count(state.v.shape(), &spec.region_b)?;
    let denom3 = state
        .denom
        .binary(BinaryOp::Mul, &state.denom)?
        .binary(BinaryOp::Mul, &state.denom)?;
    let kernel = up_y
        .binary(BinaryOp::Mul, &state.v)?
        .binary(BinaryOp::Div, &count_b)?
        .binary(BinaryOp::Div, &denom3)?;
    let pooled = region_sum(&kernel, &spec.region_b)?;
    let dv = up_y
        .binary(BinaryOp::Div, &state.denom)?
        .binary(BinaryOp::Sub, &state.v.binary(BinaryOp::Mul, &pooled)?)?;

    // dz_k = dv_k − Σ_{j ∈ A_k} dv_j/|A_j|
    let dz = match &spec.region_a {
        Some(a) => {
            let count_a = region_count(state.v.shape(), a)?;
            let spread = region_sum(&dv.binary(BinaryOp::Div, &count_a)?, a)?;
            dv.binary(BinaryOp::Sub, &spread)?
        }
        None => dv,
    };
    Ok((dz, dgain, dbias))
}

/// Tape composition of the same pipeline: center via region_mean/sub, divide
/// via square/region_mean/shift/sqrt/div, optional affine via per-channel
/// gain and bias nodes. Records every intermediate needed downstream.
#[derive(Debug, Clone, Copy)]
pub struct TapedNorm {
    /// Pre-activation input.
    pub z: NodeId,
    /// Centered activations.
    pub v: NodeId,
    /// Smoothed divisor.
    pub denom: NodeId,
    /// Normalized output before affine.
    pub y: NodeId,
    /// Final output (equals y without affine).
    pub out: NodeId,
}

impl TapedNorm {
    /// Materializes the value-level state from the tape.
    pub fn state(&self, g: &Graph) -> NormState {
        NormState {
            v: g.value(self.v).clone(),
            denom: g.value(self.denom).clone(),
        }
    }
}

/// Builds the normalizer on a graph. `gain`/`bias` are per-channel parameter
/// nodes (shape `[C]`), present iff the affine output is wanted.
pub fn normalize_node(
    g: &mut Graph,
    z: NodeId,
    region_a: Option<&NormRegion>,
    region_b: &NormRegion,
    sigma: f64,
    gain: Option<NodeId>,
    bias: Option<NodeId>,
) -> Result<TapedNorm> {
    if gain.is_some() != bias.is_some() {
        return Err(Error::InvalidArgument {
            what: "gain and bias must be supplied together".into(),
        });
    }
    let v = match region_a {
        Some(a) => {
            let mean = g.region_mean(z, a)?;
            g.sub(z, mean)?
        }
        None => z,
    };
    let sq = g.square(v)?;
    let m2 = g.region_mean(sq, region_b)?;
    let shifted = g.shift(m2, sigma * sigma)?;
    let denom = g.sqrt(shifted)?;
    if sigma == 0.0 && g.value(denom).data().contains(&0.0) {
        return Err(Error::ZeroDenominator);
    }
    let y = g.div(v, denom)?;
    let out = match (gain, bias) {
        (Some(gain), Some(bias)) => {
            let shape = g.value(z).shape().to_vec();
            let gain = reshape_per_channel_node(g, gain, &shape)?;
            let bias = reshape_per_channel_node(g, bias, &shape)?;
            let scaled = g.mul(y, gain)?;
            g.add(scaled, bias)?
        }
        _ => y,
    };
    Ok(TapedNorm { z, v, denom, y, out })
}

/// Builds the normalizer on a graph from a standalone spec, leafing its
/// affine parameters.
pub fn normalize_node_with_spec(g: &mut Graph, z: NodeId, spec: &NormalizerSpec) -> Result<TapedNorm> {
    let (gain, bias) = match &spec.affine {
        Some(aff) => (Some(g.leaf(aff.gain.clone())), Some(g.leaf(aff.bias.clone()))),
        None => (None, None),
    };
    normalize_node(g, z, spec.region_a.as_ref(), &spec.region_b, spec.sigma, gain, bias)
}

fn per_channel_shape(param_len: usize, input_shape: &[usize]) -> Result<Vec<usize>> {
    let channels = match input_shape.len() {
        2 => input_shape[1],
        4 => input_shape[1],
        r => {
            return Err(Error::InvalidShape {
                reason: format!("affine output expects rank 2 or 4 input, got rank {r}"),
            })
        }
    };
    if param_len != channels {
        return Err(Error::ShapeMismatch {
            op: "affine parameters",
            lhs: vec![param_len],
            rhs: vec![channels],
        });
    }
    Ok(match input_shape.len() {
        2 => vec![channels],
        _ => vec![channels, 1, 1],
    })
}

fn reshape_per_channel(param: &Tensor, input_shape: &[usize]) -> Result<Tensor> {
    let shape = per_channel_shape(param.len(), input_shape)?;
    param.reshaped(&shape)
}

fn reshape_per_channel_node(g: &mut Graph, param: NodeId, input_shape: &[usize]) -> Result<NodeId> {
    let shape = per_channel_shape(g.value(param).len(), input_shape)?;
    g.reshape(param, &shape)
}

/// The named range configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    /// Per-channel statistics over batch (and space): batch normalization.
    BatchNorm,
    /// Per-example statistics over channels (and space): layer normalization.
    LayerNorm,
    /// Centered windows over channels and space within one example:
    /// divisive normalization.
    DivisiveNorm,
    /// Divisive step only (no centering).
    DivisiveNoCenter,
    /// Position-only window; y_j = v_j/(σ²+v_j²)^½, for boundary testing.
    IdentityLike,
}

impl PresetKind {
    pub const ALL: [PresetKind; 5] = [
        PresetKind::BatchNorm,
        PresetKind::LayerNorm,
        PresetKind::DivisiveNorm,
        PresetKind::DivisiveNoCenter,
        PresetKind::IdentityLike,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PresetKind::BatchNorm => "BN",
            PresetKind::LayerNorm => "LN",
            PresetKind::DivisiveNorm => "DN",
            PresetKind::DivisiveNoCenter => "DN-no-center",
            PresetKind::IdentityLike => "identity-like",
        }
    }

    pub fn parse(s: &str) -> Option<PresetKind> {
        match s {
            "BN" => Some(PresetKind::BatchNorm),
            "LN" => Some(PresetKind::LayerNorm),
            "DN" => Some(PresetKind::DivisiveNorm),
            "DN-no-center" => Some(PresetKind::DivisiveNoCenter),
            "identity-like" => Some(PresetKind::IdentityLike),
            _ => None,
        }
    }
}

/// Rank of the activations a spec will be applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputLayout {
    /// N×D activations; the channel span governs the feature axis.
    Features,
    /// N×C×H×W activations.
    Image,
}

/// Divisive-normalization window extents. `channels: None` covers the whole
/// channel axis; spatial extents apply to 4-d inputs only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DnWindow {
    pub channels: Option<usize>,
    pub height: usize,
    pub width: usize,
}

impl Default for DnWindow {
    /// All channels × 5×5 spatial, within one example.
    fn default() -> Self {
        DnWindow {
            channels: None,
            height: 5,
            width: 5,
        }
    }
}

/// Everything needed to instantiate a preset at one insertion point.
#[derive(Debug, Clone, Copy)]
pub struct PresetConfig {
    pub kind: PresetKind,
    pub layout: InputLayout,
    /// Channel (4-d) or feature (2-d) extent; sizes the affine parameters.
    pub channels: usize,
    pub dn_window: DnWindow,
    pub sigma: f64,
    pub lambda_l1: f64,
    pub affine: bool,
    /// Required to construct a spec with σ = 0.
    pub sigma_zero_ack: bool,
}

impl PresetConfig {
    pub fn new(kind: PresetKind, layout: InputLayout, channels: usize) -> Self {
        PresetConfig {
            kind,
            layout,
            channels,
            dn_window: DnWindow::default(),
            sigma: 1.0,
            lambda_l1: 0.0,
            affine: false,
            sigma_zero_ack: false,
        }
    }
}

/// Builds the normalizer spec for a named preset.
pub fn spec_preset(cfg: &PresetConfig) -> Result<NormalizerSpec> {
    if cfg.channels == 0 {
        return Err(Error::InvalidArgument {
            what: "preset channel extent must be >= 1".into(),
        });
    }
    let (region_a, region_b) = preset_regions(cfg.kind, cfg.layout, &cfg.dn_window)?;
    let mut spec = if cfg.sigma == 0.0 {
        if !cfg.sigma_zero_ack {
            return Err(Error::InvalidArgument {
                what: "sigma = 0 requires the zero-sigma acknowledgement flag".into(),
            });
        }
        NormalizerSpec::with_sigma_zero(region_a, region_b)
    } else {
        NormalizerSpec::new(region_a, region_b, cfg.sigma)?
    };
    spec = spec.with_lambda(cfg.lambda_l1)?;
    if cfg.affine {
        spec = spec.with_affine(Tensor::ones(&[cfg.channels]), Tensor::zeros(&[cfg.channels]))?;
    }
    Ok(spec)
}

fn preset_regions(
    kind: PresetKind,
    layout: InputLayout,
    dn: &DnWindow,
) -> Result<(Option<NormRegion>, NormRegion)> {
    let image = layout == InputLayout::Image;
    let space_all = if image { SpaceSpan::All } else { SpaceSpan::Excluded };
    let dn_channels = match dn.channels {
        Some(e) => ChannelSpan::Window(e),
        None => ChannelSpan::All,
    };
    let dn_space = if image {
        SpaceSpan::Window(dn.height, dn.width)
    } else {
        SpaceSpan::Excluded
    };
    let (a, b) = match kind {
        PresetKind::BatchNorm => {
            let r = NormRegion::new(true, ChannelSpan::Excluded, space_all)?;
            (Some(r), r)
        }
        PresetKind::LayerNorm => {
            let r = NormRegion::new(false, ChannelSpan::All, space_all)?;
            (Some(r), r)
        }
        PresetKind::DivisiveNorm => {
            let r = NormRegion::new(false, dn_channels, dn_space)?;
            (Some(r), r)
        }
        PresetKind::DivisiveNoCenter => {
            let r = NormRegion::new(false, dn_channels, dn_space)?;
            (None, r)
        }
        PresetKind::IdentityLike => {
            let space = if image {
                SpaceSpan::Window(1, 1)
            } else {
                SpaceSpan::Excluded
            };
            let r = NormRegion::new(false, ChannelSpan::Window(1), space)?;
            (None, r)
        }
    };
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::resolve_region;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    fn batch_region() -> NormRegion {
        NormRegion::new(true, ChannelSpan::Excluded, SpaceSpan::Excluded).unwrap()
    }

    #[test]
    fn center_subtracts_full_axis_mean() {
        let z = t(&[1, 3], &[1.0, 2.0, 3.0]);
        let region = NormRegion::new(false, ChannelSpan::All, SpaceSpan::Excluded).unwrap();
        let v = center(&z, Some(&region)).unwrap();
        assert_eq!(v.data(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn center_of_constant_is_zero() {
        let z = Tensor::full(&[3, 4], 2.75).unwrap();
        let region = batch_region();
        let v = center(&z, Some(&region)).unwrap();
        assert!(v.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn center_without_region_is_identity() {
        let z = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(center(&z, None).unwrap().data(), z.data());
    }

    #[test]
    fn centering_is_shift_invariant_over_global_range() {
        let z = t(&[1, 4], &[0.3, -1.2, 2.0, 0.7]);
        let region = NormRegion::new(false, ChannelSpan::All, SpaceSpan::Excluded).unwrap();
        let shifted = z.shift(5.5).unwrap();
        let a = center(&z, Some(&region)).unwrap();
        let b = center(&shifted, Some(&region)).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn divisive_direct_values() {
        // both elements pooled: denom = ((9+16)/2)^½ = 3.535534
        let v = t(&[2, 1], &[3.0, 4.0]);
        let (y, state) = divisive(&v, &batch_region(), 0.0).unwrap();
        assert!((state.denom.data()[0] - 3.535534).abs() < 1e-6);
        assert!((y.data()[0] - 0.848528).abs() < 1e-6);
        assert!((y.data()[1] - 1.131371).abs() < 1e-6);
    }

    #[test]
    fn divisive_zero_numerator() {
        let v = Tensor::zeros(&[2, 3]);
        let (y, state) = divisive(&v, &batch_region(), 1.0).unwrap();
        assert!(y.data().iter().all(|&x| x == 0.0));
        assert!(state.denom.data().iter().all(|&d| d == 1.0));
    }

    #[test]
    fn divisive_large_sigma_approaches_plain_rescaling() {
        let v = t(&[2, 1], &[1.0, -1.0]);
        let (y, _) = divisive(&v, &batch_region(), 1000.0).unwrap();
        assert!((y.data()[0] - 1.0 / 1000.0).abs() < 1e-6);
        assert!((y.data()[1] + 1.0 / 1000.0).abs() < 1e-6);
    }

    #[test]
    fn divisive_zero_sigma_over_zero_window_fails() {
        let v = Tensor::zeros(&[2, 1]);
        assert!(matches!(
            divisive(&v, &batch_region(), 0.0),
            Err(Error::ZeroDenominator)
        ));
    }

    #[test]
    fn forward_bn_two_example_batch() {
        let mut cfg = PresetConfig::new(PresetKind::BatchNorm, InputLayout::Features, 1);
        cfg.sigma = 0.0;
        cfg.sigma_zero_ack = true;
        let spec = spec_preset(&cfg).unwrap();
        let z = t(&[2, 1], &[1.0, 3.0]);
        let (out, state) = normalize_forward(&z, &spec).unwrap();
        assert_eq!(state.v.data(), &[-1.0, 1.0]);
        assert_eq!(state.denom.data(), &[1.0, 1.0]);
        assert_eq!(out.data(), &[-1.0, 1.0]);
    }

    #[test]
    fn identity_affine_matches_plain_output() {
        let mut cfg = PresetConfig::new(PresetKind::LayerNorm, InputLayout::Features, 4);
        cfg.sigma = 0.5;
        let plain = spec_preset(&cfg).unwrap();
        cfg.affine = true;
        let affine = spec_preset(&cfg).unwrap();
        let z = t(&[2, 4], &[0.1, -0.4, 2.0, 1.0, -3.0, 0.5, 0.25, -1.0]);
        let (a, _) = normalize_forward(&z, &plain).unwrap();
        let (b, _) = normalize_forward(&z, &affine).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn full_coverage_dn_equals_ln_bitwise() {
        let shape = [2, 3, 4, 4];
        let mut data = Vec::new();
        for i in 0..96 {
            data.push(((i * 37 % 17) as f64 - 8.0) * 0.21);
        }
        let z = t(&shape, &data);
        let mut ln = PresetConfig::new(PresetKind::LayerNorm, InputLayout::Image, 3);
        ln.sigma = 0.7;
        let mut dn = PresetConfig::new(PresetKind::DivisiveNorm, InputLayout::Image, 3);
        dn.sigma = 0.7;
        dn.dn_window = DnWindow {
            channels: Some(2 * shape[1] - 1),
            height: 2 * shape[2] - 1,
            width: 2 * shape[3] - 1,
        };
        let (ln_out, _) = normalize_forward(&z, &spec_preset(&ln).unwrap()).unwrap();
        let (dn_out, _) = normalize_forward(&z, &spec_preset(&dn).unwrap()).unwrap();
        assert_eq!(ln_out.data(), dn_out.data());
    }

    #[test]
    fn preset_regions_match_their_ranges() {
        let bn = spec_preset(&PresetConfig::new(
            PresetKind::BatchNorm,
            InputLayout::Image,
            4,
        ))
        .unwrap();
        // batch axis pooled, channel axis not
        let set = resolve_region(bn.region_b(), &[3, 4, 2, 2], &[0, 1, 0, 0]).unwrap();
        assert_eq!(set.len(), 3 * 2 * 2);
        assert!(set.iter().all(|idx| idx[1] == 1));

        let ln = spec_preset(&PresetConfig::new(
            PresetKind::LayerNorm,
            InputLayout::Features,
            5,
        ))
        .unwrap();
        // per-row statistics over all D features
        let set = resolve_region(ln.region_b(), &[3, 5], &[1, 0]).unwrap();
        assert_eq!(set.len(), 5);
        assert!(set.iter().all(|idx| idx[0] == 1));

        let ident = spec_preset(&PresetConfig::new(
            PresetKind::IdentityLike,
            InputLayout::Image,
            4,
        ))
        .unwrap();
        assert!(ident.region_a().is_none());
        let set = resolve_region(ident.region_b(), &[2, 4, 3, 3], &[1, 2, 1, 1]).unwrap();
        assert_eq!(set, vec![vec![1, 2, 1, 1]]);

        // DN windows that cover every channel and all of space resolve to
        // exactly LN's accumulation sets
        let shape = [2usize, 3, 4, 4];
        let ln_img = spec_preset(&PresetConfig::new(
            PresetKind::LayerNorm,
            InputLayout::Image,
            3,
        ))
        .unwrap();
        let mut dn_cfg = PresetConfig::new(PresetKind::DivisiveNorm, InputLayout::Image, 3);
        dn_cfg.dn_window = DnWindow {
            channels: None,
            height: 2 * shape[2] - 1,
            width: 2 * shape[3] - 1,
        };
        let dn_full = spec_preset(&dn_cfg).unwrap();
        for j in [[0usize, 0, 0, 0], [1, 2, 3, 1], [0, 1, 2, 3]] {
            let ln_set = resolve_region(ln_img.region_b(), &shape, &j).unwrap();
            let dn_set = resolve_region(dn_full.region_b(), &shape, &j).unwrap();
            assert_eq!(ln_set, dn_set);
        }
    }

    #[test]
    fn sigma_zero_requires_acknowledgement() {
        let mut cfg = PresetConfig::new(PresetKind::BatchNorm, InputLayout::Features, 2);
        cfg.sigma = 0.0;
        assert!(matches!(
            spec_preset(&cfg),
            Err(Error::InvalidArgument { .. })
        ));
        cfg.sigma_zero_ack = true;
        assert!(spec_preset(&cfg).is_ok());
        assert!(NormalizerSpec::new(None, batch_region(), -1.0).is_err());
    }

    #[test]
    fn even_dn_window_is_rejected() {
        let mut cfg = PresetConfig::new(PresetKind::DivisiveNorm, InputLayout::Image, 4);
        cfg.dn_window = DnWindow {
            channels: Some(2),
            height: 5,
            width: 5,
        };
        assert!(matches!(spec_preset(&cfg), Err(Error::InvalidRegion { .. })));
    }

    #[test]
    fn backward_of_zero_upstream_is_zero() {
        let mut cfg = PresetConfig::new(PresetKind::BatchNorm, InputLayout::Features, 3);
        cfg.sigma = 0.5;
        cfg.affine = true;
        let spec = spec_preset(&cfg).unwrap();
        let z = t(&[4, 3], &[0.3, 1.2, -0.7, 0.9, -1.1, 0.2, 2.0, 0.4, -0.6, -1.4, 0.8, 1.5]);
        let (_, state) = normalize_forward(&z, &spec).unwrap();
        let upstream = Tensor::zeros(&[4, 3]);
        let (dz, dgain, dbias) = normalize_backward(&state, &spec, &upstream).unwrap();
        assert!(dz.data().iter().all(|&x| x == 0.0));
        assert!(dgain.unwrap().data().iter().all(|&x| x == 0.0));
        assert!(dbias.unwrap().data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn backward_shape_mismatch_is_spec_mismatch() {
        let mut cfg = PresetConfig::new(PresetKind::BatchNorm, InputLayout::Features, 3);
        cfg.sigma = 0.5;
        let spec = spec_preset(&cfg).unwrap();
        let z = t(&[2, 3], &[0.3, 1.2, -0.7, 0.9, -1.1, 0.2]);
        let (_, state) = normalize_forward(&z, &spec).unwrap();
        let upstream = Tensor::zeros(&[3, 3]);
        assert!(matches!(
            normalize_backward(&state, &spec, &upstream),
            Err(Error::SpecMismatch { .. })
        ));
    }
}
