//! Experiment configuration: strict JSON parsing (unknown keys rejected so a
//! typo like "sgima" cannot silently corrupt an ablation), documented
//! defaults, and resolution into the core model/train types.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use normkit_core::models::{Activation, ModelConfig, ModelKind, NormConfig};
use normkit_core::norm::{DnWindow, PresetKind};
use normkit_core::train::data::{BlobsSpec, DataRequest, DatasetHandle, DatasetKind};
use normkit_core::train::{L1Target, TrainConfig};
use normkit_core::train::optim::OptimizerKind;

use crate::runner::RunError;

/// Conventions every emitted artifact declares, so results are never
/// ambiguous about where σ enters, what the L1 penalty touches, or whether
/// region statistics are means or sums.
#[derive(Debug, Clone, Serialize)]
pub struct Conventions {
    pub sigma_placement: &'static str,
    pub l1_target: String,
    pub region_statistic: &'static str,
}

pub const SIGMA_PLACEMENT: &str = "sigma_squared_inside_sqrt";
pub const REGION_STATISTIC: &str = "mean_over_inbounds_count";

impl Conventions {
    pub fn line(&self) -> String {
        format!(
            "sigma_placement={}; l1_target={}; region_statistic={}",
            self.sigma_placement, self.l1_target, self.region_statistic
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub norm: NormSection,
    pub train: TrainSection,
    pub data: DataSection,
    pub output_dir: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// "mlp" | "convnet" | "charlstm"
    pub kind: String,
    /// Hidden widths (mlp), channel counts (convnet), or one LSTM width.
    pub hidden: Vec<usize>,
    /// "relu" | "tanh"
    pub activation: String,
    /// Defaults from the dataset (blobs classes, 10 for mnist, corpus vocab).
    pub classes: Option<usize>,
    /// Convnet kernel extent, odd.
    pub kernel: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: "mlp".into(),
            hidden: vec![32],
            activation: "relu".into(),
            classes: None,
            kernel: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormSection {
    /// "BN" | "LN" | "DN" | "DN-no-center" | "identity-like"
    pub preset: String,
    /// Overrides train.sigma when set.
    pub sigma: Option<f64>,
    /// Overrides train.lambda_l1 when set.
    pub lambda_l1: Option<f64>,
    /// [channel extent, height, width]; 0 means full coverage of that axis.
    pub dn_window: [usize; 3],
    pub affine: bool,
    /// Must be set to run with sigma = 0.
    pub sigma_zero_ack: bool,
    /// "v" | "y" | "z" — which activation the L1 penalty touches.
    pub l1_target: String,
}

impl Default for NormSection {
    fn default() -> Self {
        NormSection {
            preset: "BN".into(),
            sigma: None,
            lambda_l1: None,
            dn_window: [0, 5, 5],
            affine: true,
            sigma_zero_ack: false,
            l1_target: "v".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    /// "sgd" | "adam"
    pub optimizer: String,
    pub lr: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub lambda_l1: f64,
    pub sigma: f64,
    /// "blobs" | "mnist-subset" | "tiny-chars"
    pub dataset: String,
    /// Char-LSTM unroll length.
    pub seq_len: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            optimizer: "sgd".into(),
            lr: 0.1,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 32,
            epochs: 5,
            seed: 7,
            lambda_l1: 0.0,
            sigma: 1.0,
            dataset: "blobs".into(),
            seq_len: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub blobs_examples: usize,
    pub blobs_features: usize,
    pub blobs_classes: usize,
    pub blobs_spread: f64,
    pub blobs_center_scale: f64,
    pub mnist_images: Option<String>,
    pub mnist_labels: Option<String>,
    pub mnist_count: usize,
    pub corpus: Option<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            blobs_examples: 600,
            blobs_features: 16,
            blobs_classes: 4,
            blobs_spread: 0.15,
            blobs_center_scale: 2.0,
            mnist_images: None,
            mnist_labels: None,
            mnist_count: 1000,
            corpus: None,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelSection::default(),
            norm: NormSection::default(),
            train: TrainSection::default(),
            data: DataSection::default(),
            output_dir: "normkit-out".into(),
        }
    }
}

/// Parses a JSON document; defaults fill absent keys, unknown keys and
/// malformed values are rejected with their location.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, RunError> {
    serde_json::from_str(text).map_err(|e| {
        RunError::Config(format!(
            "config parse error at line {}, column {}: {e}",
            e.line(),
            e.column()
        ))
    })
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> RunError {
    RunError::Config(format!("invalid value for {field}: {reason}"))
}

/// Everything derived from the config that does not need the dataset yet.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model_kind: ModelKind,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub kernel: usize,
    pub classes_override: Option<usize>,
    pub norm: NormConfig,
    pub train: TrainConfig,
    pub request: DataRequest,
    pub output_dir: PathBuf,
    pub conventions: Conventions,
}

/// Validates the parsed config and resolves the effective σ/λ and dataset
/// request. Field names in errors match the JSON keys.
pub fn resolve(cfg: &ExperimentConfig) -> Result<Resolved, RunError> {
    let model_kind = match cfg.model.kind.as_str() {
        "mlp" => ModelKind::Mlp,
        "convnet" => ModelKind::Convnet,
        "charlstm" => ModelKind::CharLstm,
        other => return Err(invalid("model.kind", format!("unknown kind {other:?}"))),
    };
    let activation = match cfg.model.activation.as_str() {
        "relu" => Activation::Relu,
        "tanh" => Activation::Tanh,
        other => {
            return Err(invalid(
                "model.activation",
                format!("unknown activation {other:?}"),
            ))
        }
    };
    let preset = PresetKind::parse(&cfg.norm.preset)
        .ok_or_else(|| invalid("norm.preset", format!("unknown preset {:?}", cfg.norm.preset)))?;
    let l1_target = L1Target::parse(&cfg.norm.l1_target)
        .ok_or_else(|| invalid("norm.l1_target", format!("expected v|y|z, got {:?}", cfg.norm.l1_target)))?;
    let optimizer = match cfg.train.optimizer.as_str() {
        "sgd" => OptimizerKind::Sgd,
        "adam" => OptimizerKind::Adam,
        other => {
            return Err(invalid(
                "train.optimizer",
                format!("unknown optimizer {other:?}"),
            ))
        }
    };
    let dataset = DatasetKind::parse(&cfg.train.dataset).ok_or_else(|| {
        invalid("train.dataset", format!("unknown dataset {:?}", cfg.train.dataset))
    })?;

    let sigma = cfg.norm.sigma.unwrap_or(cfg.train.sigma);
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(invalid("train.sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 && !cfg.norm.sigma_zero_ack {
        return Err(invalid(
            "train.sigma",
            "sigma = 0 can produce a zero denominator; set norm.sigma_zero_ack",
        ));
    }
    let lambda = cfg.norm.lambda_l1.unwrap_or(cfg.train.lambda_l1);
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(invalid("train.lambda_l1", format!("must be finite and >= 0, got {lambda}")));
    }
    if !cfg.train.lr.is_finite() || cfg.train.lr < 0.0 {
        return Err(invalid("train.lr", format!("must be finite and >= 0, got {}", cfg.train.lr)));
    }
    if cfg.train.batch_size == 0 {
        return Err(invalid("train.batch_size", "must be >= 1"));
    }
    if cfg.train.epochs == 0 {
        return Err(invalid("train.epochs", "must be >= 1"));
    }
    if cfg.train.seq_len == 0 {
        return Err(invalid("train.seq_len", "must be >= 1"));
    }
    if cfg.model.hidden.is_empty() {
        return Err(invalid("model.hidden", "at least one hidden layer"));
    }
    if cfg.model.kernel.is_multiple_of(2) {
        return Err(invalid("model.kernel", "kernel extent must be odd"));
    }
    for (i, &e) in cfg.norm.dn_window.iter().enumerate() {
        if e != 0 && e % 2 == 0 {
            return Err(invalid(
                "norm.dn_window",
                format!("entry {i} must be odd or 0 (full coverage), got {e}"),
            ));
        }
    }
    if let Some(c) = cfg.model.classes {
        if c < 2 {
            return Err(invalid("model.classes", "class count must be >= 2"));
        }
    }

    let request = match dataset {
        DatasetKind::Blobs => {
            if model_kind != ModelKind::Mlp {
                return Err(invalid(
                    "train.dataset",
                    "blobs produce 2-d features; use model.kind = \"mlp\"",
                ));
            }
            if let Some(c) = cfg.model.classes {
                if c != cfg.data.blobs_classes {
                    return Err(invalid(
                        "model.classes",
                        format!("must match data.blobs_classes = {}", cfg.data.blobs_classes),
                    ));
                }
            }
            DataRequest::Blobs(BlobsSpec {
                examples: cfg.data.blobs_examples,
                features: cfg.data.blobs_features,
                classes: cfg.data.blobs_classes,
                spread: cfg.data.blobs_spread,
                center_scale: cfg.data.blobs_center_scale,
            })
        }
        DatasetKind::MnistSubset => {
            if model_kind == ModelKind::CharLstm {
                return Err(invalid("train.dataset", "mnist-subset cannot feed a charlstm"));
            }
            let images = cfg
                .data
                .mnist_images
                .as_ref()
                .ok_or_else(|| invalid("data.mnist_images", "required for mnist-subset"))?;
            let labels = cfg
                .data
                .mnist_labels
                .as_ref()
                .ok_or_else(|| invalid("data.mnist_labels", "required for mnist-subset"))?;
            DataRequest::MnistSubset {
                images: PathBuf::from(images),
                labels: PathBuf::from(labels),
                count: cfg.data.mnist_count,
            }
        }
        DatasetKind::TinyChars => {
            if model_kind != ModelKind::CharLstm {
                return Err(invalid(
                    "train.dataset",
                    "tiny-chars requires model.kind = \"charlstm\"",
                ));
            }
            let path = cfg
                .data
                .corpus
                .as_ref()
                .ok_or_else(|| invalid("data.corpus", "required for tiny-chars"))?;
            DataRequest::TinyChars {
                path: PathBuf::from(path),
            }
        }
    };

    let norm = NormConfig {
        preset,
        sigma,
        lambda_l1: lambda,
        affine: cfg.norm.affine,
        dn_window: DnWindow {
            channels: match cfg.norm.dn_window[0] {
                0 => None,
                e => Some(e),
            },
            height: cfg.norm.dn_window[1].max(1),
            width: cfg.norm.dn_window[2].max(1),
        },
        sigma_zero_ack: cfg.norm.sigma_zero_ack,
    };
    let mut train = TrainConfig::new(dataset);
    train.optimizer = optimizer;
    train.lr = cfg.train.lr;
    train.momentum = cfg.train.momentum;
    train.beta1 = cfg.train.beta1;
    train.beta2 = cfg.train.beta2;
    train.eps = cfg.train.eps;
    train.batch_size = cfg.train.batch_size;
    train.epochs = cfg.train.epochs;
    train.seed = cfg.train.seed;
    train.lambda_l1 = lambda;
    train.l1_target = l1_target;
    train.sigma = sigma;
    train.seq_len = cfg.train.seq_len;

    Ok(Resolved {
        model_kind,
        hidden: cfg.model.hidden.clone(),
        activation,
        kernel: cfg.model.kernel,
        classes_override: cfg.model.classes,
        norm,
        train,
        request,
        output_dir: PathBuf::from(&cfg.output_dir),
        conventions: Conventions {
            sigma_placement: SIGMA_PLACEMENT,
            l1_target: cfg.norm.l1_target.clone(),
            region_statistic: REGION_STATISTIC,
        },
    })
}

/// Completes the model config once the dataset shape is known.
pub fn model_for(resolved: &Resolved, handle: &DatasetHandle) -> Result<ModelConfig, RunError> {
    let classes = match handle.kind {
        DatasetKind::TinyChars => handle.classes,
        _ => resolved.classes_override.unwrap_or(handle.classes),
    };
    if classes != handle.classes {
        return Err(RunError::Config(format!(
            "model.classes = {classes} but the dataset provides {}",
            handle.classes
        )));
    }
    let (input_features, image) = match (resolved.model_kind, handle.feature_shape.as_slice()) {
        (ModelKind::Mlp, [d]) => (*d, (1, 1, 1)),
        (ModelKind::Mlp, [c, h, w]) => (c * h * w, (1, 1, 1)),
        (ModelKind::Convnet, [c, h, w]) => (0, (*c, *h, *w)),
        (ModelKind::CharLstm, [v]) => (*v, (1, 1, 1)),
        (kind, shape) => {
            return Err(RunError::Config(format!(
                "model kind {kind:?} cannot consume feature shape {shape:?}"
            )))
        }
    };
    let cfg = ModelConfig {
        kind: resolved.model_kind,
        input_features,
        image,
        hidden: resolved.hidden.clone(),
        kernel: resolved.kernel,
        classes,
        activation: resolved.activation,
        norm: resolved.norm,
    };
    cfg.validate()
        .map_err(|e| RunError::Config(format!("model configuration: {e}")))?;
    Ok(cfg)
}
