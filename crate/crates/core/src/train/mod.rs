//! Train/eval loops producing per-step telemetry.
//!
//! One training run is a single logical thread; each batch rebuilds the tape
//! (forward → cross-entropy + L1 penalty → backward → optimizer step) and
//! yields one [`MetricsRecord`]. A non-finite loss aborts the run with the
//! step at which it surfaced rather than clamping.

pub mod data;
pub mod loss;
pub mod optim;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::models::{
    init_params, lstm_cell_forward, model_forward, stage_params, ModelConfig, ModelKind, ParamSet,
};
use crate::norm::TapedNorm;
use crate::tensor::Tensor;
use data::{gather_batch, Dataset, DatasetKind};
use loss::{l1_penalty_node, total_objective};
use optim::{Optimizer, OptimizerKind};

/// Which activation the L1 penalty is applied to; `v` (centered, pre-divide)
/// is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum L1Target {
    V,
    Y,
    Z,
}

impl L1Target {
    pub fn name(&self) -> &'static str {
        match self {
            L1Target::V => "v",
            L1Target::Y => "y",
            L1Target::Z => "z",
        }
    }

    pub fn parse(s: &str) -> Option<L1Target> {
        match s {
            "v" => Some(L1Target::V),
            "y" => Some(L1Target::Y),
            "z" => Some(L1Target::Z),
            _ => None,
        }
    }

    fn pick(&self, state: &TapedNorm) -> NodeId {
        match self {
            L1Target::V => state.v,
            L1Target::Y => state.y,
            L1Target::Z => state.z,
        }
    }
}

/// Optimization and experiment knobs. `sigma` and `lambda_l1` are the
/// experiment-level values the front end mirrors into the model's normalizer
/// template; the training loop itself consumes `lambda_l1` (penalty weight)
/// and leaves `sigma` to the normalizers.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub lambda_l1: f64,
    pub l1_target: L1Target,
    pub sigma: f64,
    /// Unroll length for the char-LSTM.
    pub seq_len: usize,
    pub dataset: DatasetKind,
}

impl TrainConfig {
    pub fn new(dataset: DatasetKind) -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Sgd,
            lr: 0.1,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 32,
            epochs: 5,
            seed: 7,
            lambda_l1: 0.0,
            l1_target: L1Target::V,
            sigma: 1.0,
            seq_len: 16,
            dataset,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lr.is_finite() || self.lr < 0.0 {
            return Err(Error::InvalidArgument {
                what: format!("learning rate must be finite and >= 0, got {}", self.lr),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument {
                what: "batch size must be >= 1".into(),
            });
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument {
                what: "epochs must be >= 1".into(),
            });
        }
        if self.lambda_l1 < 0.0 || !self.lambda_l1.is_finite() {
            return Err(Error::InvalidArgument {
                what: format!("lambda_l1 must be finite and >= 0, got {}", self.lambda_l1),
            });
        }
        if self.seq_len == 0 {
            return Err(Error::InvalidArgument {
                what: "seq_len must be >= 1".into(),
            });
        }
        Ok(())
    }

    fn optimizer(&self) -> Result<Optimizer> {
        match self.optimizer {
            OptimizerKind::Sgd => Optimizer::sgd(self.lr, self.momentum),
            OptimizerKind::Adam => Optimizer::adam(self.lr, self.beta1, self.beta2, self.eps),
        }
    }
}

/// Metrics stream labels: per-batch training records plus end-of-epoch
/// evaluations of each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    EvalTrain,
    EvalValid,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::EvalTrain => "eval_train",
            Split::EvalValid => "eval_valid",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "eval_train" => Ok(Split::EvalTrain),
            "eval_valid" => Ok(Split::EvalValid),
            other => Err(Error::InvalidArgument {
                what: format!("unknown split {other:?}"),
            }),
        }
    }
}

/// One row of telemetry. For the char-LSTM the `accuracy` column carries the
/// per-char cross-entropy instead of a classification rate. `wall_ms` is
/// fixed at 0 so repeated runs emit byte-identical metrics; real elapsed
/// time is reported by the front end alongside the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub step: u64,
    pub epoch: u32,
    pub split: Split,
    pub loss: f64,
    pub l1_penalty: f64,
    pub accuracy: f64,
    pub mean_abs_v: f64,
    pub wall_ms: u64,
}

/// Final parameters plus the full metrics stream.
#[derive(Debug)]
pub struct TrainingRun {
    pub params: ParamSet,
    pub records: Vec<MetricsRecord>,
}

struct BatchOutcome {
    loss: f64,
    penalty: f64,
    correct: usize,
    examples: usize,
    /// Predicted units: examples for classifiers, chars for the LSTM.
    units: usize,
    sum_abs_v: f64,
    count_v: usize,
}

/// One pass over the training split in a seed-and-epoch-derived order;
/// returns the updated parameters and one record per batch.
pub fn train_epoch(
    cfg: &ModelConfig,
    tc: &TrainConfig,
    dataset: &Dataset,
    params: ParamSet,
    opt: &mut Optimizer,
    epoch: u32,
    step0: u64,
) -> Result<(ParamSet, Vec<MetricsRecord>)> {
    let mut params = params;
    let mut records = Vec::new();
    let mut step = step0;
    let mut rng =
        ChaCha8Rng::seed_from_u64(tc.seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));

    match dataset {
        Dataset::Labeled {
            features,
            labels,
            train_idx,
            ..
        } => {
            let mut order = train_idx.clone();
            order.shuffle(&mut rng);
            for chunk in order.chunks(tc.batch_size) {
                step += 1;
                let (x, targets) = gather_batch(features, labels, chunk)?;
                let outcome = classifier_step(cfg, tc, &mut params, Some(opt), &x, &targets)
                    .map_err(|e| Error::TrainAbort {
                        step,
                        source: Box::new(e),
                    })?;
                records.push(outcome.record(step, epoch, Split::Train, cfg.kind));
            }
        }
        Dataset::Chars {
            tokens, train_len, ..
        } => {
            let mut starts = char_window_starts(*train_len, tc.seq_len);
            starts.shuffle(&mut rng);
            for chunk in starts.chunks(tc.batch_size) {
                step += 1;
                let outcome = lstm_step(cfg, tc, &mut params, Some(opt), tokens, chunk)
                    .map_err(|e| Error::TrainAbort {
                        step,
                        source: Box::new(e),
                    })?;
                records.push(outcome.record(step, epoch, Split::Train, cfg.kind));
            }
        }
    }
    Ok((params, records))
}

/// Evaluates a split without touching parameters; batches run in fixed index
/// order so repeated calls are identical.
pub fn evaluate(
    cfg: &ModelConfig,
    tc: &TrainConfig,
    dataset: &Dataset,
    params: &ParamSet,
    split: Split,
    epoch: u32,
    step: u64,
) -> Result<MetricsRecord> {
    let mut total = BatchOutcome::zero();
    match dataset {
        Dataset::Labeled {
            features,
            labels,
            train_idx,
            valid_idx,
            ..
        } => {
            let idx = match split {
                Split::EvalValid => valid_idx,
                _ => train_idx,
            };
            if idx.is_empty() {
                return Err(Error::InvalidArgument {
                    what: format!("split {split} is empty"),
                });
            }
            let mut params_mut = params.clone();
            for chunk in idx.chunks(tc.batch_size) {
                let (x, targets) = gather_batch(features, labels, chunk)?;
                let outcome = classifier_step(cfg, tc, &mut params_mut, None, &x, &targets)?;
                total.merge(outcome);
            }
        }
        Dataset::Chars {
            tokens, train_len, ..
        } => {
            let starts = match split {
                Split::EvalValid => {
                    char_window_starts_range(*train_len, tokens.len(), tc.seq_len)
                }
                _ => char_window_starts(*train_len, tc.seq_len),
            };
            if starts.is_empty() {
                return Err(Error::InvalidArgument {
                    what: format!("split {split} has no windows"),
                });
            }
            let mut params_mut = params.clone();
            for chunk in starts.chunks(tc.batch_size) {
                let outcome = lstm_step(cfg, tc, &mut params_mut, None, tokens, chunk)?;
                total.merge(outcome);
            }
        }
    }
    Ok(total.record(step, epoch, split, cfg.kind))
}

/// Initializes parameters from the seed and alternates training epochs with
/// end-of-epoch evaluations of both splits.
pub fn run_training(cfg: &ModelConfig, tc: &TrainConfig, dataset: &Dataset) -> Result<TrainingRun> {
    cfg.validate()?;
    tc.validate()?;
    let mut params = init_params(cfg, tc.seed)?;
    let mut opt = tc.optimizer()?;
    let mut records = Vec::new();
    let mut step = 0u64;
    for epoch in 1..=tc.epochs as u32 {
        let (updated, batch_records) =
            train_epoch(cfg, tc, dataset, params, &mut opt, epoch, step)?;
        params = updated;
        step += batch_records.len() as u64;
        records.extend(batch_records);
        records.push(evaluate(cfg, tc, dataset, &params, Split::EvalTrain, epoch, step)?);
        records.push(evaluate(cfg, tc, dataset, &params, Split::EvalValid, epoch, step)?);
    }
    Ok(TrainingRun { params, records })
}

impl BatchOutcome {
    fn zero() -> Self {
        BatchOutcome {
            loss: 0.0,
            penalty: 0.0,
            correct: 0,
            examples: 0,
            units: 0,
            sum_abs_v: 0.0,
            count_v: 0,
        }
    }

    fn merge(&mut self, other: BatchOutcome) {
        // loss and penalty are unit-weighted means; re-aggregate them
        self.loss = weighted(self.loss, self.units, other.loss, other.units);
        self.penalty = weighted(self.penalty, self.count_v, other.penalty, other.count_v);
        self.correct += other.correct;
        self.examples += other.examples;
        self.units += other.units;
        self.sum_abs_v += other.sum_abs_v;
        self.count_v += other.count_v;
    }

    fn record(&self, step: u64, epoch: u32, split: Split, kind: ModelKind) -> MetricsRecord {
        let accuracy = match kind {
            ModelKind::CharLstm => self.loss,
            _ => self.correct as f64 / self.examples.max(1) as f64,
        };
        MetricsRecord {
            step,
            epoch,
            split,
            loss: self.loss,
            l1_penalty: self.penalty,
            accuracy,
            mean_abs_v: self.sum_abs_v / self.count_v.max(1) as f64,
            wall_ms: 0,
        }
    }
}

fn weighted(a: f64, wa: usize, b: f64, wb: usize) -> f64 {
    if wa + wb == 0 {
        return 0.0;
    }
    (a * wa as f64 + b * wb as f64) / (wa + wb) as f64
}

fn classifier_step(
    cfg: &ModelConfig,
    tc: &TrainConfig,
    params: &mut ParamSet,
    opt: Option<&mut Optimizer>,
    x: &Tensor,
    targets: &[usize],
) -> Result<BatchOutcome> {
    let mut g = Graph::new();
    let nodes = stage_params(&mut g, params);
    let xid = g.leaf(x.clone());
    let fwd = model_forward(&mut g, &nodes, xid, cfg)?;
    let ce = loss::cross_entropy_loss(&mut g, fwd.logits, targets)?;
    let picks: Vec<NodeId> = fwd.states.iter().map(|s| tc.l1_target.pick(s)).collect();
    let penalty = l1_penalty_node(&mut g, &picks, tc.lambda_l1)?;
    let objective = total_objective(&mut g, ce, penalty)?;

    if let Some(opt) = opt {
        apply_gradients(&mut g, objective, &nodes, params, opt)?;
    }

    let predictions = argmax_rows(g.value(fwd.logits));
    let correct = predictions
        .iter()
        .zip(targets)
        .filter(|(p, t)| p == t)
        .count();
    let (sum_abs_v, count_v) = sum_abs_states(&g, &fwd.states);
    Ok(BatchOutcome {
        loss: g.value(ce).scalar_value(),
        penalty: g.value(penalty).scalar_value(),
        correct,
        examples: targets.len(),
        units: targets.len(),
        sum_abs_v,
        count_v,
    })
}

fn lstm_step(
    cfg: &ModelConfig,
    tc: &TrainConfig,
    params: &mut ParamSet,
    opt: Option<&mut Optimizer>,
    tokens: &[usize],
    starts: &[usize],
) -> Result<BatchOutcome> {
    let vocab = cfg.input_features;
    let hdim = cfg.hidden[0];
    let batch = starts.len();
    let mut g = Graph::new();
    let nodes = stage_params(&mut g, params);
    let mut h = g.leaf(Tensor::zeros(&[batch, hdim]));
    let mut c = g.leaf(Tensor::zeros(&[batch, hdim]));
    let mut ce_terms = Vec::with_capacity(tc.seq_len);
    let mut states = Vec::new();
    for t in 0..tc.seq_len {
        let inputs: Vec<usize> = starts.iter().map(|&s| tokens[s + t]).collect();
        let targets: Vec<usize> = starts.iter().map(|&s| tokens[s + t + 1]).collect();
        let x_t = g.leaf(one_hot(&inputs, vocab)?);
        let stepped = lstm_cell_forward(&mut g, &nodes, x_t, h, c, cfg)?;
        h = stepped.h;
        c = stepped.c;
        states.extend(stepped.states);
        let logits = {
            let w = nodes.get("head.w")?;
            let b = nodes.get("head.b")?;
            let z = g.matmul(stepped.h, w)?;
            g.add(z, b)?
        };
        ce_terms.push(loss::cross_entropy_loss(&mut g, logits, &targets)?);
    }
    let mut ce_sum = ce_terms[0];
    for &term in &ce_terms[1..] {
        ce_sum = g.add(ce_sum, term)?;
    }
    // mean over timesteps of batch-mean CE = per-char cross-entropy
    let ce = g.scale(ce_sum, 1.0 / tc.seq_len as f64)?;
    let picks: Vec<NodeId> = states.iter().map(|s| tc.l1_target.pick(s)).collect();
    let penalty = l1_penalty_node(&mut g, &picks, tc.lambda_l1)?;
    let objective = total_objective(&mut g, ce, penalty)?;

    if let Some(opt) = opt {
        apply_gradients(&mut g, objective, &nodes, params, opt)?;
    }

    let (sum_abs_v, count_v) = sum_abs_states(&g, &states);
    Ok(BatchOutcome {
        loss: g.value(ce).scalar_value(),
        penalty: g.value(penalty).scalar_value(),
        correct: 0,
        examples: batch,
        units: batch * tc.seq_len,
        sum_abs_v,
        count_v,
    })
}

fn apply_gradients(
    g: &mut Graph,
    objective: NodeId,
    nodes: &crate::models::ParamNodes,
    params: &mut ParamSet,
    opt: &mut Optimizer,
) -> Result<()> {
    let grads = g.backward(objective)?;
    let mut by_name = std::collections::BTreeMap::new();
    for (name, id) in nodes.iter() {
        let shape = params.get(name)?.shape().to_vec();
        by_name.insert(name.clone(), grads.get_or_zeros(id, &shape));
    }
    opt.step(params, &by_name)
}

fn sum_abs_states(g: &Graph, states: &[TapedNorm]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0usize;
    for s in states {
        let v = g.value(s.v);
        sum += v.data().iter().map(|x| x.abs()).sum::<f64>();
        count += v.len();
    }
    (sum, count)
}

/// Argmax per row with ties broken toward the lowest class index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    (0..n)
        .map(|i| {
            let row = &logits.data()[i * k..(i + 1) * k];
            let mut best = 0usize;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

fn one_hot(tokens: &[usize], vocab: usize) -> Result<Tensor> {
    let mut data = vec![0.0; tokens.len() * vocab];
    for (i, &t) in tokens.iter().enumerate() {
        if t >= vocab {
            return Err(Error::TargetOutOfRange {
                target: t,
                classes: vocab,
            });
        }
        data[i * vocab + t] = 1.0;
    }
    Tensor::new(vec![tokens.len(), vocab], data)
}

/// Non-overlapping window start offsets in `[0, train_len)` leaving room for
/// the shifted target.
pub fn char_window_starts(train_len: usize, seq_len: usize) -> Vec<usize> {
    char_window_starts_range(0, train_len, seq_len)
}

fn char_window_starts_range(from: usize, to: usize, seq_len: usize) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut s = from;
    while s + seq_len < to {
        starts.push(s);
        s += seq_len;
    }
    starts
}
