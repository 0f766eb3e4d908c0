//! Experiment execution: single runs, σ/λ sweeps over share-nothing child
//! runs, the gradient verification command, and curve rendering.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use normkit_core::error::Error as CoreError;
use normkit_core::norm::{verify, PresetKind};
use normkit_core::train::data::{load_dataset, Dataset, DatasetHandle};
use normkit_core::train::{run_training, MetricsRecord};

use crate::config::{model_for, resolve, Conventions, ExperimentConfig};
use crate::report::{self, atomic_write, final_by_split, MetricsRow};
use crate::svg::render_curves;

/// Failure classes mapped onto process exit codes: configuration errors exit
/// 2, numerical aborts exit 3, I/O problems exit 1.
#[derive(Debug, Clone)]
pub enum RunError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numeric(_) => 3,
            RunError::Io(_) => 1,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Numeric(m) => write!(f, "numerical abort: {m}"),
            RunError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        if e.is_numeric_abort() {
            RunError::Numeric(e.to_string())
        } else if matches!(e, CoreError::Io { .. }) {
            RunError::Io(e.to_string())
        } else {
            RunError::Config(e.to_string())
        }
    }
}

/// Version string stamped into summaries.
pub fn version_string() -> String {
    format!("normkit-v{}", env!("CARGO_PKG_VERSION"))
}

/// Reads a seed override from NORMKIT_SEED, if set.
pub fn seed_override() -> Result<Option<u64>, RunError> {
    match std::env::var("NORMKIT_SEED") {
        Ok(raw) => raw
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|e| RunError::Config(format!("NORMKIT_SEED {raw:?}: {e}"))),
        Err(_) => Ok(None),
    }
}

#[derive(Debug, Clone, Serialize)]
struct DatasetSummary {
    kind: String,
    examples: usize,
    feature_shape: Vec<usize>,
    train_examples: usize,
    valid_examples: usize,
    classes: usize,
}

impl From<&DatasetHandle> for DatasetSummary {
    fn from(h: &DatasetHandle) -> Self {
        DatasetSummary {
            kind: h.kind.name().to_string(),
            examples: h.examples,
            feature_shape: h.feature_shape.clone(),
            train_examples: h.train_examples,
            valid_examples: h.valid_examples,
            classes: h.classes,
        }
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    version: String,
    conventions: &'a Conventions,
    seed_used: u64,
    dataset: DatasetSummary,
    final_metrics: BTreeMap<String, MetricsRow>,
    runtime_ms: u128,
    config: &'a ExperimentConfig,
}

/// Products of one run.
#[derive(Debug)]
pub struct RunOutput {
    pub out_dir: PathBuf,
    pub records: Vec<MetricsRecord>,
    pub seed_used: u64,
}

impl RunOutput {
    pub fn metrics_path(&self) -> PathBuf {
        self.out_dir.join("metrics.csv")
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out_dir.join("summary.json")
    }

    pub fn curves_path(&self) -> PathBuf {
        self.out_dir.join("curves.svg")
    }

    /// Last record of the given split.
    pub fn final_record(&self, split: normkit_core::train::Split) -> Option<&MetricsRecord> {
        self.records.iter().rev().find(|r| r.split == split)
    }
}

/// Executes one experiment and writes metrics.csv, summary.json, and
/// curves.svg into the configured output directory.
pub fn run(cfg: &ExperimentConfig, out_override: Option<&Path>) -> Result<RunOutput, RunError> {
    let started = Instant::now();
    let mut resolved = resolve(cfg)?;
    if let Some(seed) = seed_override()? {
        resolved.train.seed = seed;
    }
    let dataset = load_dataset(&resolved.request, resolved.train.seed).map_err(RunError::from)?;
    let dataset = adapt_features(dataset, resolved.model_kind)?;
    let model = model_for(&resolved, dataset.handle())?;
    let outcome = run_training(&model, &resolved.train, &dataset).map_err(RunError::from)?;

    let out_dir = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| resolved.output_dir.clone());
    fs::create_dir_all(&out_dir).map_err(|e| RunError::Io(format!("create {out_dir:?}: {e}")))?;

    let csv = report::metrics_csv(&outcome.records, &resolved.conventions)?;
    atomic_write(&out_dir.join("metrics.csv"), &csv)?;

    let svg = render_curves(&outcome.records, &resolved.conventions.line());
    atomic_write(&out_dir.join("curves.svg"), svg.as_bytes())?;

    let summary = Summary {
        version: version_string(),
        conventions: &resolved.conventions,
        seed_used: resolved.train.seed,
        dataset: DatasetSummary::from(dataset.handle()),
        final_metrics: final_by_split(&outcome.records),
        runtime_ms: started.elapsed().as_millis(),
        config: cfg,
    };
    let json = serde_json::to_vec_pretty(&summary)
        .map_err(|e| RunError::Io(format!("summary serialization: {e}")))?;
    atomic_write(&out_dir.join("summary.json"), &json)?;

    Ok(RunOutput {
        out_dir,
        records: outcome.records,
        seed_used: resolved.train.seed,
    })
}

/// MLP consumers flatten image datasets into per-example feature rows.
fn adapt_features(
    dataset: Dataset,
    kind: normkit_core::models::ModelKind,
) -> Result<Dataset, RunError> {
    use normkit_core::models::ModelKind;
    match (&dataset, kind) {
        (Dataset::Labeled { handle, .. }, ModelKind::Mlp) if handle.feature_shape.len() == 3 => {
            let Dataset::Labeled {
                mut handle,
                features,
                labels,
                train_idx,
                valid_idx,
            } = dataset
            else {
                unreachable!()
            };
            let n = features.shape()[0];
            let flat: usize = handle.feature_shape.iter().product();
            let features = features
                .reshaped(&[n, flat])
                .map_err(|e| RunError::Config(e.to_string()))?;
            handle.feature_shape = vec![flat];
            Ok(Dataset::Labeled {
                handle,
                features,
                labels,
                train_idx,
                valid_idx,
            })
        }
        _ => Ok(dataset),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Sigma,
    LambdaL1,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Sigma => "sigma",
            SweepAxis::LambdaL1 => "lambda_l1",
        }
    }
}

#[derive(Debug)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: Result<RunOutput, RunError>,
}

#[derive(Debug)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub csv_path: PathBuf,
}

/// One independent child run per value (shared seeds), executed
/// concurrently, plus a combined sweep.csv keyed by the swept value.
/// Fails only when every child fails.
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
) -> Result<SweepOutput, RunError> {
    if values.is_empty() {
        return Err(RunError::Config("sweep requires at least one value".into()));
    }
    for &v in values {
        if !v.is_finite() || v < 0.0 {
            return Err(RunError::Config(format!(
                "sweep value {v} is invalid for axis {}",
                axis.name()
            )));
        }
    }
    let base_dir = PathBuf::from(&cfg.output_dir);

    let outcomes: Vec<Result<RunOutput, RunError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = values
            .iter()
            .map(|&value| {
                let mut child = cfg.clone();
                match axis {
                    SweepAxis::Sigma => {
                        child.train.sigma = value;
                        child.norm.sigma = None;
                    }
                    SweepAxis::LambdaL1 => {
                        child.train.lambda_l1 = value;
                        child.norm.lambda_l1 = None;
                    }
                }
                let out_dir = base_dir.join(format!("{}-{}", axis.name(), value));
                child.output_dir = out_dir.display().to_string();
                scope.spawn(move || run(&child, None))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep child")).collect()
    });

    let rows: Vec<SweepRow> = values
        .iter()
        .zip(outcomes)
        .map(|(&value, outcome)| SweepRow { value, outcome })
        .collect();

    let mut buf = Vec::new();
    {
        let resolved = resolve(cfg)?;
        buf.extend_from_slice(
            format!("# conventions: {}\n", resolved.conventions.line()).as_bytes(),
        );
    }
    let mut writer = csv::Writer::from_writer(buf);
    writer
        .write_record([
            "axis",
            "value",
            "status",
            "final_loss",
            "final_accuracy",
            "final_mean_abs_v",
            "output_dir",
        ])
        .map_err(|e| RunError::Io(e.to_string()))?;
    for row in &rows {
        match &row.outcome {
            Ok(out) => {
                let last = out
                    .final_record(normkit_core::train::Split::EvalTrain)
                    .cloned()
                    .unwrap_or(MetricsRecord {
                        step: 0,
                        epoch: 0,
                        split: normkit_core::train::Split::EvalTrain,
                        loss: f64::NAN,
                        l1_penalty: 0.0,
                        accuracy: 0.0,
                        mean_abs_v: 0.0,
                        wall_ms: 0,
                    });
                writer
                    .write_record(&[
                        axis.name().to_string(),
                        row.value.to_string(),
                        "ok".to_string(),
                        last.loss.to_string(),
                        last.accuracy.to_string(),
                        last.mean_abs_v.to_string(),
                        out.out_dir.display().to_string(),
                    ])
                    .map_err(|e| RunError::Io(e.to_string()))?;
            }
            Err(e) => {
                writer
                    .write_record(&[
                        axis.name().to_string(),
                        row.value.to_string(),
                        format!("error: {e}"),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                    ])
                    .map_err(|e| RunError::Io(e.to_string()))?;
            }
        }
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| RunError::Io(e.to_string()))?;
    let csv_path = base_dir.join("sweep.csv");
    atomic_write(&csv_path, &bytes)?;

    if rows.iter().all(|r| r.outcome.is_err()) {
        let first = rows
            .first()
            .and_then(|r| r.outcome.as_ref().err().cloned())
            .unwrap_or(RunError::Config("sweep failed".into()));
        return Err(first);
    }
    Ok(SweepOutput { rows, csv_path })
}

/// Re-renders curves from an existing metrics.csv.
pub fn render(metrics_path: &Path, out: Option<&Path>) -> Result<PathBuf, RunError> {
    let bytes = fs::read(metrics_path)
        .map_err(|e| RunError::Io(format!("read {metrics_path:?}: {e}")))?;
    let records = report::parse_metrics_csv(&bytes)?;
    let conventions_line = bytes
        .split(|&b| b == b'\n')
        .next()
        .filter(|line| line.starts_with(b"# conventions: "))
        .map(|line| String::from_utf8_lossy(&line[b"# conventions: ".len()..]).into_owned())
        .unwrap_or_else(|| "unspecified".to_string());
    let svg = render_curves(&records, &conventions_line);
    let target = out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| metrics_path.with_file_name("curves.svg"));
    atomic_write(&target, svg.as_bytes())?;
    Ok(target)
}

/// One line of gradcheck output: the worst errors over seeds for a grid
/// point.
#[derive(Debug)]
pub struct GradcheckLine {
    pub preset: PresetKind,
    pub sigma: f64,
    pub centered: bool,
    pub affine: bool,
    pub max_tape_diff: f64,
    pub max_fd_err: f64,
}

impl GradcheckLine {
    pub fn pass(&self) -> bool {
        self.max_tape_diff <= GRADCHECK_TAPE_TOL && self.max_fd_err <= GRADCHECK_FD_TOL
    }
}

impl fmt::Display for GradcheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "preset={} sigma={} centered={} affine={} analytic_vs_tape={:.3e} fd_rel={:.3e} {}",
            self.preset.name(),
            self.sigma,
            if self.centered { "yes" } else { "no" },
            if self.affine { "yes" } else { "no" },
            self.max_tape_diff,
            self.max_fd_err,
            if self.pass() { "PASS" } else { "FAIL" }
        )
    }
}

pub const GRADCHECK_TAPE_TOL: f64 = 1e-12;
pub const GRADCHECK_FD_TOL: f64 = 1e-6;

/// Runs the triple-agreement grid (10 seeds per point) and aggregates to one
/// line per preset × σ × centering × affine combination.
pub fn gradcheck(preset: Option<PresetKind>) -> Result<Vec<GradcheckLine>, RunError> {
    let presets: Vec<PresetKind> = match preset {
        Some(p) => vec![p],
        None => PresetKind::ALL.to_vec(),
    };
    let reports = verify::gradient_suite(&presets, 0..10).map_err(RunError::from)?;
    let mut lines: Vec<GradcheckLine> = Vec::new();
    for r in &reports {
        let found = lines.iter_mut().find(|l| {
            l.preset == r.case.preset
                && l.sigma == r.case.sigma
                && l.centered == r.case.centered
                && l.affine == r.case.affine
        });
        match found {
            Some(line) => {
                line.max_tape_diff = line.max_tape_diff.max(r.analytic_vs_tape);
                line.max_fd_err = line.max_fd_err.max(r.fd_rel_err);
            }
            None => lines.push(GradcheckLine {
                preset: r.case.preset,
                sigma: r.case.sigma,
                centered: r.case.centered,
                affine: r.case.affine,
                max_tape_diff: r.analytic_vs_tape,
                max_fd_err: r.fd_rel_err,
            }),
        }
    }
    Ok(lines)
}
