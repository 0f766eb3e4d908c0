//! Metrics serialization: RFC-4180 CSV with a leading conventions comment,
//! a summary JSON document, and atomic (write-temp-then-rename) file output.
//! Floats are written in shortest round-trip form so re-parsing reproduces
//! the in-memory records exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use normkit_core::train::{MetricsRecord, Split};

use crate::config::Conventions;
use crate::runner::RunError;

pub const CSV_COLUMNS: [&str; 8] = [
    "step",
    "epoch",
    "split",
    "loss",
    "l1_penalty",
    "accuracy",
    "mean_abs_v",
    "wall_ms",
];

/// Renders the metrics stream: one `#` comment line carrying the conventions
/// block, the header row, then one record per row.
pub fn metrics_csv(records: &[MetricsRecord], conventions: &Conventions) -> Result<Vec<u8>, RunError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(format!("# conventions: {}\n", conventions.line()).as_bytes());
    let mut writer = csv::Writer::from_writer(buf);
    writer
        .write_record(CSV_COLUMNS)
        .map_err(|e| RunError::Io(e.to_string()))?;
    for r in records {
        writer
            .write_record(&[
                r.step.to_string(),
                r.epoch.to_string(),
                r.split.name().to_string(),
                r.loss.to_string(),
                r.l1_penalty.to_string(),
                r.accuracy.to_string(),
                r.mean_abs_v.to_string(),
                r.wall_ms.to_string(),
            ])
            .map_err(|e| RunError::Io(e.to_string()))?;
    }
    writer
        .into_inner()
        .map_err(|e| RunError::Io(e.to_string()))
}

/// Parses a metrics CSV back into records, skipping the conventions comment.
/// Missing columns are reported by name.
pub fn parse_metrics_csv(bytes: &[u8]) -> Result<Vec<MetricsRecord>, RunError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| RunError::Io(format!("csv header: {e}")))?
        .clone();
    let mut index = BTreeMap::new();
    for (i, h) in headers.iter().enumerate() {
        index.insert(h.to_string(), i);
    }
    for col in CSV_COLUMNS {
        if !index.contains_key(col) {
            return Err(RunError::Config(format!("metrics csv is missing column {col:?}")));
        }
    }
    let field = |record: &csv::StringRecord, col: &str| -> String {
        record.get(index[col]).unwrap_or_default().to_string()
    };
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| RunError::Io(format!("csv row {line}: {e}")))?;
        let parse_f64 = |col: &str| -> Result<f64, RunError> {
            field(&row, col)
                .parse::<f64>()
                .map_err(|e| RunError::Config(format!("row {line}, column {col}: {e}")))
        };
        let parse_u64 = |col: &str| -> Result<u64, RunError> {
            field(&row, col)
                .parse::<u64>()
                .map_err(|e| RunError::Config(format!("row {line}, column {col}: {e}")))
        };
        records.push(MetricsRecord {
            step: parse_u64("step")?,
            epoch: parse_u64("epoch")? as u32,
            split: Split::from_str(&field(&row, "split"))
                .map_err(|e| RunError::Config(format!("row {line}: {e}")))?,
            loss: parse_f64("loss")?,
            l1_penalty: parse_f64("l1_penalty")?,
            accuracy: parse_f64("accuracy")?,
            mean_abs_v: parse_f64("mean_abs_v")?,
            wall_ms: parse_u64("wall_ms")?,
        });
    }
    Ok(records)
}

/// Serializable mirror of a metrics record for the summary document.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub step: u64,
    pub epoch: u32,
    pub split: String,
    pub loss: f64,
    pub l1_penalty: f64,
    pub accuracy: f64,
    pub mean_abs_v: f64,
    pub wall_ms: u64,
}

impl From<&MetricsRecord> for MetricsRow {
    fn from(r: &MetricsRecord) -> Self {
        MetricsRow {
            step: r.step,
            epoch: r.epoch,
            split: r.split.name().to_string(),
            loss: r.loss,
            l1_penalty: r.l1_penalty,
            accuracy: r.accuracy,
            mean_abs_v: r.mean_abs_v,
            wall_ms: r.wall_ms,
        }
    }
}

/// Final metrics per split: the last record of each split present.
pub fn final_by_split(records: &[MetricsRecord]) -> BTreeMap<String, MetricsRow> {
    let mut out = BTreeMap::new();
    for r in records {
        out.insert(r.split.name().to_string(), MetricsRow::from(r));
    }
    out
}

/// Writes bytes atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("create {dir:?}: {e}")))?;
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
    ));
    fs::write(&tmp, bytes).map_err(|e| RunError::Io(format!("write {tmp:?}: {e}")))?;
    fs::rename(&tmp, path).map_err(|e| RunError::Io(format!("rename to {path:?}: {e}")))?;
    Ok(())
}
