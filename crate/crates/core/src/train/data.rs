//! Datasets: in-process Gaussian blobs, MNIST-style IDX files, and byte-level
//! text corpora. Everything is deterministic given its request and seed.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const IDX_IMAGES_MAGIC: u32 = 2051;
pub const IDX_LABELS_MAGIC: u32 = 2049;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Blobs,
    MnistSubset,
    TinyChars,
}

impl DatasetKind {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetKind::Blobs => "blobs",
            DatasetKind::MnistSubset => "mnist-subset",
            DatasetKind::TinyChars => "tiny-chars",
        }
    }

    pub fn parse(s: &str) -> Option<DatasetKind> {
        match s {
            "blobs" => Some(DatasetKind::Blobs),
            "mnist-subset" => Some(DatasetKind::MnistSubset),
            "tiny-chars" => Some(DatasetKind::TinyChars),
            _ => None,
        }
    }
}

/// Summary of a loaded dataset: kind, example count, per-example feature
/// shape, and disjoint split sizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetHandle {
    pub kind: DatasetKind,
    pub examples: usize,
    pub feature_shape: Vec<usize>,
    pub train_examples: usize,
    pub valid_examples: usize,
    pub classes: usize,
}

/// Materialized dataset.
#[derive(Debug, Clone)]
pub enum Dataset {
    Labeled {
        handle: DatasetHandle,
        /// N×D or N×C×H×W feature tensor.
        features: Tensor,
        labels: Vec<usize>,
        train_idx: Vec<usize>,
        valid_idx: Vec<usize>,
    },
    Chars {
        handle: DatasetHandle,
        /// Token ids into `vocab`.
        tokens: Vec<usize>,
        vocab: Vec<u8>,
        /// Tokens `[0, train_len)` are the training stream, the rest
        /// validation.
        train_len: usize,
    },
}

impl Dataset {
    pub fn handle(&self) -> &DatasetHandle {
        match self {
            Dataset::Labeled { handle, .. } => handle,
            Dataset::Chars { handle, .. } => handle,
        }
    }
}

/// Parameters of the in-process Gaussian-cluster task.
#[derive(Debug, Clone, Copy)]
pub struct BlobsSpec {
    pub examples: usize,
    pub features: usize,
    pub classes: usize,
    /// Noise scale around each cluster center.
    pub spread: f64,
    /// Scale of the cluster centers; 0 collapses every example onto the
    /// origin (degenerate constant input).
    pub center_scale: f64,
}

impl Default for BlobsSpec {
    fn default() -> Self {
        BlobsSpec {
            examples: 600,
            features: 16,
            classes: 4,
            spread: 0.15,
            center_scale: 2.0,
        }
    }
}

/// What to load.
#[derive(Debug, Clone)]
pub enum DataRequest {
    Blobs(BlobsSpec),
    MnistSubset {
        images: PathBuf,
        labels: PathBuf,
        count: usize,
    },
    TinyChars {
        path: PathBuf,
    },
}

/// Loads or generates a dataset, deterministically per (request, seed).
pub fn load_dataset(request: &DataRequest, seed: u64) -> Result<Dataset> {
    match request {
        DataRequest::Blobs(spec) => blobs(spec, seed),
        DataRequest::MnistSubset {
            images,
            labels,
            count,
        } => mnist_subset(images, labels, *count, seed),
        DataRequest::TinyChars { path } => tiny_chars(path),
    }
}

fn blobs(spec: &BlobsSpec, seed: u64) -> Result<Dataset> {
    if spec.examples == 0 || spec.features == 0 || spec.classes < 2 {
        return Err(Error::InvalidArgument {
            what: format!("bad blobs request {spec:?}"),
        });
    }
    if spec.examples < 2 * spec.classes {
        return Err(Error::InvalidArgument {
            what: "blobs need at least two examples per class".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![0.0; spec.classes * spec.features];
    for c in centers.iter_mut() {
        *c = rng.random_range(-1.0..1.0) * spec.center_scale;
    }
    let mut data = Vec::with_capacity(spec.examples * spec.features);
    let mut labels = Vec::with_capacity(spec.examples);
    for i in 0..spec.examples {
        let class = i % spec.classes;
        labels.push(class);
        for d in 0..spec.features {
            let noise: f64 = rng.sample(StandardNormal);
            data.push(centers[class * spec.features + d] + spec.spread * noise);
        }
    }
    let features = Tensor::new(vec![spec.examples, spec.features], data)?;
    let (train_idx, valid_idx) = split_indices(spec.examples, seed);
    let handle = DatasetHandle {
        kind: DatasetKind::Blobs,
        examples: spec.examples,
        feature_shape: vec![spec.features],
        train_examples: train_idx.len(),
        valid_examples: valid_idx.len(),
        classes: spec.classes,
    };
    Ok(Dataset::Labeled {
        handle,
        features,
        labels,
        train_idx,
        valid_idx,
    })
}

fn mnist_subset(images: &Path, labels: &Path, count: usize, seed: u64) -> Result<Dataset> {
    let image_bytes = read_file(images)?;
    let label_bytes = read_file(labels)?;
    let parsed = parse_idx_images(&image_bytes)?;
    let all_labels = parse_idx_labels(&label_bytes)?;
    if parsed.count != all_labels.len() {
        return Err(Error::InvalidArgument {
            what: format!(
                "image count {} does not match label count {}",
                parsed.count,
                all_labels.len()
            ),
        });
    }
    if count == 0 || count > parsed.count {
        return Err(Error::InvalidArgument {
            what: format!("requested {count} examples, file holds {}", parsed.count),
        });
    }
    let per_image = parsed.rows * parsed.cols;
    let features = Tensor::new(
        vec![count, 1, parsed.rows, parsed.cols],
        parsed.pixels[..count * per_image].to_vec(),
    )?;
    let labels: Vec<usize> = all_labels[..count].iter().map(|&l| l as usize).collect();
    let (train_idx, valid_idx) = split_indices(count, seed);
    let handle = DatasetHandle {
        kind: DatasetKind::MnistSubset,
        examples: count,
        feature_shape: vec![1, parsed.rows, parsed.cols],
        train_examples: train_idx.len(),
        valid_examples: valid_idx.len(),
        classes: 10,
    };
    Ok(Dataset::Labeled {
        handle,
        features,
        labels,
        train_idx,
        valid_idx,
    })
}

fn tiny_chars(path: &Path) -> Result<Dataset> {
    let bytes = read_file(path)?;
    if bytes.len() < 16 {
        return Err(Error::InvalidArgument {
            what: format!("corpus {path:?} too small ({} bytes)", bytes.len()),
        });
    }
    let mut vocab: Vec<u8> = bytes.clone();
    vocab.sort_unstable();
    vocab.dedup();
    if vocab.len() < 2 {
        return Err(Error::InvalidArgument {
            what: "corpus needs at least two distinct bytes".into(),
        });
    }
    let tokens: Vec<usize> = bytes
        .iter()
        .map(|b| vocab.binary_search(b).expect("byte in vocab"))
        .collect();
    // fixed 90/10 split of the byte stream
    let train_len = (tokens.len() * 9 / 10).max(2);
    let handle = DatasetHandle {
        kind: DatasetKind::TinyChars,
        examples: tokens.len(),
        feature_shape: vec![vocab.len()],
        train_examples: train_len,
        valid_examples: tokens.len() - train_len,
        classes: vocab.len(),
    };
    Ok(Dataset::Chars {
        handle,
        tokens,
        vocab,
        train_len,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.display().to_string(),
        });
    }
    fs::read(path).map_err(Error::from)
}

/// Seed-derived permutation split: one fifth (at least one example) goes to
/// validation, the rest to training.
fn split_indices(examples: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..examples).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5EED_5EED));
    order.shuffle(&mut rng);
    let valid = (examples / 5).max(1);
    let valid_idx: Vec<usize> = order[..valid].to_vec();
    let train_idx: Vec<usize> = order[valid..].to_vec();
    (train_idx, valid_idx)
}

/// Parsed IDX image payload, pixel values scaled into [0, 1].
#[derive(Debug)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

/// Parses a big-endian IDX image container (magic 2051).
pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            expected: IDX_IMAGES_MAGIC,
            found: magic,
        });
    }
    let count = read_u32_be(bytes, 4)? as usize;
    let rows = read_u32_be(bytes, 8)? as usize;
    let cols = read_u32_be(bytes, 12)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            got: bytes.len(),
        });
    }
    let pixels = bytes[16..expected]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels,
    })
}

/// Parses a big-endian IDX label container (magic 2049).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            expected: IDX_LABELS_MAGIC,
            found: magic,
        });
    }
    let count = read_u32_be(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            got: bytes.len(),
        });
    }
    Ok(bytes[8..expected].to_vec())
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Truncated {
            expected: end,
            got: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Copies the selected examples into a batch tensor plus their labels.
pub fn gather_batch(features: &Tensor, labels: &[usize], idx: &[usize]) -> Result<(Tensor, Vec<usize>)> {
    let per_example: usize = features.shape()[1..].iter().product();
    let mut data = Vec::with_capacity(idx.len() * per_example);
    let mut targets = Vec::with_capacity(idx.len());
    for &i in idx {
        data.extend_from_slice(&features.data()[i * per_example..(i + 1) * per_example]);
        targets.push(labels[i]);
    }
    let mut shape = features.shape().to_vec();
    shape[0] = idx.len();
    Ok((Tensor::new(shape, data)?, targets))
}
