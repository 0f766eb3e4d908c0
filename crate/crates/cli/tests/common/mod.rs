//! Shared fixtures: a deterministic glyph-digit dataset written in IDX
//! format (stands in for the MNIST files, which are not vendored), a
//! structured text corpus, config helpers, and independent loop references
//! for the acceptance oracles.

#![allow(dead_code)] // each test target uses its own subset

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use normkit_core::region::{ChannelSpan, NormRegion, SpaceSpan};
use normkit_core::tensor::Tensor;

/// 5×7 bitmaps for the digits 0–9.
const GLYPHS: [[&str; 7]; 10] = [
    [" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "],
    ["  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "],
    [" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"],
    [" ### ", "#   #", "    #", " ### ", "    #", "#   #", " ### "],
    ["   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "],
    ["#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "],
    [" ### ", "#    ", "#    ", "#### ", "#   #", "#   #", " ### "],
    ["#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "],
    [" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "],
    [" ### ", "#   #", "#   #", " ####", "    #", "    #", " ### "],
];

/// Renders `count` 28×28 glyph digits (labels round-robin) with positional
/// jitter and pixel noise, and writes them as an IDX image/label pair.
pub fn write_digit_idx(dir: &Path, count: usize, seed: u64) -> (PathBuf, PathBuf) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(count * 28 * 28);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let digit = i % 10;
        labels.push(digit as u8);
        let dx = rng.random_range(0..5) as isize + 2; // glyph is 15 wide upscaled
        let dy = rng.random_range(0..5) as isize + 1;
        let mut image = [[0u8; 28]; 28];
        for (row, line) in GLYPHS[digit].iter().enumerate() {
            for (col, ch) in line.chars().enumerate() {
                if ch != '#' {
                    continue;
                }
                // upscale each font pixel to 3×3
                for sy in 0..3isize {
                    for sx in 0..3isize {
                        let y = dy + row as isize * 3 + sy;
                        let x = dx + col as isize * 3 + sx;
                        if (0..28).contains(&y) && (0..28).contains(&x) {
                            image[y as usize][x as usize] = rng.random_range(190..=255);
                        }
                    }
                }
            }
        }
        for row in &image {
            for &p in row {
                let noisy = if p == 0 { rng.random_range(0..=30) } else { p };
                pixels.push(noisy);
            }
        }
    }

    let images_path = dir.join("digits-images-idx3-ubyte");
    let labels_path = dir.join("digits-labels-idx1-ubyte");
    let mut image_bytes = Vec::new();
    image_bytes.extend_from_slice(&2051u32.to_be_bytes());
    image_bytes.extend_from_slice(&(count as u32).to_be_bytes());
    image_bytes.extend_from_slice(&28u32.to_be_bytes());
    image_bytes.extend_from_slice(&28u32.to_be_bytes());
    image_bytes.extend_from_slice(&pixels);
    fs::write(&images_path, image_bytes).unwrap();

    let mut label_bytes = Vec::new();
    label_bytes.extend_from_slice(&2049u32.to_be_bytes());
    label_bytes.extend_from_slice(&(count as u32).to_be_bytes());
    label_bytes.extend_from_slice(&labels);
    fs::write(&labels_path, label_bytes).unwrap();

    (images_path, labels_path)
}

/// Writes a strongly structured corpus of roughly `target_bytes` (≤ 100 KB).
pub fn write_corpus(dir: &Path, target_bytes: usize) -> PathBuf {
    let sentences = [
        "the gain rescales every channel after the divisive step. ",
        "a smoothing constant keeps small responses stable. ",
        "pooled activity divides the centered response of each unit. ",
        "sparse codes emerge when magnitudes carry a penalty. ",
        "batch statistics couple the examples inside one step. ",
    ];
    let mut text = String::new();
    let mut i = 0usize;
    while text.len() < target_bytes {
        text.push_str(sentences[i % sentences.len()]);
        i += 1;
    }
    let path = dir.join("corpus.txt");
    fs::write(&path, text).unwrap();
    path
}

/// Writes a JSON config under `dir` and returns its path.
pub fn write_config(dir: &Path, name: &str, value: &serde_json::Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

/// Path of the built `normkit` binary.
pub fn normkit_bin() -> &'static str {
    env!("CARGO_BIN_EXE_normkit")
}

/// Scatter-order convolution reference, independent of the library kernel.
pub fn conv_reference(x: &Tensor, w: &Tensor, pad: usize, stride: usize) -> Tensor {
    let (n, c, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (f, k) = (w.shape()[0], w.shape()[2]);
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (wd + 2 * pad - k) / stride + 1;
    let mut out = vec![0.0; n * f * oh * ow];
    for in_ in 0..n {
        for ci in 0..c {
            for iy in 0..h {
                for ix in 0..wd {
                    let xv = x.at(&[in_, ci, iy, ix]);
                    for fo in 0..f {
                        for ky in 0..k {
                            for kx in 0..k {
                                let oy_num = iy as isize + pad as isize - ky as isize;
                                let ox_num = ix as isize + pad as isize - kx as isize;
                                if oy_num < 0 || ox_num < 0 {
                                    continue;
                                }
                                let (oy_num, ox_num) = (oy_num as usize, ox_num as usize);
                                if oy_num % stride != 0 || ox_num % stride != 0 {
                                    continue;
                                }
                                let (oy, ox) = (oy_num / stride, ox_num / stride);
                                if oy >= oh || ox >= ow {
                                    continue;
                                }
                                out[((in_ * f + fo) * oh + oy) * ow + ox] +=
                                    xv * w.at(&[fo, ci, ky, kx]);
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, f, oh, ow], out).unwrap()
}

/// Independent membership predicate for accumulation sets.
pub fn is_member(region: &NormRegion, shape: &[usize], j: &[usize], k: &[usize]) -> bool {
    let batch_ok = region.over_batch() || k[0] == j[0];
    let (cj, ck) = (j[1] as isize, k[1] as isize);
    let chan_ok = match region.over_channels() {
        ChannelSpan::Excluded => ck == cj,
        ChannelSpan::All => true,
        ChannelSpan::Window(e) => (ck - cj).abs() <= (e / 2) as isize,
    };
    let space_ok = if shape.len() == 2 {
        true
    } else {
        let (hj, hk) = (j[2] as isize, k[2] as isize);
        let (wj, wk) = (j[3] as isize, k[3] as isize);
        match region.over_space() {
            SpaceSpan::Excluded => hk == hj && wk == wj,
            SpaceSpan::All => true,
            SpaceSpan::Window(he, we) => {
                (hk - hj).abs() <= (he / 2) as isize && (wk - wj).abs() <= (we / 2) as isize
            }
        }
    };
    batch_ok && chan_ok && space_ok
}

/// Every multi-index of a shape, in row-major order.
pub fn positions(shape: &[usize]) -> Vec<Vec<usize>> {
    let mut idx = vec![0usize; shape.len()];
    let len: usize = shape.iter().product();
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(idx.clone());
        for axis in (0..shape.len()).rev() {
            idx[axis] += 1;
            if idx[axis] < shape[axis] {
                break;
            }
            idx[axis] = 0;
        }
    }
    out
}

/// The region grid the brute-force checks sweep.
pub fn region_grid(for_2d: bool) -> Vec<NormRegion> {
    let channel_spans = [
        ChannelSpan::Excluded,
        ChannelSpan::All,
        ChannelSpan::Window(1),
        ChannelSpan::Window(3),
    ];
    let space_spans: &[SpaceSpan] = if for_2d {
        &[SpaceSpan::Excluded]
    } else {
        &[
            SpaceSpan::Excluded,
            SpaceSpan::All,
            SpaceSpan::Window(3, 3),
            SpaceSpan::Window(1, 3),
        ]
    };
    let mut regions = Vec::new();
    for &batch in &[false, true] {
        for &ch in &channel_spans {
            for &sp in space_spans {
                if let Ok(r) = NormRegion::new(batch, ch, sp) {
                    regions.push(r);
                }
            }
        }
    }
    regions
}
