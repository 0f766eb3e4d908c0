//! Accumulation regions: which axes and windows are averaged when a
//! normalizer pools statistics around a position.
//!
//! A region is declarative (batch axis yes/no, channel span, spatial span)
//! and is resolved against a concrete shape into one clipped index range per
//! axis. Internally every selection reduces to a per-axis radius — an
//! excluded axis has radius 0, a full axis has radius extent−1, a window of
//! extent e has radius e/2 — so full-coverage windows and full-axis
//! selections take the same code path and produce bit-identical results.
//! Windows are clipped at tensor edges and statistics divide by the actual
//! in-bounds count, never by a padded size.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Channel-axis selection of an accumulation region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelSpan {
    Excluded,
    All,
    /// Centered window; extent must be odd and >= 1.
    Window(usize),
}

/// Spatial selection of an accumulation region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceSpan {
    Excluded,
    All,
    /// Centered window (height extent, width extent); extents odd and >= 1.
    Window(usize, usize),
}

/// Declarative description of the accumulation set around each position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormRegion {
    over_batch: bool,
    over_channels: ChannelSpan,
    over_space: SpaceSpan,
}

impl NormRegion {
    /// Validates window extents (odd, >= 1) and requires at least one axis to
    /// be included so the accumulation set is never just undefined.
    pub fn new(over_batch: bool, over_channels: ChannelSpan, over_space: SpaceSpan) -> Result<Self> {
        if let ChannelSpan::Window(e) = over_channels {
            if e == 0 || e % 2 == 0 {
                return Err(Error::InvalidRegion {
                    reason: format!("channel window extent must be odd and >= 1, got {e}"),
                });
            }
        }
        if let SpaceSpan::Window(h, w) = over_space {
            if h == 0 || h % 2 == 0 || w == 0 || w % 2 == 0 {
                return Err(Error::InvalidRegion {
                    reason: format!("spatial window extents must be odd and >= 1, got {h}×{w}"),
                });
            }
        }
        if !over_batch
            && over_channels == ChannelSpan::Excluded
            && over_space == SpaceSpan::Excluded
        {
            return Err(Error::InvalidRegion {
                reason: "at least one axis must be included".into(),
            });
        }
        Ok(NormRegion {
            over_batch,
            over_channels,
            over_space,
        })
    }

    pub fn over_batch(&self) -> bool {
        self.over_batch
    }

    pub fn over_channels(&self) -> ChannelSpan {
        self.over_channels
    }

    pub fn over_space(&self) -> SpaceSpan {
        self.over_space
    }

    /// Per-axis window radii for a concrete shape. Rank 2 is N×D with the
    /// channel span governing the feature axis (no spatial span allowed);
    /// rank 4 is N×C×H×W.
    pub fn radii(&self, shape: &[usize]) -> Result<Vec<usize>> {
        match shape.len() {
            2 => {
                if self.over_space != SpaceSpan::Excluded {
                    return Err(Error::InvalidRegion {
                        reason: "2-d inputs have no spatial axes; over_space must be excluded"
                            .into(),
                    });
                }
                Ok(vec![
                    batch_radius(self.over_batch, shape[0]),
                    channel_radius(self.over_channels, shape[1]),
                ])
            }
            4 => {
                let (rh, rw) = match self.over_space {
                    SpaceSpan::Excluded => (0, 0),
                    SpaceSpan::All => (shape[2] - 1, shape[3] - 1),
                    SpaceSpan::Window(h, w) => (h / 2, w / 2),
                };
                Ok(vec![
                    batch_radius(self.over_batch, shape[0]),
                    channel_radius(self.over_channels, shape[1]),
                    rh,
                    rw,
                ])
            }
            r => Err(Error::InvalidRegion {
                reason: format!("regions apply to rank 2 or 4 tensors, got rank {r}"),
            }),
        }
    }

    /// Checks compatibility with a shape without resolving anything.
    pub fn validate_for(&self, shape: &[usize]) -> Result<()> {
        self.radii(shape).map(|_| ())
    }
}

fn batch_radius(included: bool, extent: usize) -> usize {
    if included {
        extent - 1
    } else {
        0
    }
}

fn channel_radius(span: ChannelSpan, extent: usize) -> usize {
    match span {
        ChannelSpan::Excluded => 0,
        ChannelSpan::All => extent - 1,
        ChannelSpan::Window(e) => e / 2,
    }
}

/// The explicit accumulation set for position `j`: the Cartesian product of
/// clipped per-axis ranges, in lexicographic order. Always contains `j`.
pub fn resolve_region(region: &NormRegion, shape: &[usize], j: &[usize]) -> Result<Vec<Vec<usize>>> {
    if j.len() != shape.len() || j.iter().zip(shape).any(|(&i, &n)| i >= n) {
        return Err(Error::InvalidArgument {
            what: format!("position {j:?} out of bounds for shape {shape:?}"),
        });
    }
    let radii = region.radii(shape)?;
    let ranges: Vec<(usize, usize)> = j
        .iter()
        .zip(shape)
        .zip(&radii)
        .map(|((&i, &n), &r)| (i.saturating_sub(r), (i + r).min(n - 1)))
        .collect();
    let mut out = Vec::new();
    let mut cur: Vec<usize> = ranges.iter().map(|&(lo, _)| lo).collect();
    loop {
        out.push(cur.clone());
        let mut axis = shape.len();
        loop {
            if axis == 0 {
                return Ok(out);
            }
            axis -= 1;
            if cur[axis] < ranges[axis].1 {
                cur[axis] += 1;
                for rest in axis + 1..shape.len() {
                    cur[rest] = ranges[rest].0;
                }
                break;
            }
        }
    }
}

/// Per-position sum of `x` over the resolved accumulation set.
///
/// Applied as one clipped sliding-window pass per included axis, each pass a
/// direct ascending fold over the in-bounds window (no prefix differences, so
/// no cancellation and bit-stable equivalence between a full-coverage window
/// and a full-axis selection).
pub fn region_sum(x: &Tensor, region: &NormRegion) -> Result<Tensor> {
    let radii = region.radii(x.shape())?;
    let mut data = x.data().to_vec();
    for (axis, &r) in radii.iter().enumerate() {
        if r > 0 {
            data = axis_window_sum(&data, x.shape(), axis, r);
        }
    }
    Tensor::new(x.shape().to_vec(), data)
}

/// Number of in-bounds accumulation-set members at each position.
pub fn region_count(shape: &[usize], region: &NormRegion) -> Result<Tensor> {
    let radii = region.radii(shape)?;
    let len: usize = shape.iter().product();
    let mut counts = vec![1.0; len];
    for (axis, &r) in radii.iter().enumerate() {
        if r == 0 {
            continue;
        }
        let n = shape[axis];
        let stride: usize = shape[axis + 1..].iter().product();
        for (lin, cnt) in counts.iter_mut().enumerate() {
            let i = (lin / stride) % n;
            let lo = i.saturating_sub(r);
            let hi = (i + r).min(n - 1);
            *cnt *= (hi - lo + 1) as f64;
        }
    }
    Tensor::new(shape.to_vec(), counts)
}

/// Arithmetic mean of `x` over each position's accumulation set, broadcast
/// back to the input shape. Divides by the actual in-bounds count.
pub fn region_mean(x: &Tensor, region: &NormRegion) -> Result<Tensor> {
    let sum = region_sum(x, region)?;
    let count = region_count(x.shape(), region)?;
    sum.binary(crate::tensor::BinaryOp::Div, &count)
}

/// Gradient of `region_mean`: because membership is symmetric (k ∈ R_j iff
/// j ∈ R_k), the transposed operator is region_sum(upstream / count).
pub fn region_mean_backward(upstream: &Tensor, region: &NormRegion) -> Result<Tensor> {
    let count = region_count(upstream.shape(), region)?;
    let scaled = upstream.binary(crate::tensor::BinaryOp::Div, &count)?;
    region_sum(&scaled, region)
}

fn axis_window_sum(data: &[f64], shape: &[usize], axis: usize, radius: usize) -> Vec<f64> {
    let n = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![0.0; data.len()];
    for o in 0..outer {
        let block = o * n * stride;
        for s in 0..stride {
            let base = block + s;
            for i in 0..n {
                let lo = i.saturating_sub(radius);
                let hi = (i + radius).min(n - 1);
                let mut acc = 0.0;
                for k in lo..=hi {
                    acc += data[base + k * stride];
                }
                out[base + i * stride] = acc;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_even_windows_and_empty_axis_sets() {
        assert!(NormRegion::new(false, ChannelSpan::Window(2), SpaceSpan::Excluded).is_err());
        assert!(NormRegion::new(false, ChannelSpan::Excluded, SpaceSpan::Window(3, 4)).is_err());
        assert!(NormRegion::new(false, ChannelSpan::Excluded, SpaceSpan::Excluded).is_err());
        assert!(NormRegion::new(false, ChannelSpan::Window(1), SpaceSpan::Window(1, 1)).is_ok());
    }

    #[test]
    fn batch_region_resolves_to_batch_and_space() {
        // per-channel statistics over batch and space on 8×4×6×6
        let region = NormRegion::new(true, ChannelSpan::Excluded, SpaceSpan::All).unwrap();
        let set = resolve_region(&region, &[8, 4, 6, 6], &[2, 1, 3, 3]).unwrap();
        assert_eq!(set.len(), 8 * 6 * 6);
        assert!(set.iter().all(|idx| idx[1] == 1));
        assert!(set.contains(&vec![2, 1, 3, 3]));
    }

    #[test]
    fn corner_window_is_clipped_not_padded() {
        let region = NormRegion::new(false, ChannelSpan::Excluded, SpaceSpan::Window(3, 3)).unwrap();
        let set = resolve_region(&region, &[1, 1, 6, 6], &[0, 0, 0, 0]).unwrap();
        assert_eq!(set.len(), 4);
    }

    #[test]
    fn full_feature_axis_on_2d() {
        let region = NormRegion::new(false, ChannelSpan::All, SpaceSpan::Excluded).unwrap();
        let set = resolve_region(&region, &[3, 5], &[0, 2]).unwrap();
        assert_eq!(set.len(), 5);
        assert!(set.iter().all(|idx| idx[0] == 0));
    }

    #[test]
    fn spatial_span_is_invalid_on_2d() {
        let region = NormRegion::new(false, ChannelSpan::All, SpaceSpan::All).unwrap();
        assert!(matches!(
            region.validate_for(&[3, 5]),
            Err(Error::InvalidRegion { .. })
        ));
    }

    #[test]
    fn global_mean_broadcasts_back() {
        let x = Tensor::new(vec![1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let region = NormRegion::new(false, ChannelSpan::All, SpaceSpan::Excluded).unwrap();
        let m = region_mean(&x, &region).unwrap();
        assert_eq!(m.data(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn constant_input_mean_is_constant() {
        let x = Tensor::full(&[2, 3, 4, 4], 7.25).unwrap();
        let region =
            NormRegion::new(false, ChannelSpan::Window(3), SpaceSpan::Window(3, 3)).unwrap();
        let m = region_mean(&x, &region).unwrap();
        assert!(m.data().iter().all(|&v| (v - 7.25).abs() < 1e-12));
    }

    #[test]
    fn count_matches_resolved_set_size() {
        let region = NormRegion::new(true, ChannelSpan::Window(3), SpaceSpan::Window(3, 3)).unwrap();
        let shape = [2, 4, 5, 5];
        let counts = region_count(&shape, &region).unwrap();
        for j0 in 0..2 {
            for j1 in 0..4 {
                for j2 in 0..5 {
                    for j3 in 0..5 {
                        let set = resolve_region(&region, &shape, &[j0, j1, j2, j3]).unwrap();
                        assert_eq!(counts.at(&[j0, j1, j2, j3]), set.len() as f64);
                    }
                }
            }
        }
    }
}
