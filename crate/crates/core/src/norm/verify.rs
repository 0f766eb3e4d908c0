//! Triple-route gradient verification for the normalizer: the closed-form
//! backward, the tape backward, and central finite differences must agree on
//! every preset. The CLI's `gradcheck` command and the acceptance suite both
//! run this grid.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::gradcheck::grad_check_vector_multi;
use crate::graph::Graph;
use crate::norm::{
    normalize_backward, normalize_node, spec_preset, DnWindow, InputLayout, NormalizerSpec,
    PresetConfig, PresetKind,
};
use crate::tensor::Tensor;

/// One grid point of the verification suite.
#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub preset: PresetKind,
    pub sigma: f64,
    pub centered: bool,
    pub affine: bool,
    pub seed: u64,
    pub shape: Vec<usize>,
}

/// Errors measured for one case.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub case: GradCheckCase,
    /// Max absolute difference between closed-form and tape gradients,
    /// across dz, dgain, dbias.
    pub analytic_vs_tape: f64,
    /// Max relative error of the tape gradient against central differences.
    pub fd_rel_err: f64,
}

impl GradCheckReport {
    pub fn passes(&self, tape_tol: f64, fd_tol: f64) -> bool {
        self.analytic_vs_tape <= tape_tol && self.fd_rel_err <= fd_tol
    }
}

/// Shapes cycled by seed: a mix of image and feature activations up to
/// 4×4×6×6.
const SUITE_SHAPES: [&[usize]; 10] = [
    &[2, 3, 4, 4],
    &[4, 4, 6, 6],
    &[3, 2, 5, 5],
    &[2, 5],
    &[4, 3],
    &[3, 4, 2, 2],
    &[2, 2, 6, 6],
    &[6, 4],
    &[2, 3, 3, 3],
    &[3, 7],
];

/// Runs the full grid: presets × σ ∈ {0.1, 1} × {with, without centering} ×
/// {with, without affine} × the given seeds.
pub fn gradient_suite(presets: &[PresetKind], seeds: std::ops::Range<u64>) -> Result<Vec<GradCheckReport>> {
    let mut reports = Vec::new();
    for &preset in presets {
        for &sigma in &[0.1, 1.0] {
            for &centered in &[true, false] {
                for &affine in &[true, false] {
                    for seed in seeds.clone() {
                        let shape = SUITE_SHAPES[seed as usize % SUITE_SHAPES.len()].to_vec();
                        let case = GradCheckCase {
                            preset,
                            sigma,
                            centered,
                            affine,
                            seed,
                            shape,
                        };
                        reports.push(run_case(&case)?);
                    }
                }
            }
        }
    }
    Ok(reports)
}

/// Verifies one grid point.
pub fn run_case(case: &GradCheckCase) -> Result<GradCheckReport> {
    let shape = &case.shape;
    let layout = if shape.len() == 4 {
        InputLayout::Image
    } else {
        InputLayout::Features
    };
    let channels = shape[1];
    let mut pcfg = PresetConfig::new(case.preset, layout, channels);
    pcfg.sigma = case.sigma;
    pcfg.dn_window = DnWindow {
        channels: Some(3),
        height: 3,
        width: 3,
    };
    let base = spec_preset(&pcfg)?;
    let region_a = if case.centered {
        base.region_a().copied()
    } else {
        None
    };
    let region_b = *base.region_b();

    let mut rng = ChaCha8Rng::seed_from_u64(case.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let z = random_tensor(&mut rng, shape, -2.0, 2.0);
    // fixed positive weights break the symmetries that would zero gradients
    let weights = random_tensor(&mut rng, shape, 0.5, 1.5);
    let gain = random_tensor(&mut rng, &[channels], 0.5, 1.5);
    let bias = random_tensor(&mut rng, &[channels], -0.5, 0.5);
    let inv_len = 1.0 / z.len() as f64;

    // tape route
    let mut g = Graph::new();
    let zid = g.leaf(z.clone());
    let (gid, bid) = if case.affine {
        (Some(g.leaf(gain.clone())), Some(g.leaf(bias.clone())))
    } else {
        (None, None)
    };
    let taped = normalize_node(&mut g, zid, region_a.as_ref(), &region_b, case.sigma, gid, bid)?;
    let w = g.leaf(weights.clone());
    let prod = g.mul(taped.out, w)?;
    let total = g.sum(prod)?;
    let loss = g.scale(total, inv_len)?;
    let grads = g.backward(loss)?;
    let dz_tape = grads.get_or_zeros(zid, shape);

    // closed-form route against the same forward state
    let mut spec = if case.sigma == 0.0 {
        NormalizerSpec::with_sigma_zero(region_a, region_b)
    } else {
        NormalizerSpec::new(region_a, region_b, case.sigma)?
    };
    if case.affine {
        spec = spec.with_affine(gain.clone(), bias.clone())?;
    }
    let state = taped.state(&g);
    let upstream = weights.scale(inv_len)?;
    let (dz_analytic, dgain_analytic, dbias_analytic) =
        normalize_backward(&state, &spec, &upstream)?;

    let mut analytic_vs_tape = max_abs_diff(&dz_analytic, &dz_tape);
    if case.affine {
        let dgain_tape = grads.get_or_zeros(gid.unwrap(), &[channels]);
        let dbias_tape = grads.get_or_zeros(bid.unwrap(), &[channels]);
        analytic_vs_tape = analytic_vs_tape
            .max(max_abs_diff(dgain_analytic.as_ref().unwrap(), &dgain_tape))
            .max(max_abs_diff(dbias_analytic.as_ref().unwrap(), &dbias_tape));
    }

    // finite-difference route over z (and the affine parameters)
    let mut inputs = vec![z];
    if case.affine {
        inputs.push(gain);
        inputs.push(bias);
    }
    let affine = case.affine;
    let sigma = case.sigma;
    let fd_rel_err = grad_check_vector_multi(
        |g, ids| {
            let (gid, bid) = if affine {
                (Some(ids[1]), Some(ids[2]))
            } else {
                (None, None)
            };
            let taped = normalize_node(g, ids[0], region_a.as_ref(), &region_b, sigma, gid, bid)?;
            let w = g.leaf(weights.clone());
            let prod = g.mul(taped.out, w)?;
            let total = g.sum(prod)?;
            g.scale(total, inv_len)
        },
        &inputs,
        1e-5,
    )?;

    Ok(GradCheckReport {
        case: case.clone(),
        analytic_vs_tape,
        fd_rel_err,
    })
}

/// Uniform random tensor in [lo, hi).
pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let len: usize = shape.iter().product();
    let data: Vec<f64> = (0..len).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(shape.to_vec(), data).expect("random tensor construction")
}

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
