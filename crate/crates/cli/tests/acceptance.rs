//! Acceptance gate: every criterion runs at its stated tolerance and prints
//! one pass/fail line (run with `--nocapture` to see them). The criteria are
//! property-based plus smoke-scale training runs; full benchmark-scale
//! accuracy targets are out of scope at desk scale by design.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use normkit_cli::config::parse_config;
use normkit_cli::runner;
use normkit_core::norm::{
    normalize_forward, spec_preset, DnWindow, InputLayout, PresetConfig, PresetKind,
};
use normkit_core::region::region_count;
use normkit_core::tensor::{conv2d, Tensor};
use normkit_core::train::Split;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    let len: usize = shape.iter().product();
    let data: Vec<f64> = (0..len).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn preset(kind: PresetKind, layout: InputLayout, channels: usize, sigma: f64) -> normkit_core::norm::NormalizerSpec {
    let mut cfg = PresetConfig::new(kind, layout, channels);
    cfg.sigma = sigma;
    cfg.sigma_zero_ack = sigma == 0.0;
    cfg.dn_window = DnWindow {
        channels: Some(3),
        height: 3,
        width: 3,
    };
    spec_preset(&cfg).unwrap()
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, Box<dyn Fn() -> String>);
    let criteria: Vec<Criterion> = vec![
        ("gradient suite", Box::new(criterion_1_gradient_suite)),
        ("reduction equivalence", Box::new(criterion_2_reduction)),
        ("scale-invariance dichotomy", Box::new(criterion_3_scale_invariance)),
        ("boundedness", Box::new(criterion_4_boundedness)),
        ("sparsity direction", Box::new(criterion_5_sparsity)),
        ("training smoke analogue", Box::new(criterion_6_training_smoke)),
        ("brute-force oracles", Box::new(criterion_7_oracles)),
        ("run determinism", Box::new(criterion_8_determinism)),
    ];
    let mut failures = Vec::new();
    for (i, (name, body)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(body));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("acceptance {} ({name}): PASS [{secs:.1}s] {detail}", i + 1),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                println!("acceptance {} ({name}): FAIL [{secs:.1}s] {msg}", i + 1);
                failures.push(format!("{} ({name}): {msg}", i + 1));
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}

/// Criterion 1: `normkit gradcheck` passes for all presets × σ ∈ {0.1, 1} ×
/// {with, without centering} × {with, without affine}: analytic vs tape
/// ≤ 1e-12 absolute and both vs central differences ≤ 1e-6 relative,
/// 10 seeds, shapes up to 4×4×6×6, in under 60 s.
fn criterion_1_gradient_suite() -> String {
    let started = Instant::now();
    let output = Command::new(common::normkit_bin())
        .arg("gradcheck")
        .output()
        .unwrap();
    let secs = started.elapsed().as_secs_f64();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(
        output.status.success(),
        "gradcheck exited {:?}: {stdout}",
        output.status.code()
    );
    assert!(
        stdout.contains("all 40 combinations PASS"),
        "unexpected gradcheck output: {stdout}"
    );
    assert!(secs < 60.0, "gradcheck took {secs:.1}s, budget 60s");
    format!("40 combinations × 10 seeds in {secs:.1}s")
}

/// Criterion 2: DN with full-coverage windows is bitwise-equal to LN on 100 random
/// inputs; BN at σ = 0 leaves per-channel mean ≤ 1e-10 and second moment
/// within 1e-10 of 1.
fn criterion_2_reduction() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for round in 0..100 {
        // keep the per-example accumulation set above one element: a lone
        // member centers to exactly zero, which σ = 0 cannot divide
        let shape: Vec<usize> = if round % 2 == 0 {
            let mut s = vec![
                rng.random_range(1..4usize),
                rng.random_range(1..5usize),
                rng.random_range(1..6usize),
                rng.random_range(1..6usize),
            ];
            if s[1] * s[2] * s[3] == 1 {
                s[1] = 2;
            }
            s
        } else {
            vec![rng.random_range(1..6usize), rng.random_range(2..9usize)]
        };
        let layout = if shape.len() == 4 {
            InputLayout::Image
        } else {
            InputLayout::Features
        };
        let z = random_tensor(&mut rng, &shape, -2.0, 2.0);
        let sigma = [0.0, 0.3, 1.0][round % 3];
        let mut ln_cfg = PresetConfig::new(PresetKind::LayerNorm, layout, shape[1]);
        ln_cfg.sigma = sigma;
        ln_cfg.sigma_zero_ack = true;
        let mut dn_cfg = PresetConfig::new(PresetKind::DivisiveNorm, layout, shape[1]);
        dn_cfg.sigma = sigma;
        dn_cfg.sigma_zero_ack = true;
        dn_cfg.dn_window = DnWindow {
            channels: Some(2 * shape[1] - 1),
            height: if shape.len() == 4 { 2 * shape[2] - 1 } else { 1 },
            width: if shape.len() == 4 { 2 * shape[3] - 1 } else { 1 },
        };
        let (ln_out, _) = normalize_forward(&z, &spec_preset(&ln_cfg).unwrap()).unwrap();
        let (dn_out, _) = normalize_forward(&z, &spec_preset(&dn_cfg).unwrap()).unwrap();
        assert_eq!(
            ln_out.data(),
            dn_out.data(),
            "round {round}: DN full coverage diverged from LN on {shape:?}"
        );
    }

    let shape = [4, 3, 6, 6];
    let z = random_tensor(&mut rng, &shape, -2.0, 2.0);
    let spec = preset(PresetKind::BatchNorm, InputLayout::Image, 3, 0.0);
    let (out, _) = normalize_forward(&z, &spec).unwrap();
    let group = (shape[0] * shape[2] * shape[3]) as f64;
    let mut worst_mean = 0.0f64;
    let mut worst_m2 = 0.0f64;
    for c in 0..shape[1] {
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for n in 0..shape[0] {
            for h in 0..shape[2] {
                for w in 0..shape[3] {
                    let y = out.at(&[n, c, h, w]);
                    mean += y;
                    m2 += y * y;
                }
            }
        }
        worst_mean = worst_mean.max((mean / group).abs());
        worst_m2 = worst_m2.max((m2 / group - 1.0).abs());
    }
    assert!(worst_mean <= 1e-10, "BN mean residual {worst_mean}");
    assert!(worst_m2 <= 1e-10, "BN second-moment residual {worst_m2}");
    format!("100 bitwise DN=LN inputs; BN residuals mean {worst_mean:.1e}, m2 {worst_m2:.1e}")
}

/// Criterion 3: σ = 0 presets are invariant to input scaling by c ∈ {0.5, 3}
/// (≤ 1e-10); σ = 1 is demonstrably not (difference ≥ 1e-3).
fn criterion_3_scale_invariance() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let z = random_tensor(&mut rng, &[3, 4, 6, 6], -2.0, 2.0);
    let mut worst_invariant = 0.0f64;
    let mut weakest_break = f64::INFINITY;
    for kind in PresetKind::ALL {
        let spec = preset(kind, InputLayout::Image, 4, 0.0);
        let (base, _) = normalize_forward(&z, &spec).unwrap();
        for &c in &[0.5, 3.0] {
            let (scaled, _) = normalize_forward(&z.scale(c).unwrap(), &spec).unwrap();
            let diff = scaled
                .data()
                .iter()
                .zip(base.data())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            assert!(diff <= 1e-10, "{} σ=0 c={c}: diff {diff}", kind.name());
            worst_invariant = worst_invariant.max(diff);
        }

        let smoothed = preset(kind, InputLayout::Image, 4, 1.0);
        let (base, _) = normalize_forward(&z, &smoothed).unwrap();
        let (scaled, _) = normalize_forward(&z.scale(2.0).unwrap(), &smoothed).unwrap();
        let diff = scaled
            .data()
            .iter()
            .zip(base.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(diff >= 1e-3, "{} σ=1 should break invariance, diff {diff}", kind.name());
        weakest_break = weakest_break.min(diff);
    }
    format!("σ=0 residual ≤ {worst_invariant:.1e}; σ=1 departure ≥ {weakest_break:.1e}")
}

/// Criterion 4: |y_j| ≤ |B_j|^½ and |y_j| ≤ |v_j|/σ on 1000 random tensors with no
/// violation.
fn criterion_4_boundedness() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let shapes: [&[usize]; 4] = [&[2, 3, 4, 4], &[4, 4, 6, 6], &[3, 5], &[5, 2, 3, 3]];
    let mut checked = 0usize;
    for i in 0..1000 {
        let kind = PresetKind::ALL[i % 5];
        let shape = shapes[i % shapes.len()];
        let sigma = [0.0, 0.25, 1.0][i % 3];
        let layout = if shape.len() == 4 {
            InputLayout::Image
        } else {
            InputLayout::Features
        };
        let spec = preset(kind, layout, shape[1], sigma);
        let z = random_tensor(&mut rng, shape, -4.0, 4.0);
        let (out_affine_free, state) = {
            // bound applies to y, not the affine output
            let (y, state) = normalize_forward(&z, &spec).unwrap();
            (y, state)
        };
        let counts = region_count(shape, spec.region_b()).unwrap();
        for j in 0..out_affine_free.len() {
            let y = out_affine_free.data()[j];
            let v = state.v.data()[j];
            let cnt = counts.data()[j];
            assert!(
                y.abs() <= cnt.sqrt() + 1e-12,
                "tensor {i}: |{y}| > sqrt({cnt})"
            );
            if sigma > 0.0 {
                assert!(
                    y.abs() <= v.abs() / sigma + 1e-12,
                    "tensor {i}: |{y}| > |{v}|/{sigma}"
                );
            }
        }
        checked += 1;
    }
    format!("{checked} tensors, zero violations")
}

/// Criterion 5: on blobs, λ = 0.001 vs λ = 0 lowers the final mean |v| in 3/3 fixed
/// seeds while final accuracy stays within two percentage points, in under
/// two minutes.
fn criterion_5_sparsity() -> String {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut gaps = Vec::new();
    for seed in [7u64, 8, 9] {
        let run_with = |lambda: f64| {
            let out_dir = dir
                .path()
                .join(format!("sparsity-{seed}-{lambda}"))
                .display()
                .to_string();
            let value = json!({
                "model": { "kind": "mlp", "hidden": [32] },
                "norm": { "preset": "BN" },
                "train": {
                    "epochs": 5, "batch_size": 32, "seed": seed,
                    "lambda_l1": lambda, "sigma": 1.0
                },
                "data": { "blobs_examples": 400, "blobs_features": 16, "blobs_classes": 4 },
                "output_dir": out_dir,
            });
            let cfg = parse_config(&value.to_string()).unwrap();
            let out = runner::run(&cfg, None).unwrap();
            out.final_record(Split::EvalTrain).unwrap().clone()
        };
        let plain = run_with(0.0);
        let sparse = run_with(0.001);
        assert!(
            sparse.mean_abs_v < plain.mean_abs_v,
            "seed {seed}: mean|v| {} !< {}",
            sparse.mean_abs_v,
            plain.mean_abs_v
        );
        assert!(
            (sparse.accuracy - plain.accuracy).abs() <= 0.02,
            "seed {seed}: accuracy moved {} -> {}",
            plain.accuracy,
            sparse.accuracy
        );
        gaps.push(plain.mean_abs_v - sparse.mean_abs_v);
    }
    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 120.0, "sparsity runs took {secs:.1}s, budget 120s");
    let gaps: Vec<String> = gaps.iter().map(|g| format!("{g:.4}")).collect();
    format!("3/3 seeds, mean|v| gaps [{}], {secs:.1}s", gaps.join(", "))
}

/// Criterion 6: MLP and ConvNet reach ≥ 95 % train accuracy on a 1000-example digit
/// subset (IDX files) within 5 epochs for each of BN/LN/DN; the char-LSTM
/// cuts per-char cross-entropy by ≥ 20 % from epoch 1 to epoch 10 on a
/// ≤ 100 KB corpus; all in under 10 minutes.
fn criterion_6_training_smoke() -> String {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let (images, labels) = common::write_digit_idx(dir.path(), 1000, 1234);
    let mut details = Vec::new();

    for model in ["mlp", "convnet"] {
        for preset_name in ["BN", "LN", "DN"] {
            let out_dir = dir
                .path()
                .join(format!("smoke-{model}-{preset_name}"))
                .display()
                .to_string();
            let model_json = if model == "mlp" {
                json!({ "kind": "mlp", "hidden": [64] })
            } else {
                json!({ "kind": "convnet", "hidden": [6, 12], "kernel": 3 })
            };
            let dn_window = if model == "mlp" { json!([5, 5, 5]) } else { json!([0, 5, 5]) };
            let value = json!({
                "model": model_json,
                "norm": { "preset": preset_name, "dn_window": dn_window },
                "train": {
                    "epochs": 5, "batch_size": 50, "seed": 7,
                    "lr": 0.1, "momentum": 0.9, "sigma": 1.0,
                    "dataset": "mnist-subset"
                },
                "data": {
                    "mnist_images": images.display().to_string(),
                    "mnist_labels": labels.display().to_string(),
                    "mnist_count": 1000
                },
                "output_dir": out_dir,
            });
            let cfg = parse_config(&value.to_string()).unwrap();
            let out = runner::run(&cfg, None).unwrap();
            let acc = out.final_record(Split::EvalTrain).unwrap().accuracy;
            assert!(
                acc >= 0.95,
                "{model}+{preset_name}: train accuracy {acc:.4} < 0.95"
            );
            details.push(format!("{model}+{preset_name} {acc:.3}"));
        }
    }

    let corpus = common::write_corpus(dir.path(), 30_000);
    let value = json!({
        "model": { "kind": "charlstm", "hidden": [32] },
        "norm": { "preset": "LN" },
        "train": {
            "epochs": 10, "batch_size": 32, "seed": 7,
            "lr": 0.2, "momentum": 0.9, "sigma": 1.0,
            "dataset": "tiny-chars", "seq_len": 16
        },
        "data": { "corpus": corpus.display().to_string() },
        "output_dir": dir.path().join("smoke-lstm").display().to_string(),
    });
    let cfg = parse_config(&value.to_string()).unwrap();
    let out = runner::run(&cfg, None).unwrap();
    let ce_at = |epoch: u32| {
        out.records
            .iter()
            .find(|r| r.split == Split::EvalTrain && r.epoch == epoch)
            .unwrap()
            .loss
    };
    let (ce1, ce10) = (ce_at(1), ce_at(10));
    assert!(
        ce10 <= 0.8 * ce1,
        "char-LSTM cross-entropy {ce1:.4} -> {ce10:.4} is less than a 20% drop"
    );
    details.push(format!("lstm CE {ce1:.3}->{ce10:.3}"));

    let secs = started.elapsed().as_secs_f64();
    assert!(secs < 600.0, "smoke runs took {secs:.1}s, budget 600s");
    format!("{} [{secs:.1}s]", details.join(", "))
}

/// Criterion 7: region resolution, region means, and conv2d match exhaustive loop
/// references to 1e-12 on the small-shape grids.
fn criterion_7_oracles() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut conv_cases = 0usize;
    for n in 1..=3usize {
        for c in 1..=3usize {
            for f in 1..=3usize {
                for h in 1..=7usize {
                    for w in 1..=7usize {
                        for &k in &[1usize, 3] {
                            for &pad in &[0usize, k / 2] {
                                if h + 2 * pad < k || w + 2 * pad < k {
                                    continue;
                                }
                                let x = random_tensor(&mut rng, &[n, c, h, w], -1.0, 1.0);
                                let wt = random_tensor(&mut rng, &[f, c, k, k], -1.0, 1.0);
                                let got = conv2d(&x, &wt, pad, 1).unwrap();
                                let want = common::conv_reference(&x, &wt, pad, 1);
                                for (a, b) in got.data().iter().zip(want.data()) {
                                    assert!((a - b).abs() <= 1e-12);
                                }
                                conv_cases += 1;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut region_checks = 0usize;
    for shape in [vec![2usize, 3, 4, 4], vec![3, 2, 5, 5], vec![3, 5], vec![1, 7]] {
        let x = random_tensor(&mut rng, &shape, -2.0, 2.0);
        for region in common::region_grid(shape.len() == 2) {
            let mean = normkit_core::region::region_mean(&x, &region).unwrap();
            for j in common::positions(&shape) {
                let members: Vec<Vec<usize>> = common::positions(&shape)
                    .into_iter()
                    .filter(|k| common::is_member(&region, &shape, &j, k))
                    .collect();
                let resolved =
                    normkit_core::region::resolve_region(&region, &shape, &j).unwrap();
                assert_eq!(resolved, members);
                let want: f64 =
                    members.iter().map(|k| x.at(k)).sum::<f64>() / members.len() as f64;
                assert!((mean.at(&j) - want).abs() <= 1e-12);
                region_checks += 1;
            }
        }
    }
    format!("{conv_cases} conv cases, {region_checks} region positions")
}

/// Criterion 8: a repeated run with identical config and seed produces byte-identical
/// metrics.csv and curves.svg.
fn criterion_8_determinism() -> String {
    let dir = tempfile::tempdir().unwrap();
    let run_into = |name: &str| {
        let out_dir = dir.path().join(name);
        let value = json!({
            "model": { "kind": "mlp", "hidden": [16] },
            "norm": { "preset": "DN", "dn_window": [5, 5, 5] },
            "train": { "epochs": 3, "batch_size": 16, "seed": 21, "lambda_l1": 0.0005 },
            "data": { "blobs_examples": 120, "blobs_features": 8, "blobs_classes": 3 },
            "output_dir": out_dir.display().to_string(),
        });
        let cfg_path = common::write_config(dir.path(), &format!("{name}.json"), &value);
        let output = Command::new(common::normkit_bin())
            .arg("run")
            .arg(&cfg_path)
            .output()
            .unwrap();
        assert!(
            output.status.success(),
            "run failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        out_dir
    };
    let a = run_into("first");
    let b = run_into("second");
    let metrics_a = std::fs::read(a.join("metrics.csv")).unwrap();
    let metrics_b = std::fs::read(b.join("metrics.csv")).unwrap();
    assert_eq!(metrics_a, metrics_b, "metrics.csv differs between runs");
    let curves_a = std::fs::read(a.join("curves.svg")).unwrap();
    let curves_b = std::fs::read(b.join("curves.svg")).unwrap();
    assert_eq!(curves_a, curves_b, "curves.svg differs between runs");
    format!(
        "metrics.csv ({} bytes) and curves.svg ({} bytes) byte-identical",
        metrics_a.len(),
        curves_a.len()
    )
}
