//! End-to-end acceptance checks. Each test prints one `criterion N: PASS|FAIL` line.
//!
//! Run with `cargo test --release --test acceptance`.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use synthpriv::bounds::{chebyshev_gamma, chebyshev_mu, moments};
use synthpriv::divergence::kl_estimate;
use synthpriv::inversion::{invert, train_mlp, MlpModel};
use synthpriv::mechanism::{calibrate_sigma, clip_norm, dp_layer};
use synthpriv::neighbors::brute_nearest;
use synthpriv::synthgen::{generate, GeneratorSpec};
use synthpriv::{audit, AuditConfig, Dataset, FeatureVector, NeighborIndex};

fn report(n: u32, pass: bool, detail: String) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    // straight to the stream so the line shows without --nocapture
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn gaussian(n: usize, dim: usize, shift: f64, rng: &mut impl Rng) -> Dataset {
    let values = (0..n * dim)
        .map(|_| shift + rng.sample::<f64, _>(StandardNormal))
        .collect();
    Dataset::from_flat(values, dim, None).unwrap()
}

#[test]
fn criterion_1_kl_estimator() {
    let start = Instant::now();
    let mut shifted = 0.0;
    let mut same = 0.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = gaussian(5000, 1, 0.0, &mut rng);
        let q = gaussian(5000, 1, 1.0, &mut rng);
        shifted += kl_estimate(&p, &q, 1).unwrap().value / 10.0;

        let a = gaussian(10_000, 2, 0.0, &mut rng);
        let b = gaussian(10_000, 2, 0.0, &mut rng);
        same += kl_estimate(&a, &b, 1).unwrap().value / 10.0;
    }
    let elapsed = start.elapsed();
    // KL(N(0,1) || N(1,1)) = 1/2
    let pass =
        (shifted - 0.5).abs() <= 0.15 && same.abs() <= 0.05 && elapsed < Duration::from_secs(10);
    report(
        1,
        pass,
        format!("shifted={shifted:.4} (0.5 +/- 0.15) self={same:.4} (0 +/- 0.05) in {elapsed:.2?}"),
    );
}

#[test]
fn criterion_2_neighbor_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0;
    let datasets = 120;
    for _ in 0..datasets {
        let n = rng.gen_range(1..=2000);
        let dim = rng.gen_range(1..=16);
        // coarse grid values force plenty of distance ties
        let coarse = rng.gen_bool(0.3);
        let values: Vec<f64> = (0..n * dim)
            .map(|_| {
                if coarse {
                    rng.gen_range(0..4) as f64
                } else {
                    rng.gen_range(-10.0..10.0)
                }
            })
            .collect();
        let data = Dataset::from_flat(values, dim, None).unwrap();
        let index = NeighborIndex::build(&data).unwrap();
        for _ in 0..10 {
            let query: Vec<f64> = if rng.gen_bool(0.5) {
                data.point(rng.gen_range(0..n)).to_vec()
            } else {
                (0..dim).map(|_| rng.gen_range(-12.0..12.0)).collect()
            };
            let exclude: Vec<usize> = (0..rng.gen_range(0..=n.min(3) - 1))
                .map(|_| rng.gen_range(0..n))
                .collect();
            let mut distinct = exclude.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let available = n - distinct.len();
            let count = rng.gen_range(1..=available.min(20));
            let tree = index.nearest(&query, count, &exclude).unwrap();
            let brute = brute_nearest(&data, &query, count, &exclude).unwrap();
            if tree != brute {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches == 0 && elapsed < Duration::from_secs(30);
    report(
        2,
        pass,
        format!("{datasets} datasets x 10 queries, {mismatches} mismatches in {elapsed:.2?}"),
    );
}

#[test]
fn criterion_3_chebyshev_arithmetic() {
    let est = chebyshev_mu(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.01).unwrap();
    let mu_ok = (est.mu - 13.0).abs() < 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_roundtrip: f64 = 0.0;
    let mut semivariance_ok = true;
    for _ in 0..1000 {
        let len = rng.gen_range(2..200);
        let scale = rng.gen_range(0.01..100.0);
        let samples: Vec<f64> = (0..len).map(|_| rng.gen::<f64>().powi(3) * scale).collect();
        let m = moments(&samples).unwrap();
        semivariance_ok &= m.upper_semivariance <= m.variance;
        if m.upper_semivariance > 0.0 {
            let gamma = rng.gen_range(1e-6..0.999);
            let mu = chebyshev_mu(&samples, gamma).unwrap().mu;
            let back = chebyshev_gamma(&samples, mu).unwrap();
            worst_roundtrip = worst_roundtrip.max(((back - gamma) / gamma).abs());
        }
    }
    let pass = mu_ok && worst_roundtrip <= 1e-9 && semivariance_ok;
    report(
        3,
        pass,
        format!(
            "mu={} (13.0), worst gamma round-trip rel err {worst_roundtrip:.2e}, semivariance<=variance on 1000 sets: {semivariance_ok}",
            est.mu
        ),
    );
}

#[test]
fn criterion_4_calibration() {
    let sigma = calibrate_sigma(1.0, 1e-5, 1.0).unwrap();
    let value_ok = (sigma - 4.8448).abs() <= 1e-4;

    let grid = [1e-3, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0];
    let deltas = [1e-12, 1e-9, 1e-6, 1e-5, 1e-3, 0.01, 0.1, 0.5, 0.9];
    let mut monotone = true;
    for &e in &grid {
        for &d in &deltas {
            for &c in &grid {
                let s = calibrate_sigma(e, d, c).unwrap();
                monotone &= s > 0.0;
                monotone &= calibrate_sigma(e * 1.5, d, c).unwrap() < s;
                monotone &= calibrate_sigma(e, d * 1.05, c).unwrap() < s;
                monotone &= calibrate_sigma(e, d, c * 1.5).unwrap() > s;
            }
        }
    }
    let pass = value_ok && monotone;
    report(
        4,
        pass,
        format!("sigma(1, 1e-5, 1)={sigma:.6} (4.8448 +/- 1e-4), monotone on grid: {monotone}"),
    );
}

#[test]
fn criterion_5_dp_layer() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut clip_ok = true;
    for _ in 0..10_000 {
        let dim = rng.gen_range(1..10);
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let a = FeatureVector::new((0..dim).map(|_| rng.gen_range(-1.0..1.0) * scale).collect())
            .unwrap();
        let c = 10f64.powf(rng.gen_range(-2.0..2.0));
        let out = dp_layer(&a, c, 0.0, &mut rng).unwrap();
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        clip_ok &= norm <= c;
    }

    let a = FeatureVector::new(vec![3.0, 4.0]).unwrap();
    let clipped = clip_norm(&a, 1.0).unwrap();
    let draws = 1_000_000usize;
    let residuals: Vec<f64> = (0..draws)
        .flat_map(|_| {
            let y = dp_layer(&a, 1.0, 1.5, &mut rng).unwrap();
            [y[0] - clipped[0], y[1] - clipped[1]]
        })
        .collect();
    let mut detail = format!("clip norm<=C on 10000 vectors: {clip_ok}");
    let mut pass = clip_ok;
    for c in 0..2 {
        let r: Vec<f64> = residuals.iter().skip(c).step_by(2).copied().collect();
        let n = r.len() as f64;
        let mean = r.iter().sum::<f64>() / n;
        let var = r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        let skew = r.iter().map(|x| ((x - mean) / sd).powi(3)).sum::<f64>() / n;
        let kurt = r.iter().map(|x| ((x - mean) / sd).powi(4)).sum::<f64>() / n - 3.0;
        let se = 1.5 / n.sqrt();
        let ok = mean.abs() <= 4.0 * se
            && (var / 2.25 - 1.0).abs() <= 0.01
            && skew.abs() <= 0.02
            && kurt.abs() <= 0.02;
        pass &= ok;
        detail += &format!(
            "; coord {c}: mean={mean:.5} ({:.2} SE) var={var:.4} skew={skew:.4} ex.kurt={kurt:.4}",
            mean.abs() / se
        );
    }
    report(5, pass, detail);
}

fn mean_mu(generator: impl Fn(&Dataset, u64) -> Dataset, k_override: Option<usize>) -> f64 {
    let seeds = 5u64;
    let mut total = 0.0;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let real = gaussian(500, 2, 0.0, &mut rng);
        let synthetic = generator(&real, seed);
        let config = AuditConfig {
            n_pairs: 50,
            k_override,
            seed,
            ..Default::default()
        };
        total += audit(&real, &synthetic, &config).unwrap().0.mu;
    }
    total / seeds as f64
}

#[test]
fn criterion_6_bandwidth_lowers_mu() {
    let start = Instant::now();
    let memorize = |r: &Dataset, s| generate(r, &GeneratorSpec::memorize(500, s)).unwrap();
    let smoothed =
        |r: &Dataset, s| generate(r, &GeneratorSpec::smoothed_bootstrap(0.5, 500, s)).unwrap();
    let mu_mem = mean_mu(memorize, Some(1));
    let mu_smooth = mean_mu(smoothed, Some(1));
    let elapsed = start.elapsed();
    // the data-driven neighbourhood size, for reference only
    let auto_mem = mean_mu(memorize, None);
    let auto_smooth = mean_mu(smoothed, None);
    let pass = mu_mem > mu_smooth && elapsed < Duration::from_secs(120);
    report(
        6,
        pass,
        format!(
            "k=1: mu(memorize)={mu_mem:.3} > mu(h=0.5)={mu_smooth:.3} in {elapsed:.2?} \
             [auto k: {auto_mem:.3} vs {auto_smooth:.3}]"
        ),
    );
}

/// Four unit-variance classes in 8 dimensions, class `c` centred at `3 e_c`.
fn axis_blobs(per_class: usize, seed: u64) -> Dataset {
    let dim = 8;
    let classes = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::with_capacity(per_class * classes);
    let mut labels = Vec::with_capacity(per_class * classes);
    for c in 0..classes {
        for _ in 0..per_class {
            rows.push(
                (0..dim)
                    .map(|j| if j == c { 3.0 } else { 0.0 } + noise.sample(&mut rng))
                    .collect(),
            );
            labels.push(c);
        }
    }
    Dataset::from_rows(&rows, Some(labels)).unwrap()
}

/// Ranks starting at 1; tied values share their average rank.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&average_ranks(a), &average_ranks(b))
}

#[test]
fn spearman_oracle() {
    assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
    assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    assert_eq!(
        average_ranks(&[5.0, 1.0, 5.0, 2.0]),
        vec![3.5, 1.0, 3.5, 2.0]
    );
}

#[test]
fn criterion_7_mu_tracks_inversion_quality() {
    let start = Instant::now();
    let bandwidths = [0.01, 0.1, 0.5, 1.0];
    let seeds = 5u64;
    let mut mus = vec![0.0; bandwidths.len()];
    let mut qualities = vec![0.0; bandwidths.len()];
    for seed in 0..seeds {
        let real = axis_blobs(100, 10 + seed);
        let held_out = axis_blobs(100, 500 + seed).class_subset(0).unwrap();
        let init = FeatureVector::zeros(real.dim()).unwrap();
        for (i, &h) in bandwidths.iter().enumerate() {
            let synthetic = generate(
                &real,
                &GeneratorSpec::smoothed_bootstrap(h, real.len(), seed),
            )
            .unwrap();
            let config = AuditConfig {
                n_pairs: 50,
                k_override: Some(1),
                seed,
                ..Default::default()
            };
            mus[i] += audit(&real, &synthetic, &config).unwrap().0.mu / seeds as f64;
            let trained = train_mlp(&synthetic, &[real.dim(), 16, 4], 500, 0.5, seed).unwrap();
            let attack = invert(&trained.model, 0, 300, 0.1, &init, &held_out).unwrap();
            qualities[i] += attack.quality / seeds as f64;
        }
    }
    let elapsed = start.elapsed();
    let rho = spearman(&mus, &qualities);
    let pass = rho >= 0.5 && elapsed < Duration::from_secs(300);
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    report(
        7,
        pass,
        format!(
            "spearman={rho:.3} (>= 0.5) mu=[{}] quality=[{}] in {elapsed:.2?}",
            fmt(&mus),
            fmt(&qualities)
        ),
    );
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

#[test]
fn criterion_8_gradients() {
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for instance in 0..20u64 {
        let dim = rng.gen_range(1..5);
        let classes = rng.gen_range(2..5);
        let mut sizes = vec![dim];
        for _ in 0..rng.gen_range(1..3) {
            sizes.push(rng.gen_range(2..7));
        }
        sizes.push(classes);
        let mut model = MlpModel::init(&sizes, instance).unwrap();
        // zero biases put dead units exactly on the ReLU kink
        for b in model.biases.iter_mut().flatten() {
            *b = rng.gen_range(-0.5..0.5);
        }
        let n = rng.gen_range(2..8);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
        let data = Dataset::from_rows(&rows, Some(labels)).unwrap();
        let (_, grads) = model.loss_and_gradients(&data).unwrap();
        let loss_at = |m: &MlpModel| m.loss_and_gradients(&data).unwrap().0;

        for l in 0..model.weights.len() {
            for i in 0..model.weights[l].len() {
                let mut plus = model.clone();
                plus.weights[l][i] += h;
                let mut minus = model.clone();
                minus.weights[l][i] -= h;
                let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                worst = worst.max(relative_error(grads.weights[l][i], numeric));
                checked += 1;
            }
            for i in 0..model.biases[l].len() {
                let mut plus = model.clone();
                plus.biases[l][i] += h;
                let mut minus = model.clone();
                minus.biases[l][i] -= h;
                let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
                worst = worst.max(relative_error(grads.biases[l][i], numeric));
                checked += 1;
            }
        }

        let x = &rows[0];
        let target = rng.gen_range(0..classes);
        let analytic = model.input_gradient(x, target).unwrap();
        for j in 0..dim {
            let mut plus = x.clone();
            plus[j] += h;
            let mut minus = x.clone();
            minus[j] -= h;
            let numeric = (model.log_prob(&plus, target).unwrap()
                - model.log_prob(&minus, target).unwrap())
                / (2.0 * h);
            worst = worst.max(relative_error(analytic[j], numeric));
            checked += 1;
        }
    }
    report(
        8,
        worst <= 1e-5,
        format!("{checked} partial derivatives on 20 networks, worst relative error {worst:.2e} (<= 1e-5)"),
    );
}

fn write_blobs_csv(path: &Path) {
    let data = axis_blobs(20, 77);
    let mut text = String::new();
    for (x, y) in data.points().zip(data.labels().unwrap()) {
        let cells: Vec<String> = x[..2].iter().map(|v| format!("{v:?}")).collect();
        text += &format!("{},{}\n", cells.join(","), y % 2);
    }
    std::fs::write(path, text).unwrap();
}

fn run_twice(args: &[&str]) -> bool {
    let run = || {
        let out = Command::new(env!("CARGO_BIN_EXE_synthpriv"))
            .args(args)
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let first = run();
    !first.is_empty() && first == run()
}

#[test]
fn criterion_9_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let labelled = dir.path().join("labelled.csv");
    write_blobs_csv(&labelled);
    let real = dir.path().join("real.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let base = gaussian(200, 2, 0.0, &mut rng);
    std::fs::write(&real, synthpriv::datamodel::to_csv_string(&base)).unwrap();
    let synthetic = dir.path().join("synthetic.csv");
    std::fs::write(
        &synthetic,
        synthpriv::datamodel::to_csv_string(
            &generate(&base, &GeneratorSpec::smoothed_bootstrap(0.3, 200, 1)).unwrap(),
        ),
    )
    .unwrap();
    let (real, synthetic, labelled) = (
        real.to_str().unwrap(),
        synthetic.to_str().unwrap(),
        labelled.to_str().unwrap(),
    );

    let cases: Vec<(&str, Vec<&str>)> = vec![
        (
            "audit",
            vec![
                "audit",
                "--real",
                real,
                "--synthetic",
                synthetic,
                "--pairs",
                "20",
                "--emit-samples",
            ],
        ),
        (
            "audit text",
            vec![
                "audit",
                "--real",
                real,
                "--synthetic",
                synthetic,
                "--pairs",
                "20",
                "--format",
                "text",
            ],
        ),
        (
            "calibrate",
            vec!["calibrate", "--epsilon", "1", "--delta", "1e-5"],
        ),
        (
            "gen",
            vec![
                "gen",
                "--real",
                real,
                "--kind",
                "smoothed_bootstrap",
                "--bandwidth",
                "0.2",
                "--seed",
                "3",
            ],
        ),
        (
            "gen gaussian_fit",
            vec![
                "gen",
                "--real",
                labelled,
                "--labels",
                "--kind",
                "gaussian_fit",
            ],
        ),
        (
            "attack",
            vec![
                "attack", "--train", labelled, "--epochs", "100", "--steps", "50",
            ],
        ),
    ];
    let mut failed = Vec::new();
    for (name, args) in &cases {
        if !run_twice(args) {
            failed.push(*name);
        }
    }
    report(
        9,
        failed.is_empty(),
        format!(
            "{} invocations byte-identical across two runs; differing: {failed:?}",
            cases.len()
        ),
    );
}
