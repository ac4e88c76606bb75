//! Small synthetic-data generators used as stand-ins for a trained generative
//! model. The bandwidth of the smoothed bootstrap acts as a privacy knob:
//! the smaller it is, the more closely individual real records are mimicked.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datamodel::Dataset;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_MEMORIZE_BANDWIDTH: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Resample a real point and add `N(0, h^2)` per coordinate.
    SmoothedBootstrap,
    /// Smoothed bootstrap with a tiny bandwidth.
    Memorize,
    /// Diagonal Gaussian matched to the real per-coordinate mean and variance.
    GaussianFit,
}

impl std::str::FromStr for GeneratorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smoothed_bootstrap" => Ok(Self::SmoothedBootstrap),
            "memorize" => Ok(Self::Memorize),
            "gaussian_fit" => Ok(Self::GaussianFit),
            other => Err(invalid("kind", format!("unknown generator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub bandwidth: f64,
    pub count: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn memorize(count: usize, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::Memorize,
            bandwidth: DEFAULT_MEMORIZE_BANDWIDTH,
            count,
            seed,
        }
    }

    pub fn smoothed_bootstrap(bandwidth: f64, count: usize, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::SmoothedBootstrap,
            bandwidth,
            count,
            seed,
        }
    }

    pub fn gaussian_fit(count: usize, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::GaussianFit,
            bandwidth: 0.0,
            count,
            seed,
        }
    }
}

pub fn generate(real: &Dataset, spec: &GeneratorSpec) -> Result<Dataset> {
    if !(spec.bandwidth >= 0.0 && spec.bandwidth.is_finite()) {
        return Err(invalid(
            "bandwidth",
            format!("{} must be non-negative", spec.bandwidth),
        ));
    }
    if spec.count < 2 {
        return Err(invalid(
            "count",
            format!("{} must be at least 2", spec.count),
        ));
    }
    real.require_len(1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        GeneratorKind::SmoothedBootstrap | GeneratorKind::Memorize => {
            bootstrap(real, spec.bandwidth, spec.count, &mut rng)
        }
        GeneratorKind::GaussianFit => gaussian_fit(real, spec.count, &mut rng),
    }
}

fn bootstrap(real: &Dataset, h: f64, count: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let dim = real.dim();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut values = Vec::with_capacity(count * dim);
    let mut labels = real.labels().map(|_| Vec::with_capacity(count));
    for _ in 0..count {
        let src = rng.gen_range(0..real.len());
        for &x in real.point(src) {
            let noise = if h > 0.0 { h * normal.sample(rng) } else { 0.0 };
            values.push(x + noise);
        }
        if let (Some(out), Some(src_labels)) = (labels.as_mut(), real.labels()) {
            out.push(src_labels[src]);
        }
    }
    Dataset::from_flat(values, dim, labels)
}

fn gaussian_fit(real: &Dataset, count: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let dim = real.dim();
    let n = real.len() as f64;
    let mut mean = vec![0.0; dim];
    for p in real.points() {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x / n;
        }
    }
    let mut var = vec![0.0; dim];
    for p in real.points() {
        for ((v, x), m) in var.iter_mut().zip(p).zip(&mean) {
            *v += (x - m) * (x - m) / n;
        }
    }
    let std: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut values = Vec::with_capacity(count * dim);
    let mut labels = real.labels().map(|_| Vec::with_capacity(count));
    for _ in 0..count {
        for c in 0..dim {
            values.push(mean[c] + std[c] * normal.sample(rng));
        }
        if let (Some(out), Some(src)) = (labels.as_mut(), real.labels()) {
            out.push(src[rng.gen_range(0..src.len())]);
        }
    }
    Dataset::from_flat(values, dim, labels)
}
