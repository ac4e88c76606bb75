//! Gaussian mechanism: noise calibration and the clip-then-noise layer.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::datamodel::FeatureVector;
use crate::error::{invalid, Result};

/// Noise scale at the boundary of the Gaussian mechanism's `(epsilon, delta)`
/// guarantee for L2-sensitivity `clip`: `clip * sqrt(2 ln(1.25/delta)) / epsilon`.
///
/// The guarantee needs sigma strictly greater than this value; treat the
/// return as an infimum.
pub fn calibrate_sigma(epsilon: f64, delta: f64, clip: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid("epsilon", format!("{epsilon} must be positive")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("{delta} must lie in (0, 1)")));
    }
    if !(clip > 0.0 && clip.is_finite()) {
        return Err(invalid("clip", format!("{clip} must be positive")));
    }
    Ok(clip * (2.0 * (1.25 / delta).ln()).sqrt() / epsilon)
}

fn l2_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `a` down so its L2 norm is at most `clip`.
pub fn clip_norm(a: &FeatureVector, clip: f64) -> Result<FeatureVector> {
    if !(clip > 0.0 && clip.is_finite()) {
        return Err(invalid("clip", format!("{clip} must be positive")));
    }
    let norm = l2_norm(a);
    if norm <= clip {
        return Ok(a.clone());
    }
    let mut factor = clip / norm;
    let mut out: Vec<f64> = a.iter().map(|x| x * factor).collect();
    // rounding can leave the norm a few ulps above the bound
    while l2_norm(&out) > clip {
        factor *= 1.0 - f64::EPSILON;
        out = a.iter().map(|x| x * factor).collect();
    }
    FeatureVector::new(out)
}

/// `clip_norm(a, clip)` plus i.i.d. `N(0, sigma^2)` noise on every coordinate.
pub fn dp_layer<R: Rng + ?Sized>(
    a: &FeatureVector,
    clip: f64,
    sigma: f64,
    rng: &mut R,
) -> Result<FeatureVector> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", format!("{sigma} must be non-negative")));
    }
    let clipped = clip_norm(a, clip)?;
    if sigma == 0.0 {
        return Ok(clipped);
    }
    let noise = Normal::new(0.0, sigma).map_err(|e| invalid("sigma", e.to_string()))?;
    FeatureVector::new(clipped.iter().map(|x| x + noise.sample(rng)).collect())
}
