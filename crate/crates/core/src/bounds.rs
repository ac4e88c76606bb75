//! Tail bounds on the expected privacy loss.
//!
//! Uses Chebyshev's inequality in its semi-variance form,
//! `P(X >= E[X] + k*sigma) <= sigma_plus^2 / (k^2 * sigma^2)`. Fixing the
//! right-hand side to `gamma` and solving for the threshold gives
//! `mu = E[X] + sigma_plus / sqrt(gamma)`; sigma cancels.

use serde::{Deserialize, Serialize};

use crate::adjacency::Direction;
use crate::error::{invalid, Error, Result};

/// Aggregated audit result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyEstimate {
    pub mean_loss: f64,
    /// Population variance.
    pub variance: f64,
    /// Population upper semi-variance (mass strictly above the mean).
    pub upper_semivariance: f64,
    pub mu: f64,
    pub gamma: f64,
    pub n_samples: usize,
    pub k_removed: usize,
    pub direction: Direction,
    pub nn_order: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub upper_semivariance: f64,
}

/// Population mean, variance and upper semi-variance.
pub fn moments(samples: &[f64]) -> Result<Moments> {
    if samples.len() < 2 {
        return Err(Error::Undersized {
            found: samples.len(),
            required: 2,
        });
    }
    if let Some(index) = samples.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mut variance = 0.0;
    let mut upper = 0.0;
    for &x in samples {
        let dev = (x - mean) * (x - mean);
        variance += dev;
        if x > mean {
            upper += dev;
        }
    }
    Ok(Moments {
        mean,
        variance: variance / n,
        upper_semivariance: upper / n,
    })
}

/// Threshold `mu` exceeded with probability at most `gamma`.
///
/// Only the moment fields and `mu`, `gamma`, `n_samples` are filled in; the
/// audit metadata keeps its defaults until the caller sets it.
pub fn chebyshev_mu(samples: &[f64], gamma: f64) -> Result<PrivacyEstimate> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", format!("{gamma} is not in (0, 1)")));
    }
    let m = moments(samples)?;
    let mu = if m.upper_semivariance > 0.0 {
        m.mean + m.upper_semivariance.sqrt() / gamma.sqrt()
    } else {
        m.mean
    };
    Ok(PrivacyEstimate {
        mean_loss: m.mean,
        variance: m.variance,
        upper_semivariance: m.upper_semivariance,
        mu,
        gamma,
        n_samples: samples.len(),
        k_removed: 1,
        direction: Direction::default(),
        nn_order: 1,
        seed: 0,
    })
}

/// Bound on the probability of exceeding `mu`, clipped to 1.
pub fn chebyshev_gamma(samples: &[f64], mu: f64) -> Result<f64> {
    let m = moments(samples)?;
    if mu.is_nan() || mu <= m.mean {
        return Err(invalid(
            "mu",
            format!("{mu} must exceed the sample mean {}", m.mean),
        ));
    }
    let gap = mu - m.mean;
    Ok((m.upper_semivariance / (gap * gap)).min(1.0))
}
