//! Nearest-neighbour estimation of KL divergence from samples.
//!
//! For samples `x_1..x_n ~ P` and `y_1..y_m ~ Q` in `d` dimensions, the
//! estimate is
//!
//! ```text
//! D(P||Q) ~ (d/n) * sum_i ln(nu_j(x_i) / rho_j(x_i)) + ln(m / (n - 1))
//! ```
//!
//! where `rho_j(x_i)` is the distance from `x_i` to its `j`-th nearest
//! neighbour among the other `P` samples and `nu_j(x_i)` the distance to its
//! `j`-th nearest neighbour among the `Q` samples. Output is in nats.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{validate_pair, Dataset};
use crate::error::{invalid, Error, Result};
use crate::neighbors::NeighborIndex;

/// Distances are floored here before taking logarithms.
pub const DISTANCE_FLOOR: f64 = 1e-12;

/// Largest fraction of terms that may hit [`DISTANCE_FLOOR`].
pub const MAX_FLOORED_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    pub value: f64,
    /// Number of samples from P.
    pub n: usize,
    /// Number of samples from Q.
    pub m: usize,
    pub nn_order: usize,
}

/// Estimates `D(P||Q)` from independent samples of each distribution.
pub fn kl_estimate(
    p_samples: &Dataset,
    q_samples: &Dataset,
    nn_order: usize,
) -> Result<KlEstimate> {
    estimate(p_samples, q_samples, nn_order, None)
}

/// Estimates `D(P||Q)` when some records of `p_samples` are literally present
/// in `q_samples`, as happens when one set is a subset of the other.
///
/// `shared[i] = Some(t)` says that point `i` of P is point `t` of Q. That
/// record is left out of its own `nu` search, exactly as it is left out of
/// its `rho` search, and its bias term uses `m - 1` in place of `m`. With no
/// shared records this reduces to [`kl_estimate`].
pub fn kl_estimate_shared(
    p_samples: &Dataset,
    q_samples: &Dataset,
    nn_order: usize,
    shared: &[Option<usize>],
) -> Result<KlEstimate> {
    if shared.len() != p_samples.len() {
        return Err(invalid(
            "shared",
            format!("{} entries for {} P samples", shared.len(), p_samples.len()),
        ));
    }
    if let Some(&t) = shared.iter().flatten().find(|&&t| t >= q_samples.len()) {
        return Err(invalid("shared", format!("Q index {t} out of range")));
    }
    estimate(p_samples, q_samples, nn_order, Some(shared))
}

/// Larger of the two directed estimates.
pub fn kl_symmetric_max(
    p_samples: &Dataset,
    q_samples: &Dataset,
    nn_order: usize,
) -> Result<KlEstimate> {
    let forward = kl_estimate(p_samples, q_samples, nn_order)?;
    let backward = kl_estimate(q_samples, p_samples, nn_order)?;
    Ok(if backward.value > forward.value {
        backward
    } else {
        forward
    })
}

fn estimate(
    p: &Dataset,
    q: &Dataset,
    nn_order: usize,
    shared: Option<&[Option<usize>]>,
) -> Result<KlEstimate> {
    validate_pair(p, q)?;
    let n = p.len();
    let m = q.len();
    let any_shared = shared.is_some_and(|s| s.iter().any(Option::is_some));
    let q_room = if any_shared { m - 1 } else { m };
    if nn_order == 0 || nn_order > (n - 1).min(q_room) {
        return Err(invalid(
            "nn_order",
            format!("{nn_order} outside 1..={}", (n - 1).min(q_room)),
        ));
    }

    let p_index = NeighborIndex::build(p)?;
    let q_index = NeighborIndex::build(q)?;

    let terms: Vec<(f64, bool)> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(f64, bool)> {
            let x = p.point(i);
            let rho = p_index.kth_distance(x, nn_order, &[i])?;
            let nu = match shared.and_then(|s| s[i]) {
                Some(t) => q_index.kth_distance(x, nn_order, &[t])?,
                None => q_index.kth_distance(x, nn_order, &[])?,
            };
            let floored = rho < DISTANCE_FLOOR || nu < DISTANCE_FLOOR;
            let ratio = nu.max(DISTANCE_FLOOR) / rho.max(DISTANCE_FLOOR);
            Ok((ratio.ln(), floored))
        })
        .collect::<Result<_>>()?;

    let floored = terms.iter().filter(|t| t.1).count();
    if floored as f64 > MAX_FLOORED_FRACTION * n as f64 {
        return Err(Error::Degenerate(format!(
            "{floored} of {n} nearest-neighbour distances are zero"
        )));
    }

    let log_sum: f64 = terms.iter().map(|t| t.0).sum();
    let dim = p.dim() as f64;
    let correction = match shared {
        Some(s) if any_shared => {
            let n_shared = s.iter().filter(|t| t.is_some()).count() as f64;
            let with = ((m - 1) as f64 / (n - 1) as f64).ln();
            let without = (m as f64 / (n - 1) as f64).ln();
            (n_shared * with + (n as f64 - n_shared) * without) / n as f64
        }
        _ => (m as f64 / (n - 1) as f64).ln(),
    };
    let value = dim / n as f64 * log_sum + correction;
    if !value.is_finite() {
        return Err(Error::Degenerate("estimate is not finite".into()));
    }
    Ok(KlEstimate {
        value,
        n,
        m,
        nn_order,
    })
}
