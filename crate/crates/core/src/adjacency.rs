//! Adjacent-dataset simulation on the synthetic set.
//!
//! Removing one real record from the training data is imitated by deleting
//! its `k` most similar synthetic points. Each such deletion yields one
//! adjacent pair `(D, D minus removed)` whose KL divergence is one sample of
//! the expected privacy loss.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datamodel::{validate_pair, Dataset};
use crate::divergence::{kl_estimate, kl_estimate_shared, KlEstimate};
use crate::error::{invalid, Error, Result};
use crate::neighbors::{sq_dist, NeighborIndex};

/// Which KL direction(s) a pair's loss is computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `D(full || reduced)` only.
    Forward,
    /// Larger of the two directions.
    #[default]
    Max,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Max => "max",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Direction::Forward),
            "max" => Ok(Direction::Max),
            other => Err(invalid("direction", format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacentPair {
    /// Synthetic indices deleted, in ascending order.
    pub removed_indices: Vec<usize>,
    pub seed_real_index: usize,
}

impl AdjacentPair {
    /// Synthetic indices that survive the deletion, ascending.
    pub fn kept_indices(&self, synthetic_len: usize) -> Vec<usize> {
        let mut removed = self.removed_indices.iter().peekable();
        (0..synthetic_len)
            .filter(|i| {
                if removed.peek() == Some(&i) {
                    removed.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlSample {
    pub pair: AdjacentPair,
    /// Estimated expected privacy loss in nats.
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub n_pairs: usize,
    pub k_override: Option<usize>,
    pub nn_order: usize,
    pub direction: Direction,
    pub seed: u64,
    pub gamma: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            n_pairs: 100,
            k_override: None,
            nn_order: 1,
            direction: Direction::Max,
            seed: 42,
            gamma: 1e-5,
        }
    }
}

/// Inverse-distance similarity `1 / (1 + |x - y|)`.
pub fn similarity(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(1.0 / (1.0 + sq_dist(x, y).sqrt()))
}

/// Number of synthetic points to delete when the whole estimated divergence
/// `d_hat` is pinned on one record: solving `ln(m / (m - k)) = d_hat` gives
/// `k = m (1 - exp(-d_hat))`, clamped to `[1, max(1, round(0.05 m))]`.
pub fn k_from_divergence(d_hat: f64, m: usize) -> usize {
    let d_hat = d_hat.max(0.0);
    let k_max = ((0.05 * m as f64).round() as usize).max(1);
    let raw = (m as f64 * (1.0 - (-d_hat).exp())).round() as usize;
    raw.clamp(1, k_max)
}

/// Picks `k` from the real-vs-synthetic divergence.
pub fn choose_k(real: &Dataset, synthetic: &Dataset, nn_order: usize) -> Result<usize> {
    validate_pair(real, synthetic)?;
    let d_hat = kl_estimate(real, synthetic, nn_order)?.value;
    Ok(k_from_divergence(d_hat, synthetic.len()))
}

/// Deletes the `k` synthetic points most similar to `seed_point`.
pub fn remove_neighbors(
    synthetic: &Dataset,
    seed_point: &[f64],
    k: usize,
    seed_real_index: usize,
) -> Result<AdjacentPair> {
    let tree = NeighborIndex::build(synthetic)?;
    remove_neighbors_indexed(&tree, seed_point, k, seed_real_index)
}

fn remove_neighbors_indexed(
    tree: &NeighborIndex,
    seed_point: &[f64],
    k: usize,
    seed_real_index: usize,
) -> Result<AdjacentPair> {
    if k == 0 || k >= tree.len() {
        return Err(invalid(
            "k",
            format!("{k} must be in 1..{} (synthetic size)", tree.len()),
        ));
    }
    // similarity is strictly decreasing in distance, so the most similar
    // points are the nearest ones
    let mut removed: Vec<usize> = tree
        .nearest(seed_point, k, &[])?
        .into_iter()
        .map(|h| h.index)
        .collect();
    removed.sort_unstable();
    Ok(AdjacentPair {
        removed_indices: removed,
        seed_real_index,
    })
}

/// KL divergence between the synthetic set and its reduced copy.
pub fn pair_loss(
    synthetic: &Dataset,
    pair: &AdjacentPair,
    nn_order: usize,
    direction: Direction,
) -> Result<KlEstimate> {
    let n = synthetic.len();
    let kept = pair.kept_indices(n);
    let reduced = synthetic.select(kept.iter().copied());

    let mut full_to_reduced = vec![None; n];
    for (r, &f) in kept.iter().enumerate() {
        full_to_reduced[f] = Some(r);
    }
    let forward = kl_estimate_shared(synthetic, &reduced, nn_order, &full_to_reduced)?;
    match direction {
        Direction::Forward => Ok(forward),
        Direction::Max => {
            let reduced_to_full: Vec<Option<usize>> = kept.iter().map(|&f| Some(f)).collect();
            let backward = kl_estimate_shared(&reduced, synthetic, nn_order, &reduced_to_full)?;
            Ok(if backward.value > forward.value {
                backward
            } else {
                forward
            })
        }
    }
}

/// Samples privacy losses, choosing `k` from the data unless overridden.
pub fn sample_losses(
    real: &Dataset,
    synthetic: &Dataset,
    config: &AuditConfig,
) -> Result<Vec<KlSample>> {
    let k = match config.k_override {
        Some(k) => k,
        None => choose_k(real, synthetic, config.nn_order)?,
    };
    sample_losses_with_k(real, synthetic, config, k)
}

/// Samples privacy losses with a fixed `k`. Output follows draw order.
pub fn sample_losses_with_k(
    real: &Dataset,
    synthetic: &Dataset,
    config: &AuditConfig,
    k: usize,
) -> Result<Vec<KlSample>> {
    validate_pair(real, synthetic)?;
    if config.n_pairs == 0 || config.n_pairs > real.len() {
        return Err(invalid(
            "n_pairs",
            format!("{} must be in 1..={}", config.n_pairs, real.len()),
        ));
    }
    if k == 0 || k >= synthetic.len() {
        return Err(invalid(
            "k",
            format!("{k} must be in 1..{}", synthetic.len()),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let draws = index::sample(&mut rng, real.len(), config.n_pairs).into_vec();
    let tree = NeighborIndex::build(synthetic)?;

    draws
        .into_par_iter()
        .map(|r| {
            let pair = remove_neighbors_indexed(&tree, real.point(r), k, r)?;
            let loss = pair_loss(synthetic, &pair, config.nn_order, config.direction)?.value;
            Ok(KlSample { pair, loss })
        })
        .collect()
}
