//! Machine-readable audit reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::adjacency::KlSample;
use crate::bounds::PrivacyEstimate;
use crate::datamodel::Dataset;

pub const SCHEMA_VERSION: &str = "1";

/// One audit run. Carries every parameter needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub schema_version: String,
    pub n_real: usize,
    pub n_synthetic: usize,
    pub dim: usize,
    pub k_removed: usize,
    pub n_pairs: usize,
    pub nn_order: usize,
    pub direction: String,
    pub seed: u64,
    pub mean_kl: f64,
    pub variance: f64,
    pub upper_semivariance: f64,
    pub mu: f64,
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl_samples: Option<Vec<f64>>,
}

impl AuditReport {
    pub fn new(
        real: &Dataset,
        synthetic: &Dataset,
        estimate: &PrivacyEstimate,
        samples: Option<&[KlSample]>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            n_real: real.len(),
            n_synthetic: synthetic.len(),
            dim: real.dim(),
            k_removed: estimate.k_removed,
            n_pairs: estimate.n_samples,
            nn_order: estimate.nn_order,
            direction: estimate.direction.as_str().to_string(),
            seed: estimate.seed,
            mean_kl: estimate.mean_loss,
            variance: estimate.variance,
            upper_semivariance: estimate.upper_semivariance,
            mu: estimate.mu,
            gamma: estimate.gamma,
            kl_samples: samples.map(|s| s.iter().map(|k| k.loss).collect()),
        }
    }

    /// Single-line JSON object terminated by a newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// `key: value` lines in field order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| writeln!(s, "{k}: {v}").unwrap();
        line("schema_version", self.schema_version.clone());
        line("n_real", self.n_real.to_string());
        line("n_synthetic", self.n_synthetic.to_string());
        line("dim", self.dim.to_string());
        line("k_removed", self.k_removed.to_string());
        line("n_pairs", self.n_pairs.to_string());
        line("nn_order", self.nn_order.to_string());
        line("direction", self.direction.clone());
        line("seed", self.seed.to_string());
        line("mean_kl", format!("{:?}", self.mean_kl));
        line("variance", format!("{:?}", self.variance));
        line(
            "upper_semivariance",
            format!("{:?}", self.upper_semivariance),
        );
        line("mu", format!("{:?}", self.mu));
        line("gamma", format!("{:?}", self.gamma));
        if let Some(samples) = &self.kl_samples {
            let joined: Vec<String> = samples.iter().map(|v| format!("{v:?}")).collect();
            line("kl_samples", joined.join(","));
        }
        s
    }
}
