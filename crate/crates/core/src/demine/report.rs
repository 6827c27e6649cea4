use serde::{Deserialize, Serialize};

use super::train::TrainConfig;
use crate::bounds::{mine_f_range, BoundKind};
use crate::confidence::{significance_verdict, Verdict};
use crate::error::{invalid, Result};
use crate::meta::MetaConfig;

/// Result of one estimator run.
///
/// For predictive estimators `epsilon` is the two-sided half-width at
/// confidence `1 − delta` computed from `(L, U, n_val, delta)` alone, and
/// `significance` is the verdict on `point_estimate − epsilon`. Methods with
/// no valid interval leave both empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: String,
    pub bound_kind: Option<BoundKind>,
    /// Nats.
    pub point_estimate: f64,
    pub epsilon: Option<f64>,
    pub delta: f64,
    pub n_val: usize,
    pub n_train: usize,
    pub score_lower: Option<f64>,
    pub score_upper: Option<f64>,
    pub significance: Option<Verdict>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<MetaConfig>,
    /// Samples the parametric MINE bound would need for `ε = 0.1` at this
    /// report's `delta`, shown for methods without a predictive interval.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mine_samples_required: Option<u64>,
    /// Only filled in when timing is requested; omitted otherwise so reports
    /// stay byte-reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

impl EstimateReport {
    /// `point_estimate − epsilon`, the confident lower bound.
    pub fn confident_lower_bound(&self) -> Option<f64> {
        self.epsilon.map(|e| self.point_estimate - e)
    }

    pub fn is_dependent(&self) -> bool {
        self.significance == Some(Verdict::Dependent)
    }

    /// Check the type invariants.
    pub fn validate(&self) -> Result<()> {
        if !self.point_estimate.is_finite() {
            return invalid(format!("{}: non-finite point estimate", self.method));
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0) {
                return invalid(format!("{}: negative epsilon {e}", self.method));
            }
            if self.significance != Some(significance_verdict(self.point_estimate, e)) {
                return invalid(format!("{}: verdict inconsistent with estimate and epsilon", self.method));
            }
        } else if self.significance.is_some() {
            return invalid(format!("{}: verdict without epsilon", self.method));
        }
        if let (Some(BoundKind::MineF), Some(l), Some(u)) =
            (self.bound_kind, self.score_lower, self.score_upper)
        {
            let (lo, hi) = mine_f_range(l, u);
            let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
            if self.point_estimate < lo - slack || self.point_estimate > hi + slack {
                return invalid(format!(
                    "{}: estimate {} outside [{lo}, {hi}]",
                    self.method, self.point_estimate
                ));
            }
        }
        Ok(())
    }
}
