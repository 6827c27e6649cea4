//! Reference estimators: KSG (k-nearest neighbours) and MINE-f trained and
//! evaluated on the same samples with a fixed iteration budget.

mod digamma;
mod kdtree;
mod ksg;

pub use digamma::digamma;
pub use ksg::{ksg_estimate, KsgConfig};

use serde::{Deserialize, Serialize};

use crate::bounds::{estimate, BoundKind};
use crate::confidence::{mine_sample_complexity, MineComplexityInput};
use crate::dataset::PairedDataset;
use crate::demine::{train_critic, EstimateReport, TrainConfig};
use crate::error::{invalid, Result};

/// Stop MINE-f after a fixed number of iterations, normally copied from the
/// selected DEMINE configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopPolicy {
    pub max_iterations: usize,
}

/// Report for a KSG run over the whole dataset.
pub fn ksg_report(ds: &PairedDataset, cfg: &KsgConfig, seed: u64) -> Result<EstimateReport> {
    Ok(EstimateReport {
        method: "ksg".into(),
        bound_kind: None,
        point_estimate: ksg_estimate(ds, cfg)?,
        epsilon: None,
        delta: 0.0,
        n_val: ds.len(),
        n_train: 0,
        score_lower: None,
        score_upper: None,
        significance: None,
        seed,
        config: None,
        meta: None,
        mine_samples_required: None,
        wall_time_secs: None,
    })
}

/// MINE-f with early stopping: train on every sample, then report the bound on
/// those same samples. No confidence interval is attached; the parametric
/// bound's sample requirement at `ε = 0.1` is included for display.
pub fn mine_f_es(
    ds: &PairedDataset,
    critic_cfg: &TrainConfig,
    stop: &EarlyStopPolicy,
    seed: u64,
    delta: f64,
) -> Result<EstimateReport> {
    if ds.len() < 2 {
        return invalid("MINE-f-ES needs at least 2 samples");
    }
    let cfg = TrainConfig {
        iterations: stop.max_iterations,
        seed,
        ..critic_cfg.clone()
    };
    let critic = train_critic(ds, &cfg)?;
    let scores = critic.scores(ds.x(), ds.z())?;
    let est = estimate(BoundKind::MineF, &scores)?;
    let params = critic.params();
    let param_bound = params.iter().fold(0.0f64, |m, p| m.max(p.abs()));
    let required = mine_sample_complexity(&MineComplexityInput {
        d: params.len() as f64,
        score_bound: critic.lower_bound().abs().max(critic.upper_bound().abs()),
        param_bound,
        lipschitz: 1.0,
        eps: 0.1,
        delta,
    })
    .ok();
    let report = EstimateReport {
        method: "mine-f-es".into(),
        bound_kind: Some(BoundKind::MineF),
        point_estimate: est,
        epsilon: None,
        delta,
        n_val: ds.len(),
        n_train: ds.len(),
        score_lower: Some(critic.lower_bound()),
        score_upper: Some(critic.upper_bound()),
        significance: None,
        seed,
        config: Some(cfg),
        meta: None,
        mine_samples_required: required,
        wall_time_secs: None,
    };
    report.validate()?;
    Ok(report)
}
