//! Predictive estimation: train a critic on one half of the data, evaluate the
//! MINE-f bound on the other half, and attach a confidence interval that
//! depends only on the score bounds and the validation size.

mod report;
mod search;
mod train;

pub use report::EstimateReport;
pub use search::{
    cross_validate, hyperparameter_search, Objective, SearchCriterion, SearchOutcome, SearchSpace,
    TrialRecord,
};
pub use train::{gradient_step, init_critic, train_critic, train_from, TrainConfig};

use crate::bounds::{estimate, BoundKind};
use crate::confidence::{demine_epsilon, significance_verdict, ScoreBounds};
use crate::dataset::PairedDataset;
use crate::error::Result;
use crate::nn::Critic;
use crate::seed;

/// Fraction of rows used for training.
pub const TRAIN_FRACTION: f64 = 0.5;

/// The train/validation split used by the predictive estimators for `seed`.
pub fn predictive_split(ds: &PairedDataset, seed: u64) -> Result<(PairedDataset, PairedDataset)> {
    ds.split(TRAIN_FRACTION, seed::derive(seed, &["split"]))
}

/// MINE-f estimate of a fixed critic on `val` together with its half-width.
pub fn validation_estimate(critic: &Critic, val: &PairedDataset, delta: f64) -> Result<(f64, f64)> {
    let scores = critic.scores(val.x(), val.z())?;
    let est = estimate(BoundKind::MineF, &scores)?;
    let bounds = ScoreBounds::new(critic.lower_bound(), critic.upper_bound())?;
    let eps = demine_epsilon(bounds, val.len() as u64, delta)?;
    Ok((est, eps))
}

/// Report for an already-trained critic.
pub fn report_for(
    method: &str,
    critic: &Critic,
    val: &PairedDataset,
    n_train: usize,
    delta: f64,
    seed: u64,
) -> Result<EstimateReport> {
    let (est, eps) = validation_estimate(critic, val, delta)?;
    let report = EstimateReport {
        method: method.to_string(),
        bound_kind: Some(BoundKind::MineF),
        point_estimate: est,
        epsilon: Some(eps),
        delta,
        n_val: val.len(),
        n_train,
        score_lower: Some(critic.lower_bound()),
        score_upper: Some(critic.upper_bound()),
        significance: Some(significance_verdict(est, eps)),
        seed,
        config: None,
        meta: None,
        mine_samples_required: None,
        wall_time_secs: None,
    };
    report.validate()?;
    Ok(report)
}

/// 50/50 split, train on the first half with `cfg`, evaluate on the second.
pub fn demine_estimate(ds: &PairedDataset, cfg: &TrainConfig, delta: f64) -> Result<EstimateReport> {
    let (train, val) = predictive_split(ds, cfg.seed)?;
    let critic = train_critic(&train, cfg)?;
    let mut report = report_for("demine", &critic, &val, train.len(), delta, cfg.seed)?;
    report.config = Some(cfg.clone());
    Ok(report)
}

/// Search hyperparameters on the training half, then retrain with the winner
/// on the whole training half and evaluate on validation.
pub fn demine_search_estimate(
    ds: &PairedDataset,
    criterion: &SearchCriterion,
    space: &SearchSpace,
    delta: f64,
    seed: u64,
) -> Result<(EstimateReport, SearchOutcome)> {
    let (train, _) = predictive_split(ds, seed)?;
    let outcome = hyperparameter_search(&train, criterion, space, seed::derive(seed, &["search"]))?;
    let cfg = TrainConfig {
        seed,
        ..outcome.best.clone()
    };
    let mut report = demine_estimate(ds, &cfg, delta)?;
    report.method = format!("demine-{}", criterion.objective.suffix());
    Ok((report, outcome))
}
