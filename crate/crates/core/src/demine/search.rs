use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::{train_critic, TrainConfig};
use crate::bounds::{estimate, BoundKind};
use crate::confidence::{demine_epsilon, ScoreBounds};
use crate::dataset::PairedDataset;
use crate::error::{invalid, Result};
use crate::seed;

/// Hyperparameter selection objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// `μ − 2σ/√folds`
    Vr,
    /// `μ − ε(held-out fold size)`
    Sig,
}

impl Objective {
    pub fn suffix(&self) -> &'static str {
        match self {
            Objective::Vr => "vr",
            Objective::Sig => "sig",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchCriterion {
    pub objective: Objective,
    pub folds: usize,
    /// Number of random trials.
    pub trials: usize,
    /// Confidence level used by the `Sig` objective.
    pub delta: f64,
}

impl SearchCriterion {
    pub fn new(objective: Objective, trials: usize) -> Self {
        SearchCriterion {
            objective,
            folds: 3,
            trials,
            delta: 0.05,
        }
    }
}

/// Ranges sampled by the random search. `eta`, `iterations` and `scale` are
/// log-uniform; the rest uniform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub layers: (usize, usize),
    pub hidden: (usize, usize),
    pub eta: (f64, f64),
    pub iterations: (usize, usize),
    pub batch: (usize, usize),
    pub scale: (f64, f64),
    pub shift: (f64, f64),
}

impl SearchSpace {
    pub fn gaussian() -> Self {
        SearchSpace {
            layers: (1, 5),
            hidden: (8, 256),
            eta: (1e-4, 3e-1),
            iterations: (5, 200),
            batch: (256, 1024),
            scale: (1e-3, 5.0),
            shift: (-1.0, 1.0),
        }
    }

    /// Same as [`SearchSpace::gaussian`] with up to 5000 iterations.
    pub fn sine() -> Self {
        SearchSpace {
            iterations: (5, 5000),
            ..SearchSpace::gaussian()
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, seed: u64) -> TrainConfig {
        let log_uniform = |rng: &mut R, (lo, hi): (f64, f64)| -> f64 {
            rng.random_range(lo.ln()..=hi.ln()).exp()
        };
        let layers = rng.random_range(self.layers.0..=self.layers.1);
        let hidden = rng.random_range(self.hidden.0..=self.hidden.1);
        let eta = log_uniform(rng, self.eta);
        let iterations = log_uniform(rng, (self.iterations.0 as f64, self.iterations.1 as f64))
            .round() as usize;
        let batch = rng.random_range(self.batch.0..=self.batch.1);
        let scale = log_uniform(rng, self.scale);
        let shift = rng.random_range(self.shift.0..=self.shift.1);
        TrainConfig {
            layers,
            hidden,
            eta,
            iterations,
            batch,
            scale,
            shift,
            seed,
        }
    }
}

/// One row of the search trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub config: TrainConfig,
    pub fold_estimates: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub score: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: TrainConfig,
    pub best_trial: usize,
    pub trials: Vec<TrialRecord>,
}

impl SearchOutcome {
    /// Trace as CSV, one row per trial.
    pub fn write_trace_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "trial", "layers", "hidden", "eta", "iterations", "batch", "scale", "shift", "seed",
            "cv_mean", "cv_std", "score", "error",
        ])?;
        for t in &self.trials {
            let c = &t.config;
            w.write_record([
                t.trial.to_string(),
                c.layers.to_string(),
                c.hidden.to_string(),
                c.eta.to_string(),
                c.iterations.to_string(),
                c.batch.to_string(),
                c.scale.to_string(),
                c.shift.to_string(),
                c.seed.to_string(),
                t.mean.to_string(),
                t.std.to_string(),
                t.score.to_string(),
                t.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Held-out MINE-f estimate of each fold. Folds are contiguous chunks of a
/// shuffle seeded by `fold_seed`; training inside fold `f` uses a seed derived
/// from `cfg.seed` and `f`.
pub fn cross_validate(
    train: &PairedDataset,
    cfg: &TrainConfig,
    folds: usize,
    fold_seed: u64,
) -> Result<Vec<f64>> {
    let parts = fold_indices(train.len(), folds, fold_seed)?;
    let mut out = Vec::with_capacity(folds);
    for (f, held) in parts.iter().enumerate() {
        let rest: Vec<usize> = parts
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, p)| p.iter().copied())
            .collect();
        let fold_cfg = TrainConfig {
            seed: seed::derive_indexed(cfg.seed, "fold", f),
            ..cfg.clone()
        };
        let critic = train_critic(&train.select(&rest, "cv-train"), &fold_cfg)?;
        let held_out = train.select(held, "cv-held-out");
        let scores = critic.scores(held_out.x(), held_out.z())?;
        out.push(estimate(BoundKind::MineF, &scores)?);
    }
    Ok(out)
}

fn fold_indices(n: usize, folds: usize, fold_seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return invalid("cross-validation needs at least 2 folds");
    }
    if n < 2 * folds {
        return invalid(format!("{n} rows are too few for {folds}-fold cross-validation"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(fold_seed));
    Ok((0..folds)
        .map(|f| idx[f * n / folds..(f + 1) * n / folds].to_vec())
        .collect())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Random search over `space`, each trial scored by k-fold cross-validation on
/// `train` only. Returns the highest-scoring configuration (first on ties).
pub fn hyperparameter_search(
    train: &PairedDataset,
    criterion: &SearchCriterion,
    space: &SearchSpace,
    seed: u64,
) -> Result<SearchOutcome> {
    if criterion.trials == 0 {
        return invalid("search budget must be at least 1 trial");
    }
    let folds = criterion.folds;
    let parts = fold_indices(train.len(), folds, seed::derive(seed, &["folds"]))?;
    let smallest_fold = parts.iter().map(Vec::len).min().unwrap_or(0) as u64;
    let mut sampler = seed::rng_for(seed, &["configs"]);
    let configs: Vec<TrainConfig> = (0..criterion.trials)
        .map(|t| space.sample(&mut sampler, seed::derive_indexed(seed, "trial", t)))
        .collect();
    let fold_seed = seed::derive(seed, &["folds"]);
    let trials: Vec<TrialRecord> = configs
        .into_par_iter()
        .enumerate()
        .map(|(trial, config)| {
            match cross_validate(train, &config, folds, fold_seed) {
                Ok(fold_estimates) => {
                    let (mean, std) = mean_std(&fold_estimates);
                    let score = match criterion.objective {
                        Objective::Vr => mean - 2.0 * std / (folds as f64).sqrt(),
                        Objective::Sig => {
                            let (l, u) = config.score_bounds();
                            ScoreBounds::new(l, u)
                                .and_then(|b| demine_epsilon(b, smallest_fold, criterion.delta))
                                .map(|eps| mean - eps)
                                .unwrap_or(f64::NEG_INFINITY)
                        }
                    };
                    TrialRecord {
                        trial,
                        config,
                        fold_estimates,
                        mean,
                        std,
                        score,
                        error: None,
                    }
                }
                Err(e) => TrialRecord {
                    trial,
                    config,
                    fold_estimates: Vec::new(),
                    mean: f64::NAN,
                    std: f64::NAN,
                    score: f64::NEG_INFINITY,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut best_trial = 0;
    for (i, t) in trials.iter().enumerate() {
        if t.score > trials[best_trial].score {
            best_trial = i;
        }
    }
    Ok(SearchOutcome {
        best: trials[best_trial].config.clone(),
        best_trial,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{gen_gaussian, GaussianSpec};

    fn small_space() -> SearchSpace {
        SearchSpace {
            layers: (1, 2),
            hidden: (8, 16),
            iterations: (5, 20),
            ..SearchSpace::gaussian()
        }
    }

    #[test]
    fn samples_stay_in_range() {
        let space = SearchSpace::gaussian();
        let mut rng = seed::rng(3);
        for _ in 0..2000 {
            let c = space.sample(&mut rng, 0);
            assert!((1..=5).contains(&c.layers));
            assert!((8..=256).contains(&c.hidden));
            assert!(c.eta >= 1e-4 * (1.0 - 1e-12) && c.eta <= 0.3 * (1.0 + 1e-12));
            assert!((5..=200).contains(&c.iterations));
            assert!((256..=1024).contains(&c.batch));
            assert!(c.scale >= 1e-3 * (1.0 - 1e-12) && c.scale <= 5.0 * (1.0 + 1e-12));
            assert!((-1.0..=1.0).contains(&c.shift));
            c.validate().unwrap();
        }
    }

    #[test]
    fn single_trial_budget_returns_that_trial() {
        let ds = gen_gaussian(&GaussianSpec { k: 1, rho: 0.5, n: 60, seed: 1 }).unwrap();
        let out = hyperparameter_search(&ds, &SearchCriterion::new(Objective::Vr, 1), &small_space(), 5).unwrap();
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.best, out.trials[0].config);
        assert_eq!(out.best_trial, 0);
    }

    #[test]
    fn best_trial_is_argmax_and_deterministic() {
        let ds = gen_gaussian(&GaussianSpec { k: 1, rho: 0.7, n: 90, seed: 2 }).unwrap();
        for obj in [Objective::Vr, Objective::Sig] {
            let crit = SearchCriterion::new(obj, 6);
            let a = hyperparameter_search(&ds, &crit, &small_space(), 11).unwrap();
            let b = hyperparameter_search(&ds, &crit, &small_space(), 11).unwrap();
            assert_eq!(a, b);
            let best = a.trials[a.best_trial].score;
            assert!(a.trials.iter().all(|t| t.score <= best));
            let first = a.trials.iter().position(|t| t.score == best).unwrap();
            assert_eq!(first, a.best_trial);
            let mut csv = Vec::new();
            a.write_trace_csv(&mut csv).unwrap();
            assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 7);
        }
    }

    #[test]
    fn vr_score_of_constant_estimates_is_zero() {
        let (m, s) = mean_std(&[0.0, 0.0, 0.0]);
        assert_eq!(m - 2.0 * s / 3f64.sqrt(), 0.0);
        let (m, s) = mean_std(&[0.1, 0.12, 0.11]);
        assert!(m - 2.0 * s / 3f64.sqrt() > 0.0);
    }

    #[test]
    fn fold_errors() {
        assert!(fold_indices(10, 1, 0).is_err());
        assert!(fold_indices(5, 3, 0).is_err());
        let parts = fold_indices(10, 3, 0).unwrap();
        let mut all: Vec<usize> = parts.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }
}
