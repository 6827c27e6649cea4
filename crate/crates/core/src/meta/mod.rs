//! Meta-DEMINE: learn a critic initialisation over augmented
//! cross-validation tasks, then fine-tune it on the training split.

mod pepg;
mod transform;

pub use pepg::Pepg;
pub use transform::{sample_transform, AugmentationMode, Elementary, TaskTransform, VariableTransform};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::dataset::PairedDataset;
use crate::demine::{gradient_step, init_critic, predictive_split, report_for, train_from, EstimateReport, TrainConfig};
use crate::error::{invalid, Error, Result};
use crate::nn::{AdamState, Critic};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MetaOptimizer {
    Pepg,
    BpttFirstOrder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    /// Outer iterations `N_M`. Zero skips meta-learning entirely.
    pub outer_iterations: usize,
    /// Augmented tasks per outer iteration `N_T`.
    pub tasks_per_iteration: usize,
    /// Fraction of the training split used as meta-train set A.
    pub meta_train_fraction: f64,
    /// Meta step size; `η/3` when unset.
    pub eta_meta: Option<f64>,
    /// Inner adaptation steps; the base config's `iterations` when unset.
    pub inner_iterations: Option<usize>,
    /// Upper limit applied to the inner step count.
    pub inner_cap: usize,
    pub optimizer: MetaOptimizer,
    pub augmentation: String,
    /// Symmetric PEPG pairs.
    pub population: usize,
    pub sigma_init: f64,
    /// Step size of the multiplicative σ update.
    pub sigma_lr: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig {
            outer_iterations: 3000,
            tasks_per_iteration: 1,
            meta_train_fraction: 0.8,
            eta_meta: None,
            inner_iterations: None,
            inner_cap: 30,
            optimizer: MetaOptimizer::Pepg,
            augmentation: "m(P(O(·)))".into(),
            population: 32,
            sigma_init: 0.02,
            sigma_lr: 0.1,
        }
    }
}

impl MetaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.meta_train_fraction > 0.0 && self.meta_train_fraction < 1.0) {
            return invalid(format!("r must lie in (0, 1), got {}", self.meta_train_fraction));
        }
        if self.tasks_per_iteration == 0 {
            return invalid("N_T must be at least 1");
        }
        if let Some(e) = self.eta_meta {
            if !(e > 0.0 && e.is_finite()) {
                return invalid(format!("eta_meta must be positive, got {e}"));
            }
        }
        if self.population == 0 {
            return invalid("population must be at least 1");
        }
        if !(self.sigma_init > 0.0 && self.sigma_init.is_finite()) {
            return invalid(format!("sigma_init must be positive, got {}", self.sigma_init));
        }
        AugmentationMode::parse(&self.augmentation)?;
        Ok(())
    }

    pub fn inner_steps(&self, base: &TrainConfig) -> usize {
        self.inner_iterations.unwrap_or(base.iterations).min(self.inner_cap)
    }

    pub fn meta_step(&self, base: &TrainConfig) -> f64 {
        self.eta_meta.unwrap_or(base.eta / 3.0)
    }
}

/// A cross-validation task with both halves passed through one transform.
#[derive(Clone, Debug)]
pub struct MetaTask {
    pub meta_train: PairedDataset,
    pub meta_val: PairedDataset,
    pub transform: TaskTransform,
}

/// `N_T` tasks: shuffle, first `round(r·n)` rows into A, the rest into B, and
/// one sampled transform applied to both.
pub fn make_tasks(train: &PairedDataset, cfg: &MetaConfig, seed: u64) -> Result<Vec<MetaTask>> {
    cfg.validate()?;
    let mode = AugmentationMode::parse(&cfg.augmentation)?;
    let n = train.len();
    let n_a = (cfg.meta_train_fraction * n as f64).round() as usize;
    if n_a < 2 || n - n_a.min(n) < 2 {
        return invalid(format!(
            "cannot split {n} rows into meta-train/meta-val parts of at least 2 with r = {}",
            cfg.meta_train_fraction
        ));
    }
    (0..cfg.tasks_per_iteration)
        .map(|t| {
            let task_seed = seed::derive_indexed(seed, "task", t);
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut seed::rng_for(task_seed, &["shuffle"]));
            let transform =
                transform::sample_transform_for(train.dim_x(), train.dim_z(), &mode, seed::derive(task_seed, &["transform"]));
            let a = transform.apply(&train.select(&idx[..n_a], "meta-train"))?;
            let b = transform.apply(&train.select(&idx[n_a..], "meta-val"))?;
            Ok(MetaTask {
                meta_train: a,
                meta_val: b,
                transform,
            })
        })
        .collect()
}

/// `steps` full-split Adam iterations on `data` from a fresh optimizer state.
pub fn meta_train_inner(init: &Critic, data: &PairedDataset, eta: f64, steps: usize) -> Result<Critic> {
    let mut critic = init.clone();
    if steps == 0 {
        return Ok(critic);
    }
    let mut adam = AdamState::new(critic.num_params(), eta)?;
    for it in 0..steps {
        gradient_step(&mut critic, &mut adam, data.x(), data.z(), it)?;
    }
    Ok(critic)
}

/// Loss on B after adapting on A, averaged over tasks.
fn meta_objective(critic: &Critic, tasks: &[MetaTask], eta: f64, steps: usize) -> Result<f64> {
    let mut total = 0.0;
    for task in tasks {
        let adapted = meta_train_inner(critic, &task.meta_train, eta, steps)?;
        let scores = adapted.scores(task.meta_val.x(), task.meta_val.z())?;
        total += bounds::loss(&scores)?;
    }
    Ok(total / tasks.len() as f64)
}

fn objective_at(template: &Critic, params: &[f64], tasks: &[MetaTask], eta: f64, steps: usize) -> f64 {
    let mut c = template.clone();
    if c.set_params(params).is_err() {
        return f64::NAN;
    }
    meta_objective(&c, tasks, eta, steps).unwrap_or(f64::NAN)
}

/// Learn `θ_init` on `train`. Starts from the same initialisation as plain
/// DEMINE, so zero outer iterations return it unchanged.
pub fn meta_optimize(train: &PairedDataset, cfg: &MetaConfig, base: &TrainConfig, seed: u64) -> Result<Critic> {
    cfg.validate()?;
    let mut critic = init_critic(train.dim_x(), train.dim_z(), base)?;
    if cfg.outer_iterations == 0 {
        return Ok(critic);
    }
    let steps = cfg.inner_steps(base);
    let eta = base.eta;
    let eta_meta = cfg.meta_step(base);
    match cfg.optimizer {
        MetaOptimizer::Pepg => {
            let mut pepg = Pepg::new(critic.params(), cfg.sigma_init, cfg.population, eta_meta, cfg.sigma_lr)?;
            let mut rng = seed::rng_for(seed, &["pepg"]);
            for it in 0..cfg.outer_iterations {
                let tasks = make_tasks(train, cfg, seed::derive_indexed(seed, "tasks", it))?;
                let mut eps = pepg.sample(&mut rng);
                let mut rewards = evaluate_pairs(&pepg, &critic, &eps, &tasks, eta, steps);
                for k in 0..eps.len() {
                    if rewards[k].0.is_finite() && rewards[k].1.is_finite() {
                        continue;
                    }
                    log::warn!("meta iteration {it}: non-finite objective for member {k}, resampling");
                    eps[k] = pepg.sample_one(&mut rng);
                    rewards[k] = evaluate_pairs(&pepg, &critic, &eps[k..=k], &tasks, eta, steps)[0];
                    if !(rewards[k].0.is_finite() && rewards[k].1.is_finite()) {
                        return Err(Error::Diverged {
                            iteration: it,
                            detail: format!("meta objective of population member {k} is not finite after resampling"),
                        });
                    }
                }
                let (plus, minus): (Vec<f64>, Vec<f64>) = rewards.into_iter().unzip();
                pepg.update(&eps, &plus, &minus)?;
            }
            critic.set_params(pepg.mean())?;
        }
        MetaOptimizer::BpttFirstOrder => {
            let mut adam = AdamState::new(critic.num_params(), eta_meta)?;
            let mut params = critic.params();
            for it in 0..cfg.outer_iterations {
                let tasks = make_tasks(train, cfg, seed::derive_indexed(seed, "tasks", it))?;
                let mut grad = vec![0.0; params.len()];
                for task in &tasks {
                    let adapted = meta_train_inner(&critic, &task.meta_train, eta, steps)?;
                    let trace = adapted.forward_batch(task.meta_val.x(), task.meta_val.z())?;
                    let (_, adjoint) = bounds::loss_with_adjoint(trace.scores())?;
                    let g = adapted.backward(&trace, &adjoint)?.to_flat();
                    for (a, b) in grad.iter_mut().zip(g) {
                        *a += b / tasks.len() as f64;
                    }
                }
                adam.update(&mut params, &grad).map_err(|e| match e {
                    Error::Diverged { detail, .. } => Error::Diverged { iteration: it, detail },
                    other => other,
                })?;
                critic.set_params(&params)?;
            }
        }
    }
    Ok(critic)
}

/// Rewards (negated meta objective) of `μ + ε` and `μ − ε` for each `ε`.
fn evaluate_pairs(
    pepg: &Pepg,
    template: &Critic,
    eps: &[Vec<f64>],
    tasks: &[MetaTask],
    eta: f64,
    steps: usize,
) -> Vec<(f64, f64)> {
    eps.par_iter()
        .map(|e| {
            let (p, m) = pepg.candidates(e);
            (
                -objective_at(template, &p, tasks, eta, steps),
                -objective_at(template, &m, tasks, eta, steps),
            )
        })
        .collect()
}

/// 50/50 split, learn `θ_init` on the training half, fine-tune from it for the
/// inner step count and evaluate on validation.
pub fn meta_demine_estimate(
    ds: &PairedDataset,
    base: &TrainConfig,
    meta: &MetaConfig,
    delta: f64,
) -> Result<EstimateReport> {
    let (train, val) = predictive_split(ds, base.seed)?;
    let theta_init = meta_optimize(&train, meta, base, seed::derive(base.seed, &["meta"]))?;
    let final_cfg = TrainConfig {
        iterations: meta.inner_steps(base),
        ..base.clone()
    };
    let critic = train_from(theta_init, &train, &final_cfg)?;
    let mut report = report_for("meta-demine", &critic, &val, train.len(), delta, base.seed)?;
    report.config = Some(final_cfg);
    report.meta = Some(meta.clone());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demine::demine_estimate;
    use crate::synthetic::{gen_gaussian, GaussianSpec};

    fn base() -> TrainConfig {
        TrainConfig {
            layers: 1,
            hidden: 16,
            eta: 1e-2,
            iterations: 10,
            batch: 512,
            scale: 1.0,
            shift: 0.0,
            seed: 3,
        }
    }

    fn small_meta(n: usize) -> MetaConfig {
        MetaConfig {
            outer_iterations: n,
            population: 2,
            ..MetaConfig::default()
        }
    }

    #[test]
    fn task_sizes_and_disjointness() {
        let ds = gen_gaussian(&GaussianSpec { k: 2, rho: 0.5, n: 200, seed: 1 }).unwrap();
        let cfg = MetaConfig { augmentation: "·".into(), tasks_per_iteration: 2, ..MetaConfig::default() };
        let tasks = make_tasks(&ds, &cfg, 4).unwrap();
        assert_eq!(tasks.len(), 2);
        for t in &tasks {
            assert_eq!((t.meta_train.len(), t.meta_val.len()), (160, 40));
            // identity mode: rows come straight from the source, and A and B are disjoint
            let mut rows: Vec<Vec<u64>> = t
                .meta_train
                .x()
                .row_iter()
                .chain(t.meta_val.x().row_iter())
                .map(|r| r.iter().map(|v| v.to_bits()).collect())
                .collect();
            rows.sort();
            let mut orig: Vec<Vec<u64>> = ds.x().row_iter().map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
            orig.sort();
            assert_eq!(rows, orig);
        }
    }

    #[test]
    fn tasks_from_different_seeds_differ() {
        let ds = gen_gaussian(&GaussianSpec { k: 20, rho: 0.3, n: 50, seed: 1 }).unwrap();
        let cfg = MetaConfig::default();
        let a = make_tasks(&ds, &cfg, 1).unwrap();
        let b = make_tasks(&ds, &cfg, 2).unwrap();
        assert_ne!(a[0].transform, b[0].transform);
    }

    #[test]
    fn degenerate_split_rejected() {
        let ds = gen_gaussian(&GaussianSpec { k: 1, rho: 0.5, n: 4, seed: 1 }).unwrap();
        assert!(make_tasks(&ds, &MetaConfig::default(), 1).is_err());
    }

    #[test]
    fn inner_zero_steps_is_identity() {
        let ds = gen_gaussian(&GaussianSpec { k: 1, rho: 0.5, n: 50, seed: 1 }).unwrap();
        let c = init_critic(1, 1, &base()).unwrap();
        let d = meta_train_inner(&c, &ds, 1e-2, 0).unwrap();
        assert_eq!(c.params(), d.params());
    }

    #[test]
    fn inner_step_keeps_zero_gradient_parameter() {
        // with w = 0 every score is M·(tanh(b) − t), so the encoders get no gradient
        let ds = gen_gaussian(&GaussianSpec { k: 2, rho: 0.5, n: 30, seed: 1 }).unwrap();
        let mut c = init_critic(2, 2, &base()).unwrap();
        c.w = 0.0;
        let d = meta_train_inner(&c, &ds, 1e-2, 1).unwrap();
        assert_eq!(c.f, d.f);
        assert_eq!(c.g, d.g);
    }

    #[test]
    fn inner_adaptation_descends() {
        let mut better = 0;
        for s in 0..5 {
            let ds = gen_gaussian(&GaussianSpec { k: 1, rho: 0.8, n: 100, seed: 10 + s }).unwrap();
            let c = init_critic(1, 1, &TrainConfig { seed: s, ..base() }).unwrap();
            let before = bounds::loss(&c.scores(ds.x(), ds.z()).unwrap()).unwrap();
            let d = meta_train_inner(&c, &ds, 1e-3, 5).unwrap();
            let after = bounds::loss(&d.scores(ds.x(), ds.z()).unwrap()).unwrap();
            if after <= before {
                better += 1;
            }
        }
        assert!(better >= 4);
    }

    #[test]
    fn zero_outer_iterations_returns_init() {
        let ds = gen_gaussian(&GaussianSpec { k: 1, rho: 0.5, n: 60, seed: 1 }).unwrap();
        let c = meta_optimize(&ds, &small_meta(0), &base(), 5).unwrap();
        assert_eq!(c, init_critic(1, 1, &base()).unwrap());
    }

    #[test]
    fn both_optimizers_move_and_are_deterministic() {
        let ds = gen_gaussian(&GaussianSpec { k: 2, rho: 0.5, n: 60, seed: 1 }).unwrap();
        let init = init_critic(2, 2, &base()).unwrap();
        for opt in [MetaOptimizer::Pepg, MetaOptimizer::BpttFirstOrder] {
            let cfg = MetaConfig { optimizer: opt, ..small_meta(3) };
            let a = meta_optimize(&ds, &cfg, &base(), 5).unwrap();
            let b = meta_optimize(&ds, &cfg, &base(), 5).unwrap();
            assert_eq!(a, b);
            assert_ne!(a.params(), init.params());
        }
    }

    #[test]
    fn zero_outer_iterations_matches_demine() {
        let ds = gen_gaussian(&GaussianSpec { k: 3, rho: 0.5, n: 120, seed: 2 }).unwrap();
        let m = meta_demine_estimate(&ds, &base(), &small_meta(0), 0.05).unwrap();
        let d = demine_estimate(&ds, &base(), 0.05).unwrap();
        assert_eq!(m.point_estimate.to_bits(), d.point_estimate.to_bits());
        assert_eq!(m.epsilon, d.epsilon);
        assert_eq!(m.significance, d.significance);
    }

    #[test]
    fn config_validation() {
        assert!(MetaConfig { meta_train_fraction: 1.0, ..MetaConfig::default() }.validate().is_err());
        assert!(MetaConfig { tasks_per_iteration: 0, ..MetaConfig::default() }.validate().is_err());
        assert!(MetaConfig { eta_meta: Some(0.0), ..MetaConfig::default() }.validate().is_err());
        assert!(MetaConfig { augmentation: "mZ".into(), ..MetaConfig::default() }.validate().is_err());
        let b = TrainConfig { eta: 0.03, iterations: 100, ..base() };
        assert_eq!(MetaConfig::default().inner_steps(&b), 30);
        assert!((MetaConfig::default().meta_step(&b) - 0.01).abs() < 1e-15);
    }
}
