use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::dataset::PairedDataset;
use crate::error::{invalid, Error, Result};
use crate::nn::{adam_step, AdamState, Critic, Matrix};
use crate::seed;

/// Architecture and optimisation settings for one critic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Linear layers per encoder.
    pub layers: usize,
    /// Width of every encoder layer, embedding included.
    pub hidden: usize,
    /// Adam learning rate.
    pub eta: f64,
    /// Optimisation steps `N_O`.
    pub iterations: usize,
    /// Minibatch size, capped at the training-set size.
    pub batch: usize,
    /// Score scale `M`.
    pub scale: f64,
    /// Score shift `t`.
    pub shift: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            layers: 2,
            hidden: 32,
            eta: 1e-2,
            iterations: 100,
            batch: 512,
            scale: 1.0,
            shift: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 {
            return invalid("encoders need at least one layer of non-zero width");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return invalid(format!("learning rate must be positive, got {}", self.eta));
        }
        if self.batch < 2 {
            return invalid("batch size must be at least 2");
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return invalid(format!("score scale M must be positive, got {}", self.scale));
        }
        if !(-1.0..=1.0).contains(&self.shift) {
            return invalid(format!("score shift t must lie in [-1, 1], got {}", self.shift));
        }
        Ok(())
    }

    /// `[L, U] = [−M(1+t), M(1−t)]`.
    pub fn score_bounds(&self) -> (f64, f64) {
        (-self.scale * (1.0 + self.shift), self.scale * (1.0 - self.shift))
    }
}

/// Freshly initialised critic for the given input widths.
pub fn init_critic(dim_x: usize, dim_z: usize, cfg: &TrainConfig) -> Result<Critic> {
    cfg.validate()?;
    let mut rng = seed::rng_for(cfg.seed, &["init"]);
    Critic::init(dim_x, dim_z, cfg.layers, cfg.hidden, cfg.scale, cfg.shift, &mut rng)
}

/// One Adam step on the loss of a square batch; returns the pre-step loss.
pub fn gradient_step(
    critic: &mut Critic,
    adam: &mut AdamState,
    x: &Matrix,
    z: &Matrix,
    iteration: usize,
) -> Result<f64> {
    let trace = critic.forward_batch(x, z)?;
    let (loss, adjoint) = bounds::loss_with_adjoint(trace.scores())?;
    if !loss.is_finite() {
        return Err(Error::Diverged {
            iteration,
            detail: format!("training loss is {loss}"),
        });
    }
    let tape = critic.backward(&trace, &adjoint)?;
    adam_step(critic, &tape, adam).map_err(|e| match e {
        Error::Diverged { detail, .. } => Error::Diverged { iteration, detail },
        other => other,
    })?;
    Ok(loss)
}

/// Continue training `critic` on `train` for `cfg.iterations` minibatch steps.
///
/// Each step draws `min(batch, n)` distinct rows uniformly at random; the
/// loss is taken over the full square score matrix of the minibatch.
pub fn train_from(mut critic: Critic, train: &PairedDataset, cfg: &TrainConfig) -> Result<Critic> {
    cfg.validate()?;
    let n = train.len();
    if n < 2 {
        return invalid(format!("training needs at least 2 pairs, got {n}"));
    }
    let batch = cfg.batch.min(n);
    let mut adam = AdamState::new(critic.num_params(), cfg.eta)?;
    let mut rng = seed::rng_for(cfg.seed, &["batches"]);
    for it in 0..cfg.iterations {
        let idx = index::sample(&mut rng, n, batch).into_vec();
        let xb = train.x().select_rows(&idx);
        let zb = train.z().select_rows(&idx);
        gradient_step(&mut critic, &mut adam, &xb, &zb, it)?;
    }
    Ok(critic)
}

/// Initialise from `cfg.seed` and train on `train` only.
pub fn train_critic(train: &PairedDataset, cfg: &TrainConfig) -> Result<Critic> {
    let critic = init_critic(train.dim_x(), train.dim_z(), cfg)?;
    train_from(critic, train, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{estimate, BoundKind};
    use crate::synthetic::{gen_gaussian, GaussianSpec};

    fn cfg(iterations: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            layers: 2,
            hidden: 16,
            eta: 1e-2,
            iterations,
            batch: 256,
            scale: 1.0,
            shift: 0.0,
            seed,
        }
    }

    #[test]
    fn zero_iterations_returns_initial_critic() {
        let ds = gen_gaussian(&GaussianSpec { k: 1, rho: 0.8, n: 100, seed: 1 }).unwrap();
        let c = cfg(0, 4);
        assert_eq!(
            train_critic(&ds, &c).unwrap(),
            init_critic(1, 1, &c).unwrap()
        );
    }

    #[test]
    fn deterministic_under_seed() {
        let ds = gen_gaussian(&GaussianSpec { k: 2, rho: 0.5, n: 120, seed: 2 }).unwrap();
        let a = train_critic(&ds, &cfg(20, 7)).unwrap();
        let b = train_critic(&ds, &cfg(20, 7)).unwrap();
        assert_eq!(a.params(), b.params());
        let c = train_critic(&ds, &cfg(20, 8)).unwrap();
        assert_ne!(a.params(), c.params());
    }

    #[test]
    fn training_raises_the_training_bound() {
        let mut wins = 0;
        for s in 0..5 {
            let ds = gen_gaussian(&GaussianSpec { k: 1, rho: 0.8, n: 1000, seed: 100 + s }).unwrap();
            let c = cfg(60, s);
            let before = init_critic(1, 1, &c).unwrap();
            let after = train_from(before.clone(), &ds, &c).unwrap();
            let eval = |cr: &Critic| estimate(BoundKind::MineF, &cr.scores(ds.x(), ds.z()).unwrap()).unwrap();
            if eval(&after) > eval(&before) {
                wins += 1;
            }
        }
        assert!(wins >= 4, "training improved the bound in only {wins}/5 seeds");
    }

    #[test]
    fn rejects_tiny_training_set() {
        let ds = gen_gaussian(&GaussianSpec { k: 1, rho: 0.8, n: 1, seed: 1 }).unwrap();
        assert!(train_critic(&ds, &cfg(3, 0)).is_err());
        let bad = TrainConfig { shift: 1.5, ..cfg(3, 0) };
        assert!(bad.validate().is_err());
    }
}
