use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Error, Result};
use crate::nn::AdamState;

/// Parameter-exploring policy gradients with symmetric sampling.
///
/// Keeps a diagonal Gaussian search distribution `N(μ, diag σ²)` and maximises
/// the expected reward. The mean moves through Adam; `σ` is adapted
/// multiplicatively and clamped to `[σ₀·1e-3, σ₀·1e2]`.
#[derive(Clone, Debug)]
pub struct Pepg {
    mean: Vec<f64>,
    sigma: Vec<f64>,
    pairs: usize,
    sigma_lr: f64,
    sigma_min: f64,
    sigma_max: f64,
    adam: AdamState,
}

impl Pepg {
    pub fn new(init: Vec<f64>, sigma_init: f64, pairs: usize, lr: f64, sigma_lr: f64) -> Result<Self> {
        if !(sigma_init > 0.0 && sigma_init.is_finite()) {
            return invalid(format!("sigma_init must be positive, got {sigma_init}"));
        }
        if pairs == 0 {
            return invalid("population needs at least one pair");
        }
        if !(sigma_lr >= 0.0 && sigma_lr.is_finite()) {
            return invalid(format!("sigma learning rate must be non-negative, got {sigma_lr}"));
        }
        let adam = AdamState::new(init.len(), lr)?;
        Ok(Pepg {
            sigma: vec![sigma_init; init.len()],
            mean: init,
            pairs,
            sigma_lr,
            sigma_min: sigma_init * 1e-3,
            sigma_max: sigma_init * 1e2,
            adam,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    /// One perturbation `ε ~ N(0, diag σ²)`.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        self.sigma.iter().map(|s| s * unit.sample(rng)).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        (0..self.pairs).map(|_| self.sample_one(rng)).collect()
    }

    /// `μ ± ε`.
    pub fn candidates(&self, eps: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let plus = self.mean.iter().zip(eps).map(|(m, e)| m + e).collect();
        let minus = self.mean.iter().zip(eps).map(|(m, e)| m - e).collect();
        (plus, minus)
    }

    /// Update from the rewards of `μ + ε_k` and `μ − ε_k` (higher is better).
    pub fn update(&mut self, eps: &[Vec<f64>], plus: &[f64], minus: &[f64]) -> Result<()> {
        let n = eps.len();
        if n == 0 || plus.len() != n || minus.len() != n {
            return invalid("perturbation and reward counts differ");
        }
        if let Some(r) = plus.iter().chain(minus).find(|r| !r.is_finite()) {
            return Err(Error::Diverged {
                iteration: self.adam.step_count() as usize,
                detail: format!("population reward is {r}"),
            });
        }
        let dim = self.mean.len();
        let mut grad_mean = vec![0.0; dim];
        for (e, (rp, rm)) in eps.iter().zip(plus.iter().zip(minus)) {
            let half = (rp - rm) / 2.0;
            for (g, ei) in grad_mean.iter_mut().zip(e) {
                *g += ei * half;
            }
        }
        for (g, s) in grad_mean.iter_mut().zip(&self.sigma) {
            // Adam descends, so negate the ascent direction
            *g = -*g / (n as f64 * s * s);
        }

        let all: Vec<f64> = plus.iter().chain(minus).copied().collect();
        let baseline = all.iter().sum::<f64>() / all.len() as f64;
        let spread = (all.iter().map(|r| (r - baseline).powi(2)).sum::<f64>() / all.len() as f64).sqrt();
        if spread > 0.0 && self.sigma_lr > 0.0 {
            let mut grad_sigma = vec![0.0; dim];
            for (e, (rp, rm)) in eps.iter().zip(plus.iter().zip(minus)) {
                let adv = ((rp + rm) / 2.0 - baseline) / spread;
                for ((g, ei), s) in grad_sigma.iter_mut().zip(e).zip(&self.sigma) {
                    *g += adv * (ei * ei / (s * s) - 1.0);
                }
            }
            for (s, g) in self.sigma.iter_mut().zip(&grad_sigma) {
                *s = (*s * (self.sigma_lr * g / n as f64 / 2.0).exp()).clamp(self.sigma_min, self.sigma_max);
            }
        }
        self.adam.update(&mut self.mean, &grad_mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    fn run(target: &[f64], iterations: usize, seed: u64) -> Vec<f64> {
        let mut p = Pepg::new(vec![0.0; target.len()], 0.1, 8, 0.05, 0.1).unwrap();
        let mut rng = seed::rng(seed);
        let reward = |v: &[f64]| -v.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        for _ in 0..iterations {
            let eps = p.sample(&mut rng);
            let (mut rp, mut rm) = (Vec::new(), Vec::new());
            for e in &eps {
                let (a, b) = p.candidates(e);
                rp.push(reward(&a));
                rm.push(reward(&b));
            }
            p.update(&eps, &rp, &rm).unwrap();
        }
        p.mean().to_vec()
    }

    #[test]
    fn converges_on_quadratic() {
        let target = [1.0, -0.5, 0.25, 2.0];
        let m = run(&target, 400, 7);
        for (a, b) in m.iter().zip(&target) {
            assert!((a - b).abs() < 0.05, "{m:?}");
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(run(&[0.3, 0.1], 20, 1), run(&[0.3, 0.1], 20, 1));
    }

    #[test]
    fn rejects_nan_reward() {
        let mut p = Pepg::new(vec![0.0; 2], 0.1, 1, 0.05, 0.1).unwrap();
        let r = p.update(&[vec![0.1, 0.1]], &[f64::NAN], &[0.0]);
        assert!(matches!(r, Err(Error::Diverged { .. })));
    }

    #[test]
    fn sigma_stays_clamped() {
        let mut p = Pepg::new(vec![0.0; 1], 0.1, 2, 0.05, 10.0).unwrap();
        let mut rng = seed::rng(3);
        for _ in 0..200 {
            let eps = p.sample(&mut rng);
            let rp: Vec<f64> = eps.iter().map(|e| e[0].abs()).collect();
            p.update(&eps, &rp, &rp).unwrap();
        }
        assert!(p.sigma()[0] <= 10.0 + 1e-12 && p.sigma()[0] >= 1e-4);
    }
}
