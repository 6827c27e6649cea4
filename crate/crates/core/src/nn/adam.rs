use serde::{Deserialize, Serialize};

use super::critic::{Critic, GradientTape};
use crate::error::{invalid, Error, Result};

/// Bias-corrected Adam over a flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub lr: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(num_params: usize, lr: f64) -> Result<Self> {
        if !(lr > 0.0 && lr.is_finite()) {
            return invalid(format!("learning rate must be positive, got {lr}"));
        }
        Ok(AdamState {
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
            beta1: 0.9,
            beta2: 0.999,
            lr,
            eps: 1e-8,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One descent step of `params` along `grads`.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension {
                expected: self.m.len(),
                got: grads.len().min(params.len()),
                context: "adam parameter/gradient length",
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                iteration: self.step as usize,
                detail: format!("gradient component {i} is {}", grads[i]),
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Apply one Adam step to every critic parameter.
pub fn adam_step(critic: &mut Critic, tape: &GradientTape, state: &mut AdamState) -> Result<()> {
    let mut p = critic.params();
    state.update(&mut p, &tape.to_flat())?;
    critic.set_params(&p)
}
