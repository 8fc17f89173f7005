//! Adam with a cosine-annealed learning rate.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ModelError, ParamMatrix};

/// Adam moment estimates, one pair per parameter slot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl AdamState {
    pub fn new(slots: &[ParamMatrix]) -> AdamState {
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: slots.iter().map(|s| Array2::zeros(s.values.raw_dim())).collect(),
            v: slots.iter().map(|s| Array2::zeros(s.values.raw_dim())).collect(),
        }
    }

    /// One Adam update. Rejects non-finite gradients without touching the
    /// parameters, so a diverged batch can be reported instead of silently
    /// corrupting the model. Pruned entries stay at zero.
    pub fn step(
        &mut self,
        slots: &mut [ParamMatrix],
        grads: &[Array2<f64>],
        lr: f64,
    ) -> Result<(), ModelError> {
        if grads.len() != slots.len() {
            return Err(ModelError::GradientCount {
                got: grads.len(),
                expected: slots.len(),
            });
        }
        for (slot, g) in slots.iter().zip(grads) {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFiniteGradient {
                    slot: slot.name.clone(),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((slot, g), (m, v)) in slots
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            ndarray::Zip::from(&mut slot.values)
                .and(g)
                .and(m)
                .and(v)
                .and(&slot.mask)
                .for_each(|w, &g, m, v, &keep| {
                    if !keep {
                        *w = 0.0;
                        return;
                    }
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
                });
        }
        Ok(())
    }
}

/// Cosine-annealed learning rate over one training cycle:
/// starts at `lr0`, ends at `lr_min` after `epochs` epochs.
pub fn cosine_lr(lr0: f64, lr_min: f64, epoch: usize, epochs: usize) -> f64 {
    if epochs == 0 {
        return lr0;
    }
    let frac = (epoch.min(epochs)) as f64 / epochs as f64;
    lr_min + 0.5 * (lr0 - lr_min) * (1.0 + (std::f64::consts::PI * frac).cos())
}
