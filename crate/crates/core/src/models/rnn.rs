//! Minimal Elman-style recurrent cell with a linear readout.
//!
//! `h(t) = σ(z(t)·w_i + h(t-1)·w_h)`, `ŷ(t) = h(t)·w_o`. This is the
//! reference model for the recurrent curvature recursions, which are easiest
//! to validate on a cell without gates.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ActivationKind;

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleRnn {
    pub input_dim: usize,
    pub hidden: usize,
    pub act: ActivationKind,
    pub w_i: Array2<f64>,
    pub w_h: Array2<f64>,
    pub w_o: Array2<f64>,
}

/// Forward record: pre-activations and hidden states, one row per step.
#[derive(Debug, Clone)]
pub struct RnnTrace {
    pub pre: Array2<f64>,
    pub h: Array2<f64>,
    pub outputs: Array1<f64>,
}

impl RnnTrace {
    pub fn h_prev(&self, t: usize) -> Array1<f64> {
        if t == 0 {
            Array1::zeros(self.h.ncols())
        } else {
            self.h.row(t - 1).to_owned()
        }
    }
}

impl SimpleRnn {
    pub fn init(
        input_dim: usize,
        hidden: usize,
        act: ActivationKind,
        rng: &mut ChaCha8Rng,
    ) -> SimpleRnn {
        let mut fill = |rows: usize, cols: usize, fan_in: usize| {
            let s = 1.0 / (fan_in as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-s..s))
        };
        SimpleRnn {
            input_dim,
            hidden,
            act,
            w_i: fill(input_dim, hidden, input_dim),
            w_h: fill(hidden, hidden, hidden),
            w_o: fill(hidden, 1, hidden),
        }
    }

    pub fn forward(&self, z: &Array2<f64>) -> (Array1<f64>, RnnTrace) {
        let t_len = z.nrows();
        let mut trace = RnnTrace {
            pre: Array2::zeros((t_len, self.hidden)),
            h: Array2::zeros((t_len, self.hidden)),
            outputs: Array1::zeros(t_len),
        };
        let mut h_prev: Array1<f64> = Array1::zeros(self.hidden);
        for t in 0..t_len {
            let pre = z.row(t).dot(&self.w_i) + h_prev.dot(&self.w_h);
            let h = pre.mapv(|x| self.act.value(x));
            trace.outputs[t] = h.dot(&self.w_o.column(0));
            trace.pre.row_mut(t).assign(&pre);
            trace.h.row_mut(t).assign(&h);
            h_prev = h;
        }
        (trace.outputs.clone(), trace)
    }

    /// Mean sequence loss `(1/T) Σ ½(ŷ−y)²`.
    pub fn loss(&self, z: &Array2<f64>, targets: &Array1<f64>) -> f64 {
        let (y, _) = self.forward(z);
        y.iter()
            .zip(targets.iter())
            .map(|(p, t)| 0.5 * (p - t) * (p - t))
            .sum::<f64>()
            / z.nrows() as f64
    }

    /// Gradients of [`Self::loss`] via BPTT truncated to `tau` steps per
    /// output. Returns `(loss, [g_wi, g_wh, g_wo])`.
    pub fn bptt(
        &self,
        z: &Array2<f64>,
        targets: &Array1<f64>,
        tau: usize,
    ) -> (f64, [Array2<f64>; 3]) {
        let t_len = z.nrows();
        let (outputs, trace) = self.forward(z);
        let loss = outputs
            .iter()
            .zip(targets.iter())
            .map(|(p, t)| 0.5 * (p - t) * (p - t))
            .sum::<f64>()
            / t_len as f64;
        let mut g_wi = Array2::zeros(self.w_i.raw_dim());
        let mut g_wh = Array2::zeros(self.w_h.raw_dim());
        let mut g_wo = Array2::zeros(self.w_o.raw_dim());
        for t in 0..t_len {
            let e = (outputs[t] - targets[t]) / t_len as f64;
            g_wo.column_mut(0).scaled_add(e, &trace.h.row(t));
            let mut d_h = self.w_o.column(0).mapv(|w| w * e);
            let start = (t + 1).saturating_sub(tau.max(1));
            for s in (start..=t).rev() {
                let d_pre = &d_h * &trace.pre.row(s).mapv(|x| self.act.deriv(x));
                let h_prev = trace.h_prev(s);
                for a in 0..self.input_dim {
                    for b in 0..self.hidden {
                        g_wi[[a, b]] += z[[s, a]] * d_pre[b];
                    }
                }
                for a in 0..self.hidden {
                    for b in 0..self.hidden {
                        g_wh[[a, b]] += h_prev[a] * d_pre[b];
                    }
                }
                d_h = self.w_h.dot(&d_pre);
            }
        }
        (loss, [g_wi, g_wh, g_wo])
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.w_i
            .iter()
            .chain(self.w_h.iter())
            .chain(self.w_o.iter())
            .copied()
            .collect()
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.w_i.len() + self.w_h.len() + self.w_o.len());
        let mut it = flat.iter();
        for w in self.w_i.iter_mut() {
            *w = *it.next().unwrap();
        }
        for w in self.w_h.iter_mut() {
            *w = *it.next().unwrap();
        }
        for w in self.w_o.iter_mut() {
            *w = *it.next().unwrap();
        }
    }
}
