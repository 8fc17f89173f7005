//! Single-layer LSTM with a linear readout and truncated BPTT gradients.
//!
//! The cell is the standard one: sigmoid input/forget/output gates, tanh
//! candidate, `c(t) = f⊙c(t-1) + i⊙j`, `h(t) = o⊙tanh(c(t))`, prediction
//! `ŷ(t) = h(t)·w_out`. State starts at zero and is carried across the whole
//! sequence; regressor rows are consumed one per step.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ParamMatrix;

pub const GATE_COUNT: usize = 4;
pub const GATE_NAMES: [&str; GATE_COUNT] = ["input", "candidate", "forget", "output"];

/// Gate nonlinearity: sigmoid for input/forget/output, tanh for candidate.
pub fn gate_is_tanh(gate: usize) -> bool {
    gate == 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmSpec {
    pub input_dim: usize,
    pub hidden: usize,
    pub biases: bool,
}

/// Slot order: per gate `wx, wh[, b]` (gates in [`GATE_NAMES`] order), then
/// the readout `w[, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmNetwork {
    pub input_dim: usize,
    pub hidden: usize,
    pub biases: bool,
    pub slots: Vec<ParamMatrix>,
}

/// Forward record over a sequence: per-gate pre-activations and activations,
/// cell states, and hidden states, one row per step.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    pub pre: [Array2<f64>; GATE_COUNT],
    pub act: [Array2<f64>; GATE_COUNT],
    pub c: Array2<f64>,
    pub tanh_c: Array2<f64>,
    pub h: Array2<f64>,
    pub outputs: Array1<f64>,
}

impl LstmTrace {
    /// Hidden state entering step `t` (zeros for the first step).
    pub fn h_prev(&self, t: usize) -> Array1<f64> {
        if t == 0 {
            Array1::zeros(self.h.ncols())
        } else {
            self.h.row(t - 1).to_owned()
        }
    }

    /// Cell state entering step `t`.
    pub fn c_prev(&self, t: usize) -> Array1<f64> {
        if t == 0 {
            Array1::zeros(self.c.ncols())
        } else {
            self.c.row(t - 1).to_owned()
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    let ac = a.view().insert_axis(Axis(1));
    let br = b.view().insert_axis(Axis(0));
    ac.to_owned().dot(&br.to_owned())
}

impl LstmNetwork {
    pub fn init(spec: &LstmSpec, rng: &mut ChaCha8Rng) -> LstmNetwork {
        let mut slots = Vec::new();
        for name in GATE_NAMES {
            let mut wx = ParamMatrix::zeros(
                format!("gate_{name}.wx"),
                spec.input_dim,
                spec.hidden,
                true,
            );
            wx.init_uniform(rng);
            slots.push(wx);
            let mut wh =
                ParamMatrix::zeros(format!("gate_{name}.wh"), spec.hidden, spec.hidden, false);
            wh.init_uniform(rng);
            slots.push(wh);
            if spec.biases {
                slots.push(ParamMatrix::zeros(format!("gate_{name}.b"), 1, spec.hidden, false));
            }
        }
        let mut w_out = ParamMatrix::zeros("readout.w", spec.hidden, 1, false);
        w_out.init_uniform(rng);
        slots.push(w_out);
        if spec.biases {
            slots.push(ParamMatrix::zeros("readout.b", 1, 1, false));
        }
        LstmNetwork {
            input_dim: spec.input_dim,
            hidden: spec.hidden,
            biases: spec.biases,
            slots,
        }
    }

    pub fn spec(&self) -> LstmSpec {
        LstmSpec {
            input_dim: self.input_dim,
            hidden: self.hidden,
            biases: self.biases,
        }
    }

    fn per_gate(&self) -> usize {
        if self.biases {
            3
        } else {
            2
        }
    }

    pub fn wx_slot(&self, gate: usize) -> usize {
        gate * self.per_gate()
    }

    pub fn wh_slot(&self, gate: usize) -> usize {
        gate * self.per_gate() + 1
    }

    pub fn b_slot(&self, gate: usize) -> Option<usize> {
        self.biases.then(|| gate * self.per_gate() + 2)
    }

    pub fn w_out_slot(&self) -> usize {
        GATE_COUNT * self.per_gate()
    }

    pub fn b_out_slot(&self) -> Option<usize> {
        self.biases.then(|| GATE_COUNT * self.per_gate() + 1)
    }

    fn gate_pre(&self, gate: usize, z: ArrayView1<f64>, h_prev: &Array1<f64>) -> Array1<f64> {
        let mut pre = z.dot(&self.slots[self.wx_slot(gate)].values)
            + h_prev.dot(&self.slots[self.wh_slot(gate)].values);
        if let Some(b) = self.b_slot(gate) {
            pre += &self.slots[b].values.row(0);
        }
        pre
    }

    /// Advances one step in place, returning the prediction.
    pub fn step(&self, z: ArrayView1<f64>, h: &mut Array1<f64>, c: &mut Array1<f64>) -> f64 {
        let pre: Vec<Array1<f64>> = (0..GATE_COUNT).map(|g| self.gate_pre(g, z, h)).collect();
        let i = pre[0].mapv(sigmoid);
        let j = pre[1].mapv(f64::tanh);
        let f = pre[2].mapv(sigmoid);
        let o = pre[3].mapv(sigmoid);
        *c = &f * &*c + &i * &j;
        let tanh_c = c.mapv(f64::tanh);
        *h = &o * &tanh_c;
        let mut y = h.dot(&self.slots[self.w_out_slot()].values.column(0));
        if let Some(b) = self.b_out_slot() {
            y += self.slots[b].values[[0, 0]];
        }
        y
    }

    /// Teacher-forced pass over a full sequence from zero state.
    pub fn forward(&self, z: &Array2<f64>) -> (Array1<f64>, LstmTrace) {
        let t_len = z.nrows();
        let n = self.hidden;
        let mut trace = LstmTrace {
            pre: std::array::from_fn(|_| Array2::zeros((t_len, n))),
            act: std::array::from_fn(|_| Array2::zeros((t_len, n))),
            c: Array2::zeros((t_len, n)),
            tanh_c: Array2::zeros((t_len, n)),
            h: Array2::zeros((t_len, n)),
            outputs: Array1::zeros(t_len),
        };
        let mut h_prev = Array1::zeros(n);
        let mut c_prev = Array1::zeros(n);
        for t in 0..t_len {
            let zt = z.row(t);
            let pres: Vec<Array1<f64>> =
                (0..GATE_COUNT).map(|g| self.gate_pre(g, zt, &h_prev)).collect();
            let acts: Vec<Array1<f64>> = pres
                .iter()
                .enumerate()
                .map(|(g, p)| {
                    if gate_is_tanh(g) {
                        p.mapv(f64::tanh)
                    } else {
                        p.mapv(sigmoid)
                    }
                })
                .collect();
            let c = &acts[2] * &c_prev + &acts[0] * &acts[1];
            let tanh_c = c.mapv(f64::tanh);
            let h = &acts[3] * &tanh_c;
            let mut y = h.dot(&self.slots[self.w_out_slot()].values.column(0));
            if let Some(b) = self.b_out_slot() {
                y += self.slots[b].values[[0, 0]];
            }
            for g in 0..GATE_COUNT {
                trace.pre[g].row_mut(t).assign(&pres[g]);
                trace.act[g].row_mut(t).assign(&acts[g]);
            }
            trace.c.row_mut(t).assign(&c);
            trace.tanh_c.row_mut(t).assign(&tanh_c);
            trace.h.row_mut(t).assign(&h);
            trace.outputs[t] = y;
            h_prev = h;
            c_prev = c;
        }
        (trace.outputs.clone(), trace)
    }

    /// Mean sequence loss `(1/T) Σ ½(ŷ−y)²` and gradients via BPTT.
    ///
    /// Every step's error is propagated at most `tau` steps back; `tau ≥ T`
    /// gives full (untruncated) BPTT. Gradients of pruned entries are zero.
    pub fn bptt(&self, z: &Array2<f64>, targets: &Array1<f64>, tau: usize) -> (f64, Vec<Array2<f64>>) {
        let t_len = z.nrows();
        let (_, trace) = self.forward(z);
        let loss = trace
            .outputs
            .iter()
            .zip(targets.iter())
            .map(|(p, y)| 0.5 * (p - y) * (p - y))
            .sum::<f64>()
            / t_len as f64;
        let mut grads: Vec<Array2<f64>> = self
            .slots
            .iter()
            .map(|s| Array2::zeros(s.values.raw_dim()))
            .collect();
        if tau >= t_len {
            self.accumulate_full(z, targets, &trace, &mut grads);
        } else {
            self.accumulate_windowed(z, targets, &trace, tau.max(1), &mut grads);
        }
        for (g, s) in grads.iter_mut().zip(&self.slots) {
            ndarray::Zip::from(g).and(&s.mask).for_each(|g, &m| {
                if !m {
                    *g = 0.0;
                }
            });
        }
        (loss, grads)
    }

    /// One reverse sweep, exact for `tau ≥ T`.
    fn accumulate_full(
        &self,
        z: &Array2<f64>,
        targets: &Array1<f64>,
        trace: &LstmTrace,
        grads: &mut [Array2<f64>],
    ) {
        let t_len = z.nrows();
        let n = self.hidden;
        let mut d_h: Array1<f64> = Array1::zeros(n);
        let mut d_c: Array1<f64> = Array1::zeros(n);
        for t in (0..t_len).rev() {
            let e = (trace.outputs[t] - targets[t]) / t_len as f64;
            let h_t = trace.h.row(t).to_owned();
            grads[self.w_out_slot()]
                .column_mut(0)
                .scaled_add(e, &h_t);
            if let Some(b) = self.b_out_slot() {
                grads[b][[0, 0]] += e;
            }
            d_h += &self.slots[self.w_out_slot()].values.column(0).mapv(|w| w * e);
            let (d_h_prev, d_c_prev) = self.backstep(t, z, trace, &d_h, &d_c, grads);
            d_h = d_h_prev;
            d_c = d_c_prev;
        }
    }

    /// Per-output windows: the error at step `t` flows back through steps
    /// `t, t-1, …, t-tau+1` only.
    fn accumulate_windowed(
        &self,
        z: &Array2<f64>,
        targets: &Array1<f64>,
        trace: &LstmTrace,
        tau: usize,
        grads: &mut [Array2<f64>],
    ) {
        let t_len = z.nrows();
        for t in 0..t_len {
            let e = (trace.outputs[t] - targets[t]) / t_len as f64;
            let h_t = trace.h.row(t).to_owned();
            grads[self.w_out_slot()]
                .column_mut(0)
                .scaled_add(e, &h_t);
            if let Some(b) = self.b_out_slot() {
                grads[b][[0, 0]] += e;
            }
            let mut d_h = self.slots[self.w_out_slot()].values.column(0).mapv(|w| w * e);
            let mut d_c = Array1::zeros(self.hidden);
            let start = (t + 1).saturating_sub(tau);
            for s in (start..=t).rev() {
                let (d_h_prev, d_c_prev) = self.backstep(s, z, trace, &d_h, &d_c, grads);
                d_h = d_h_prev;
                d_c = d_c_prev;
            }
        }
    }

    /// Propagates (∂L/∂h(t), ∂L/∂c(t)) backwards through step `t`,
    /// accumulating parameter gradients, and returns the same quantities
    /// for step `t-1`.
    fn backstep(
        &self,
        t: usize,
        z: &Array2<f64>,
        trace: &LstmTrace,
        d_h: &Array1<f64>,
        d_c_in: &Array1<f64>,
        grads: &mut [Array2<f64>],
    ) -> (Array1<f64>, Array1<f64>) {
        let i = trace.act[0].row(t);
        let j = trace.act[1].row(t);
        let f = trace.act[2].row(t);
        let o = trace.act[3].row(t);
        let tanh_c = trace.tanh_c.row(t);
        let c_prev = trace.c_prev(t);
        let h_prev = trace.h_prev(t);
        let z_t = z.row(t).to_owned();

        let d_o = d_h * &tanh_c;
        let d_c = d_c_in + &(d_h * &o.mapv(|v| v) * &tanh_c.mapv(|v| 1.0 - v * v));
        let d_f = &d_c * &c_prev;
        let d_i = &d_c * &j;
        let d_j = &d_c * &i;

        // Pre-activation gradients, gate order i, j, f, o.
        let g = [
            &d_i * &i.mapv(|s| s * (1.0 - s)),
            &d_j * &j.mapv(|v| 1.0 - v * v),
            &d_f * &f.mapv(|s| s * (1.0 - s)),
            &d_o * &o.mapv(|s| s * (1.0 - s)),
        ];
        let mut d_h_prev = Array1::zeros(self.hidden);
        for (gate, gg) in g.iter().enumerate() {
            grads[self.wx_slot(gate)] += &outer(&z_t, gg);
            grads[self.wh_slot(gate)] += &outer(&h_prev, gg);
            if let Some(b) = self.b_slot(gate) {
                grads[b].row_mut(0).scaled_add(1.0, gg);
            }
            d_h_prev += &self.slots[self.wh_slot(gate)].values.dot(gg);
        }
        let d_c_prev = &d_c * &f;
        (d_h_prev, d_c_prev)
    }
}
