//! Curvature recursions for recurrent cells.
//!
//! The sequence loss couples every output to every earlier step, so the
//! exact Hessian has cross-step blocks. These recursions keep, for each
//! output, only the blocks on the visited diagonal: for output `t` they walk
//! steps `j = t, t−1, …` down the truncation window, carrying a
//! pre-activation curvature vector that is re-expressed in the weights each
//! step visits. Contributions from different outputs are summed and the
//! total divided by the sequence length, matching the mean one-step loss.
//!
//! Two curvature chains are carried per walk: the state-map chain keeps the
//! usual second-derivative correction (the `σ″ ⊙ ∂L/∂a` term) at every step,
//! while the input-map chain keeps it only at the seed — along the walk the
//! input map enters the loss as a product of first derivatives, so interior
//! corrections do not belong to its diagonal.

use ndarray::{Array1, Array2};

use crate::models::lstm::{LstmNetwork, GATE_COUNT};
use crate::models::rnn::SimpleRnn;

/// Elementwise square.
fn sq(v: &Array1<f64>) -> Array1<f64> {
    v.mapv(|x| x * x)
}

/// Diagonal curvature of the mean sequence loss for the plain recurrent
/// cell, as `[input map, state map, readout]` matrices. `tau` is the
/// backward window per output (≥ 1).
pub fn rnn_hessian_diag(
    rnn: &SimpleRnn,
    z: &Array2<f64>,
    targets: &Array1<f64>,
    tau: usize,
) -> [Array2<f64>; 3] {
    let t_len = z.nrows();
    let (outputs, trace) = rnn.forward(z);
    let w_o_col: Array1<f64> = rnn.w_o.column(0).to_owned();
    let w_o_sq = sq(&w_o_col);
    let w_h_sq = rnn.w_h.mapv(|w| w * w);

    let mut d_wi = Array2::zeros(rnn.w_i.dim());
    let mut d_wh = Array2::zeros(rnn.w_h.dim());
    let mut d_wo = Array2::zeros(rnn.w_o.dim());

    for t in 0..t_len {
        let err = outputs[t] - targets[t];
        // Readout is linear in its weights: curvature is the squared state.
        for b in 0..rnn.hidden {
            d_wo[[b, 0]] += trace.h[[t, b]] * trace.h[[t, b]];
        }

        let start = (t + 1).saturating_sub(tau.max(1));
        // Loss gradient at the current step's state, refreshed as we walk.
        let mut d_h = &w_o_col * err;
        let mut state_curv = Array1::zeros(rnn.hidden);
        let mut input_curv = Array1::zeros(rnn.hidden);
        for j in (start..=t).rev() {
            let pre = trace.pre.row(j);
            if j == t {
                let mut seed = Array1::zeros(rnn.hidden);
                for b in 0..rnn.hidden {
                    let d1 = rnn.act.deriv(pre[b]);
                    seed[b] = d1 * d1 * w_o_sq[b] + rnn.act.second_deriv(pre[b]) * d_h[b];
                }
                state_curv = seed.clone();
                input_curv = seed;
            } else {
                // Step the gradient from j+1 back to j before using it.
                let pre_next = trace.pre.row(j + 1);
                let mut d_pre_next = Array1::zeros(rnn.hidden);
                for b in 0..rnn.hidden {
                    d_pre_next[b] = d_h[b] * rnn.act.deriv(pre_next[b]);
                }
                d_h = rnn.w_h.dot(&d_pre_next);

                let prop_state = w_h_sq.dot(&state_curv);
                let prop_input = w_h_sq.dot(&input_curv);
                for b in 0..rnn.hidden {
                    let d1 = rnn.act.deriv(pre[b]);
                    state_curv[b] =
                        d1 * d1 * prop_state[b] + rnn.act.second_deriv(pre[b]) * d_h[b];
                    input_curv[b] = d1 * d1 * prop_input[b];
                }
            }
            let h_before = trace.h_prev(j);
            for a in 0..rnn.hidden {
                let ha2 = h_before[a] * h_before[a];
                for b in 0..rnn.hidden {
                    d_wh[[a, b]] += ha2 * state_curv[b];
                }
            }
            for a in 0..rnn.input_dim {
                let za2 = z[[j, a]] * z[[j, a]];
                for b in 0..rnn.hidden {
                    d_wi[[a, b]] += za2 * input_curv[b];
                }
            }
        }
    }

    let scale = 1.0 / t_len as f64;
    d_wi.mapv_inplace(|v| v * scale);
    d_wh.mapv_inplace(|v| v * scale);
    d_wo.mapv_inplace(|v| v * scale);
    [d_wi, d_wh, d_wo]
}

fn sigmoid_d1(a: f64) -> f64 {
    a * (1.0 - a)
}
fn sigmoid_d2(a: f64) -> f64 {
    a * (1.0 - a) * (1.0 - 2.0 * a)
}
fn tanh_d1(a: f64) -> f64 {
    1.0 - a * a
}
fn tanh_d2(a: f64) -> f64 {
    -2.0 * a * (1.0 - a * a)
}

/// First and second derivative of gate `g`'s activation, from its value.
fn gate_derivs(gate: usize, a: f64) -> (f64, f64) {
    if crate::models::lstm::gate_is_tanh(gate) {
        (tanh_d1(a), tanh_d2(a))
    } else {
        (sigmoid_d1(a), sigmoid_d2(a))
    }
}

/// Diagonal curvature of the mean sequence loss for an LSTM, slot-aligned
/// with `net.slots`. Each gate is treated as its own recurrent channel: the
/// walk for output `t` carries one curvature vector per gate, seeded through
/// the readout and propagated through that gate's own recurrent matrix, with
/// the state-to-gate chain factor playing the role of the activation
/// derivative.
pub fn lstm_hessian_diag(
    net: &LstmNetwork,
    z: &Array2<f64>,
    targets: &Array1<f64>,
    tau: usize,
) -> Vec<Array2<f64>> {
    let t_len = z.nrows();
    let hidden = net.hidden;
    let (outputs, trace) = net.forward(z);
    let w_out_col: Array1<f64> = net.slots[net.w_out_slot()].values.column(0).to_owned();
    let w_out_sq = sq(&w_out_col);
    let wh_sq: Vec<Array2<f64>> = (0..GATE_COUNT)
        .map(|g| net.slots[net.wh_slot(g)].values.mapv(|w| w * w))
        .collect();

    let mut total: Vec<Array2<f64>> = net
        .slots
        .iter()
        .map(|s| Array2::zeros(s.values.dim()))
        .collect();

    for t in 0..t_len {
        let err = outputs[t] - targets[t];
        for b in 0..hidden {
            total[net.w_out_slot()][[b, 0]] += trace.h[[t, b]] * trace.h[[t, b]];
        }
        if let Some(bo) = net.b_out_slot() {
            total[bo][[0, 0]] += 1.0;
        }

        let start = (t + 1).saturating_sub(tau.max(1));
        let mut d_h: Array1<f64> = &w_out_col * err;
        let mut d_c: Array1<f64> = Array1::zeros(hidden);
        let mut state_curv: Vec<Array1<f64>> = vec![Array1::zeros(hidden); GATE_COUNT];
        let mut input_curv: Vec<Array1<f64>> = vec![Array1::zeros(hidden); GATE_COUNT];

        for j in (start..=t).rev() {
            if j < t {
                // Walk the loss gradient one step back (standard BPTT step
                // at j+1), so D-terms below see ∂L_t evaluated at step j.
                let (d_h_prev, d_c_prev) = grad_back_step(net, &trace, j + 1, &d_h, &d_c);
                d_h = d_h_prev;
                d_c = d_c_prev;
            }

            let i_act = trace.act[0].row(j);
            let j_act = trace.act[1].row(j);
            let f_act = trace.act[2].row(j);
            let o_act = trace.act[3].row(j);
            let tc = trace.tanh_c.row(j);
            let c_before = trace.c_prev(j);

            // Next-step curvature pushed back through each gate's own
            // recurrent matrix (unused at the seed step).
            let prop: Vec<(Array1<f64>, Array1<f64>)> = (0..GATE_COUNT)
                .map(|g| (wh_sq[g].dot(&state_curv[g]), wh_sq[g].dot(&input_curv[g])))
                .collect();

            for b in 0..hidden {
                let through_c = o_act[b] * (1.0 - tc[b] * tc[b]);
                let d_c_tot = d_c[b] + d_h[b] * through_c;
                // Loss gradient at each gate's activation.
                let d_act = [
                    d_c_tot * j_act[b],    // input gate
                    d_c_tot * i_act[b],    // candidate
                    d_c_tot * c_before[b], // forget gate
                    d_h[b] * tc[b],        // output gate
                ];
                let acts = [i_act[b], j_act[b], f_act[b], o_act[b]];
                for g in 0..GATE_COUNT {
                    let (d1, d2) = gate_derivs(g, acts[g]);
                    // State-to-gate chain factor ∂h/∂(gate pre-activation).
                    let chain = match g {
                        0 => through_c * j_act[b] * d1,
                        1 => through_c * i_act[b] * d1,
                        2 => through_c * c_before[b] * d1,
                        _ => tc[b] * d1,
                    };
                    let correction = d2 * d_act[g];
                    if j == t {
                        let seed = chain * chain * w_out_sq[b] + correction;
                        state_curv[g][b] = seed;
                        input_curv[g][b] = seed;
                    } else {
                        state_curv[g][b] = chain * chain * prop[g].0[b] + correction;
                        input_curv[g][b] = chain * chain * prop[g].1[b];
                    }
                }
            }

            let h_before = trace.h_prev(j);
            for g in 0..GATE_COUNT {
                let wx = &mut total[net.wx_slot(g)];
                for a in 0..net.input_dim {
                    let za2 = z[[j, a]] * z[[j, a]];
                    for b in 0..hidden {
                        wx[[a, b]] += za2 * input_curv[g][b];
                    }
                }
                let wh = &mut total[net.wh_slot(g)];
                for a in 0..hidden {
                    let ha2 = h_before[a] * h_before[a];
                    for b in 0..hidden {
                        wh[[a, b]] += ha2 * state_curv[g][b];
                    }
                }
                if let Some(bs) = net.b_slot(g) {
                    for b in 0..hidden {
                        total[bs][[0, b]] += state_curv[g][b];
                    }
                }
            }
        }
    }

    let scale = 1.0 / t_len as f64;
    for t in &mut total {
        t.mapv_inplace(|v| v * scale);
    }
    total
}

/// One reverse BPTT step at time `step`: maps the loss gradient at
/// `(h_step, c_step)` to the gradient at `(h_{step−1}, c_{step−1})`.
fn grad_back_step(
    net: &LstmNetwork,
    trace: &crate::models::lstm::LstmTrace,
    step: usize,
    d_h: &Array1<f64>,
    d_c: &Array1<f64>,
) -> (Array1<f64>, Array1<f64>) {
    let hidden = net.hidden;
    let i_act = trace.act[0].row(step);
    let j_act = trace.act[1].row(step);
    let f_act = trace.act[2].row(step);
    let o_act = trace.act[3].row(step);
    let tc = trace.tanh_c.row(step);
    let c_before = trace.c_prev(step);

    let mut d_c_tot = Array1::zeros(hidden);
    let mut d_pre = [
        Array1::zeros(hidden),
        Array1::zeros(hidden),
        Array1::zeros(hidden),
        Array1::zeros(hidden),
    ];
    for b in 0..hidden {
        let through_c = o_act[b] * (1.0 - tc[b] * tc[b]);
        d_c_tot[b] = d_c[b] + d_h[b] * through_c;
        let d_act = [
            d_c_tot[b] * j_act[b],
            d_c_tot[b] * i_act[b],
            d_c_tot[b] * c_before[b],
            d_h[b] * tc[b],
        ];
        let acts = [i_act[b], j_act[b], f_act[b], o_act[b]];
        for g in 0..GATE_COUNT {
            let (d1, _) = gate_derivs(g, acts[g]);
            d_pre[g][b] = d_act[g] * d1;
        }
    }
    let mut d_h_prev = Array1::zeros(hidden);
    for g in 0..GATE_COUNT {
        d_h_prev = d_h_prev + net.slots[net.wh_slot(g)].values.dot(&d_pre[g]);
    }
    let mut d_c_prev = Array1::zeros(hidden);
    for b in 0..hidden {
        d_c_prev[b] = d_c_tot[b] * f_act[b];
    }
    (d_h_prev, d_c_prev)
}
