//! Curvature recursions for feed-forward networks.
//!
//! Both variants walk the layers backwards, carrying the Hessian of the
//! per-sample loss with respect to each layer's pre-activations. The
//! simplified variant keeps only its diagonal, which makes the propagation
//! through a weight matrix an elementwise-squared matrix–vector product; the
//! exact variant carries the full pre-activation block and is therefore
//! restricted to small layers. Within a layer, the weight-space block for
//! both variants is the outer product of squared layer inputs with the
//! pre-activation curvature — exact, because second cross-derivatives of a
//! single affine map vanish.
//!
//! Batch curvature is the mean of per-sample curvatures.

use ndarray::{Array1, Array2};

use super::{HessianError, EXACT_BLOCK_LIMIT};
use crate::models::mlp::MlpNetwork;
use crate::models::ActivationKind;

/// Pre-activation curvature at the output unit for the squared-error loss
/// ½(ŷ − y)² of one sample: σ″(h)·(ŷ − y) + σ′(h)².
pub fn output_pre_curvature(act: ActivationKind, pre: f64, err: f64) -> f64 {
    act.second_deriv(pre) * err + act.deriv(pre).powi(2)
}

/// Per-sample pre-activation curvature diagonals, output layer last.
fn sample_pre_diags(
    net: &MlpNetwork,
    pres: &[Array1<f64>],
    act_grads: &[Array1<f64>],
    err: f64,
) -> Vec<Array1<f64>> {
    let layers = net.layer_count();
    let mut diags = vec![Array1::zeros(0); layers];
    let out_act = net.activations[layers - 1];
    diags[layers - 1] = Array1::from_elem(1, output_pre_curvature(out_act, pres[layers - 1][0], err));
    for l in (0..layers - 1).rev() {
        let w_next = &net.slots[net.w_slot(l + 1)].values;
        let propagated = w_next.mapv(|w| w * w).dot(&diags[l + 1]);
        let act = net.activations[l];
        let mut h = Array1::zeros(pres[l].len());
        for b in 0..h.len() {
            let p = pres[l][b];
            h[b] = act.deriv(p).powi(2) * propagated[b] + act.second_deriv(p) * act_grads[l][b];
        }
        diags[l] = h;
    }
    diags
}

/// Diagonal of the loss Hessian over all parameters of `net`, as the mean of
/// per-sample contributions over the batch. Returned slot-aligned with
/// `net.slots`: weight slots get `input² ⊗ pre-curvature` (their own shape),
/// bias slots get the pre-activation curvature as a row.
pub fn mlp_hessian_diag(net: &MlpNetwork, z: &Array2<f64>, targets: &Array1<f64>) -> Vec<Array2<f64>> {
    let mut total: Vec<Array2<f64>> = net
        .slots
        .iter()
        .map(|s| Array2::zeros(s.values.dim()))
        .collect();
    let n = z.nrows();
    for s in 0..n {
        let trace = net.forward_trace(z.row(s));
        let err = trace.acts.last().unwrap()[0] - targets[s];
        let act_grads = net.activation_gradients(&trace, targets[s]);
        let pre = sample_pre_diags(net, &trace.pres, &act_grads, err);
        for l in 0..net.layer_count() {
            let input = &trace.acts[l];
            let wd = &mut total[net.w_slot(l)];
            for a in 0..input.len() {
                let ia2 = input[a] * input[a];
                for b in 0..pre[l].len() {
                    wd[[a, b]] += ia2 * pre[l][b];
                }
            }
            if let Some(bs) = net.b_slot(l) {
                for b in 0..pre[l].len() {
                    total[bs][[0, b]] += pre[l][b];
                }
            }
        }
    }
    let scale = 1.0 / n as f64;
    for t in &mut total {
        t.mapv_inplace(|v| v * scale);
    }
    total
}

/// Exact per-layer Hessian blocks over the column-stacked weights of each
/// layer (biases excluded), averaged over the batch. Entry `(b1·m + a1,
/// b2·m + a2)` of block `l` is ∂²L/∂W[a1,b1]∂W[a2,b2] for the `m × n` weight
/// matrix of layer `l`. Layers with more than [`EXACT_BLOCK_LIMIT`] weight
/// entries are refused.
pub fn mlp_hessian_exact(
    net: &MlpNetwork,
    z: &Array2<f64>,
    targets: &Array1<f64>,
) -> Result<Vec<Array2<f64>>, HessianError> {
    let layers = net.layer_count();
    for l in 0..layers {
        let (m, nn) = net.slots[net.w_slot(l)].values.dim();
        if m * nn > EXACT_BLOCK_LIMIT {
            return Err(HessianError::LayerTooLarge {
                got: m * nn,
                limit: EXACT_BLOCK_LIMIT,
            });
        }
    }
    let mut blocks: Vec<Array2<f64>> = (0..layers)
        .map(|l| {
            let (m, nn) = net.slots[net.w_slot(l)].values.dim();
            Array2::zeros((m * nn, m * nn))
        })
        .collect();
    let n = z.nrows();
    for s in 0..n {
        let trace = net.forward_trace(z.row(s));
        let err = trace.acts.last().unwrap()[0] - targets[s];
        let act_grads = net.activation_gradients(&trace, targets[s]);

        // Full pre-activation Hessians, walked from the output down.
        let mut pre_full = vec![Array2::<f64>::zeros((0, 0)); layers];
        let out_act = net.activations[layers - 1];
        pre_full[layers - 1] = Array2::from_elem(
            (1, 1),
            output_pre_curvature(out_act, trace.pres[layers - 1][0], err),
        );
        for l in (0..layers - 1).rev() {
            let w_next = &net.slots[net.w_slot(l + 1)].values;
            let inner = w_next.dot(&pre_full[l + 1]).dot(&w_next.t());
            let act = net.activations[l];
            let width = trace.pres[l].len();
            let mut h = Array2::zeros((width, width));
            for i in 0..width {
                for j in 0..width {
                    h[[i, j]] = act.deriv(trace.pres[l][i]) * act.deriv(trace.pres[l][j]) * inner[[i, j]];
                }
                h[[i, i]] += act.second_deriv(trace.pres[l][i]) * act_grads[l][i];
            }
            pre_full[l] = h;
        }

        for l in 0..layers {
            let input = &trace.acts[l];
            let m = input.len();
            let block = &mut blocks[l];
            let h = &pre_full[l];
            for b1 in 0..h.nrows() {
                for a1 in 0..m {
                    let r = b1 * m + a1;
                    for b2 in 0..h.ncols() {
                        let hb = h[[b1, b2]];
                        if hb == 0.0 {
                            continue;
                        }
                        for a2 in 0..m {
                            block[[r, b2 * m + a2]] += input[a1] * input[a2] * hb;
                        }
                    }
                }
            }
        }
    }
    let scale = 1.0 / n as f64;
    for b in &mut blocks {
        b.mapv_inplace(|v| v * scale);
    }
    Ok(blocks)
}

/// Extracts the diagonal of an exact layer block back into the weight
/// matrix's own `m × n` shape (inverse of the column-stacked flattening).
pub fn exact_block_diag(block: &Array2<f64>, m: usize, n: usize) -> Array2<f64> {
    let mut out = Array2::zeros((m, n));
    for b in 0..n {
        for a in 0..m {
            out[[a, b]] = block[[b * m + a, b * m + a]];
        }
    }
    out
}
