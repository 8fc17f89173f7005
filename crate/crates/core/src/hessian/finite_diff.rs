//! Brute-force curvature oracles.
//!
//! Central second differences of a scalar loss, used throughout the test
//! suite to validate the analytic recursions. Cost is quadratic in the
//! parameter count (and the full-matrix variant is worse), so both refuse
//! models above [`FD_PARAM_LIMIT`] parameters.

use ndarray::{Array1, Array2};

use super::HessianError;
use crate::models::rnn::SimpleRnn;
use crate::models::Network;

/// Parameter-count ceiling for the finite-difference oracles.
pub const FD_PARAM_LIMIT: usize = 1000;

fn check_limit(n: usize) -> Result<(), HessianError> {
    if n > FD_PARAM_LIMIT {
        return Err(HessianError::TooManyParameters {
            got: n,
            limit: FD_PARAM_LIMIT,
        });
    }
    Ok(())
}

/// Diagonal of the Hessian of `f` at `x` by central second differences:
/// `(f(x+εe_k) − 2f(x) + f(x−εe_k)) / ε²`.
pub fn finite_diff_hessian_diag(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    eps: f64,
) -> Result<Vec<f64>, HessianError> {
    check_limit(x.len())?;
    let f0 = f(x);
    let mut work = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        work[k] = x[k] + eps;
        let fp = f(&work);
        work[k] = x[k] - eps;
        let fm = f(&work);
        work[k] = x[k];
        out.push((fp - 2.0 * f0 + fm) / (eps * eps));
    }
    Ok(out)
}

/// Full Hessian of `f` at `x` by central differences; off-diagonal entries
/// use the four-point stencil `(f₊₊ − f₊₋ − f₋₊ + f₋₋) / 4ε²`.
pub fn finite_diff_hessian_full(
    mut f: impl FnMut(&[f64]) -> f64,
    x: &[f64],
    eps: f64,
) -> Result<Array2<f64>, HessianError> {
    check_limit(x.len())?;
    let n = x.len();
    let f0 = f(x);
    let mut h = Array2::zeros((n, n));
    let mut work = x.to_vec();
    for k in 0..n {
        work[k] = x[k] + eps;
        let fp = f(&work);
        work[k] = x[k] - eps;
        let fm = f(&work);
        work[k] = x[k];
        h[[k, k]] = (fp - 2.0 * f0 + fm) / (eps * eps);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            work[i] = x[i] + eps;
            work[j] = x[j] + eps;
            let fpp = f(&work);
            work[j] = x[j] - eps;
            let fpm = f(&work);
            work[i] = x[i] - eps;
            let fmm = f(&work);
            work[j] = x[j] + eps;
            let fmp = f(&work);
            work[i] = x[i];
            work[j] = x[j];
            let v = (fpp - fpm - fmp + fmm) / (4.0 * eps * eps);
            h[[i, j]] = v;
            h[[j, i]] = v;
        }
    }
    Ok(h)
}

fn mean_squared_loss(outputs: &Array1<f64>, targets: &Array1<f64>) -> f64 {
    outputs
        .iter()
        .zip(targets.iter())
        .map(|(o, t)| 0.5 * (o - t) * (o - t))
        .sum::<f64>()
        / outputs.len() as f64
}

/// Finite-difference diagonal of the mean one-step loss for a network,
/// returned slot-aligned with `net.slots()` (row-major reshape of the flat
/// parameter vector). `tau` is accepted for signature parity with the
/// analytic recursions but the loss itself never depends on it.
pub fn finite_diff_network_diag(
    net: &Network,
    z: &Array2<f64>,
    targets: &Array1<f64>,
    _tau: usize,
    eps: f64,
) -> Result<Vec<Array2<f64>>, HessianError> {
    let x0 = net.params_flat();
    let template = net.clone();
    let f = |x: &[f64]| {
        let mut n2 = template.clone();
        n2.set_params_flat(x);
        let out = n2.predict_series(z).expect("dimensions fixed by caller");
        mean_squared_loss(&out, targets)
    };
    let diag = finite_diff_hessian_diag(f, &x0, eps)?;
    Ok(reslot(net.slots().iter().map(|s| s.values.dim()), &diag))
}

/// Finite-difference diagonal for the plain recurrent cell, as
/// `[input map, state map, readout]` matrices.
pub fn finite_diff_rnn_diag(
    rnn: &SimpleRnn,
    z: &Array2<f64>,
    targets: &Array1<f64>,
    eps: f64,
) -> Result<[Array2<f64>; 3], HessianError> {
    let x0 = rnn.params_flat();
    let template = rnn.clone();
    let f = |x: &[f64]| {
        let mut r2 = template.clone();
        r2.set_params_flat(x);
        r2.loss(z, targets)
    };
    let diag = finite_diff_hessian_diag(f, &x0, eps)?;
    let dims = [rnn.w_i.dim(), rnn.w_h.dim(), rnn.w_o.dim()];
    let mut iter = reslot(dims.into_iter(), &diag).into_iter();
    Ok([
        iter.next().unwrap(),
        iter.next().unwrap(),
        iter.next().unwrap(),
    ])
}

fn reslot(dims: impl Iterator<Item = (usize, usize)>, flat: &[f64]) -> Vec<Array2<f64>> {
    let mut out = Vec::new();
    let mut off = 0;
    for (r, c) in dims {
        let chunk = flat[off..off + r * c].to_vec();
        out.push(Array2::from_shape_vec((r, c), chunk).expect("slot size"));
        off += r * c;
    }
    debug_assert_eq!(off, flat.len());
    out
}
