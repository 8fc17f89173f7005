//! Curvature diagnostics for trained networks.
//!
//! The identification loop needs per-parameter curvature of the training
//! loss. Computing the full Hessian is out of the question for real models,
//! so this module implements layer-wise recursions that reuse backprop
//! intermediates:
//!
//! * [`mlp_hessian_diag`] — diagonal-only recursion for feed-forward nets,
//!   linear in the parameter count.
//! * [`mlp_hessian_exact`] — exact per-layer blocks (small layers only),
//!   used as a reference and for diagnostics.
//! * [`rnn_hessian_diag`] / [`lstm_hessian_diag`] — recurrent variants that
//!   accumulate per-step contributions along truncated BPTT windows.
//! * [`finite_diff_hessian_diag`] and friends — brute-force oracles for
//!   validating all of the above on small models.
//!
//! Raw diagonals can carry small negative entries (the loss is non-convex);
//! [`clamp_nonnegative`] floors them at zero before they reach the Bayesian
//! updates, and [`write_curvature_csv`] dumps raw and clamped values side by
//! side for inspection.

mod fc;
mod finite_diff;
mod recurrent;

pub use fc::{exact_block_diag, mlp_hessian_diag, mlp_hessian_exact, output_pre_curvature};
pub use finite_diff::{
    finite_diff_hessian_diag, finite_diff_hessian_full, finite_diff_network_diag,
    finite_diff_rnn_diag, FD_PARAM_LIMIT,
};
pub use recurrent::{lstm_hessian_diag, rnn_hessian_diag};

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::models::{ModelError, Network, ParamMatrix};

/// Largest layer (in weight entries) for which exact blocks are computed.
pub const EXACT_BLOCK_LIMIT: usize = 10_000;

#[derive(Debug, Error)]
pub enum HessianError {
    #[error("finite differences limited to {limit} parameters, model has {got}")]
    TooManyParameters { got: usize, limit: usize },
    #[error("exact block for layer with {got} weights exceeds the {limit}-entry limit")]
    LayerTooLarge { got: usize, limit: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Multiply–accumulate count for propagating curvature through one layer
/// with `m` inputs and `n` outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacVariant {
    /// Full pre-activation blocks carried through the recursion.
    Exact,
    /// Diagonal-only recursion.
    Simplified,
}

/// Per-layer cost of the curvature recursion, in multiply–accumulates.
pub fn mac_count(variant: MacVariant, m: u64, n: u64) -> u64 {
    match variant {
        // n(2m² + 2n² + 4mn + 3m − 1), written to avoid unsigned underflow.
        MacVariant::Exact => n * (2 * m * m + 2 * n * n + 4 * m * n + 3 * m) - n,
        MacVariant::Simplified => n * (2 + 4 * m),
    }
}

/// Diagonal curvature of the mean one-step loss for either network family,
/// slot-aligned with `net.slots()`. `tau` is the BPTT horizon and is ignored
/// for feed-forward models.
pub fn network_hessian_diag(
    net: &Network,
    z: &Array2<f64>,
    targets: &Array1<f64>,
    tau: usize,
) -> Vec<Array2<f64>> {
    match net {
        Network::Mlp(m) => mlp_hessian_diag(m, z, targets),
        Network::Lstm(l) => lstm_hessian_diag(l, z, targets, tau),
    }
}

/// Floors every entry at zero. The loss Hessian of a non-convex model can
/// have negative diagonal entries; the posterior updates require them
/// non-negative, so negatives are treated as zero curvature.
pub fn clamp_nonnegative(diags: &[Array2<f64>]) -> Vec<Array2<f64>> {
    diags.iter().map(|d| d.mapv(|v| v.max(0.0))).collect()
}

/// Writes per-matrix curvature diagonals as CSV with both raw and clamped
/// columns. `flat` is the column-stacked index within the matrix.
pub fn write_curvature_csv<W: std::io::Write>(
    out: W,
    slots: &[ParamMatrix],
    raw: &[Array2<f64>],
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["matrix", "row", "col", "flat", "raw", "clamped"])?;
    for (slot, d) in slots.iter().zip(raw) {
        let rows = d.nrows();
        for c in 0..d.ncols() {
            for r in 0..rows {
                w.write_record([
                    slot.name.as_str(),
                    &r.to_string(),
                    &c.to_string(),
                    &(c * rows + r).to_string(),
                    &format!("{:e}", d[[r, c]]),
                    &format!("{:e}", d[[r, c]].max(0.0)),
                ])?;
            }
        }
    }
    w.flush()
}
