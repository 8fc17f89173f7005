//! Sparse Bayesian learning of network weights.
//!
//! Each weight gets a zero-mean Gaussian prior whose width ψ is learned by
//! evidence maximisation. The marginal-likelihood objective splits into a
//! convex part and a concave part; linearising the concave part (the CCCP
//! step) turns each hyper-parameter update into a closed form driven by the
//! clamped loss-curvature diagonals:
//!
//! * [`posterior_variance`] / [`update_alpha`] — per-entry posterior width
//!   and CCCP slope,
//! * [`update_omega_psi`] — the grouped ω/ψ refresh for all four prior
//!   layouts (per-entry, per-row, per-column, combined),
//! * [`penalty`] / [`regularised_loss`] — the weighted sparse-group penalty
//!   the optimiser actually descends,
//! * [`prune`] — permanent masking of collapsed weights,
//! * [`run_identification`] — the full multi-repeat training loop.

mod identify;
mod posterior;
mod priors;

pub use identify::{
    run_identification, BestModel, CycleRecord, IdentificationConfig, IdentificationReport,
    RepeatRecord,
};
pub use posterior::{cccp_gap, posterior_variance, solve_psi_scalar, update_alpha, PsiSolution};
pub use priors::{
    combined_prior_width, penalty, penalty_grads, prune, regularised_loss, update_omega_psi,
    GroupWeights, Grouping, OMEGA_FLOOR, PSI_CAP,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SblError {
    #[error("prior width must be positive, got {0}")]
    NonPositivePsi(f64),
    #[error("posterior variance {sigma} exceeds prior width {psi}; curvature was not clamped")]
    VarianceAbovePrior { sigma: f64, psi: f64 },
    #[error("negative CCCP slope {0}; curvature was not clamped")]
    NegativeAlpha(f64),
    #[error("width objective unbounded below: zero slope with weight {0}")]
    UnboundedObjective(f64),
    #[error("configuration invalid: {0}")]
    BadConfig(String),
    #[error("model input width {model} does not match regressor width {data}")]
    InputWidthMismatch { model: usize, data: usize },
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
    #[error(transparent)]
    Prediction(#[from] crate::prediction::PredictionError),
}
