//! Sparse Bayesian identification of dynamic systems with neural networks.
//!
//! The crate covers the full workflow:
//!
//! * [`data`] — CSV ingestion, detrending, lagged-regressor construction,
//!   estimation/validation splits.
//! * [`models`] — feed-forward and LSTM networks with exact gradients,
//!   masked (pruned) weights, Adam + cosine-annealed training steps.
//! * [`hessian`] — curvature diagnostics: exact and simplified layer-wise
//!   Hessians, recurrent Hessians accumulated along BPTT, finite-difference
//!   oracles, and operation-count estimates.
//! * [`sbl`] — sparse Bayesian learning: posterior variances, relevance
//!   updates, structured prior widths, pruning, and the full iterative
//!   identification loop.
//! * [`prediction`] — posterior sampling, Monte-Carlo predictive bands,
//!   free-run simulation, and the usual fit metrics.
//!
//! All numerics are `f64`; randomness is always seeded explicitly so that
//! identical configurations reproduce identical results.

pub mod data;
pub mod hessian;
pub mod models;
pub mod prediction;
pub mod sbl;
