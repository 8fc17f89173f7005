//! Posterior sampling, Monte-Carlo predictive bands, free-run simulation,
//! and the evaluation metrics used to rank identified models.
//!
//! A trained model is summarised by a [`PosteriorModel`]: the masked mean
//! network, one variance per surviving weight, and the aleatoric noise
//! variance ζ estimated from one-step training residuals. Predictions are
//! Monte-Carlo: weights are drawn per trajectory, the network is run, and
//! the spread across draws gives the epistemic part of the band while ζ
//! provides the floor.

use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::RegressorConfig;
use crate::models::{ModelError, Network};

/// Mixing constant for deriving independent per-draw RNG streams.
pub(crate) const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error("Monte-Carlo estimates need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty sequence")]
    Empty,
    #[error("free run needs {needed} initial outputs to cover the lags, got {got}")]
    InsufficientHistory { got: usize, needed: usize },
    #[error("input sequence ends at {horizon} but predictions start at {start}")]
    HorizonTooShort { horizon: usize, start: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Gaussian posterior over network weights: the masked mean network,
/// per-entry variances (slot-aligned, zero on pruned entries), and the
/// aleatoric output variance ζ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorModel {
    pub network: Network,
    pub variances: Vec<Array2<f64>>,
    pub zeta: f64,
}

impl PosteriorModel {
    /// A point posterior around `network` (all weight variances zero).
    pub fn point(network: Network, zeta: f64) -> PosteriorModel {
        let variances = network
            .slots()
            .iter()
            .map(|s| Array2::zeros(s.values.dim()))
            .collect();
        PosteriorModel {
            network,
            variances,
            zeta,
        }
    }
}

/// Per-step predictive mean and standard deviation from `samples`
/// Monte-Carlo draws. The deviation never falls below √ζ.
#[derive(Debug, Clone)]
pub struct PredictiveBand {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
    pub samples: usize,
}

/// Draws one network from the posterior: each unmasked weight gets an
/// independent Gaussian perturbation with its own variance; pruned entries
/// stay exactly zero.
pub fn sample_posterior(pm: &PosteriorModel, rng: &mut ChaCha8Rng) -> Network {
    let mut net = pm.network.clone();
    for (slot, var) in net.slots_mut().iter_mut().zip(&pm.variances) {
        for ((idx, v), &s2) in slot.values.indexed_iter_mut().zip(var.iter()) {
            if slot.mask[idx] && s2 > 0.0 {
                let eps: f64 = StandardNormal.sample(rng);
                *v += s2.sqrt() * eps;
            }
        }
    }
    net
}

/// Runs `m` posterior draws over the regressor rows `z` and returns the
/// Monte-Carlo predictive mean and variance per row. The variance is the
/// aleatoric ζ plus the spread of the sampled networks' outputs, floored at
/// ζ. Draws use RNG streams derived from `seed`, so results are
/// reproducible and independent of worker scheduling.
pub fn predictive_stats(
    pm: &PosteriorModel,
    z: &Array2<f64>,
    m: usize,
    seed: u64,
) -> Result<(Array1<f64>, Array1<f64>), PredictionError> {
    if m < 2 {
        return Err(PredictionError::TooFewSamples(m));
    }
    let outputs: Vec<Array1<f64>> = (0..m)
        .into_par_iter()
        .map(|draw| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add((draw as u64).wrapping_mul(SEED_STRIDE)));
            let net = sample_posterior(pm, &mut rng);
            net.predict_series(z)
        })
        .collect::<Result<_, _>>()?;
    Ok(moments(&outputs, pm.zeta))
}

/// Mean and ζ-floored variance across sampled trajectories, accumulated in
/// a fixed order so results do not depend on thread scheduling. The
/// epistemic term is computed centered, so a degenerate posterior yields
/// exactly ζ.
fn moments(outputs: &[Array1<f64>], zeta: f64) -> (Array1<f64>, Array1<f64>) {
    let m = outputs.len() as f64;
    let steps = outputs[0].len();
    let mut mean = Array1::<f64>::zeros(steps);
    for out in outputs {
        for t in 0..steps {
            mean[t] += out[t];
        }
    }
    mean.mapv_inplace(|v| v / m);
    let mut var = Array1::<f64>::zeros(steps);
    for out in outputs {
        for t in 0..steps {
            let d = out[t] - mean[t];
            var[t] += d * d;
        }
    }
    for t in 0..steps {
        var[t] = (zeta + var[t] / m).max(zeta);
    }
    (mean, var)
}

/// One-step-ahead predictive band over measured regressors — the default
/// band mode: lagged outputs come from data, uncertainty from the weight
/// posterior plus ζ.
pub fn one_step_bands(
    pm: &PosteriorModel,
    z: &Array2<f64>,
    m: usize,
    seed: u64,
) -> Result<PredictiveBand, PredictionError> {
    let (mean, var) = predictive_stats(pm, z, m, seed)?;
    Ok(PredictiveBand {
        mean,
        std: var.mapv(f64::sqrt),
        samples: m,
    })
}

/// Simulates the model forward using only the input sequence and an initial
/// stretch of measured outputs: predicted outputs are fed back into the
/// output-lag entries of later regressors. Returns ŷ(s) for
/// `s = y_init.len() .. u.len()`.
pub fn free_run_simulate(
    net: &Network,
    u: ArrayView1<f64>,
    y_init: &[f64],
    cfg: &RegressorConfig,
) -> Result<Array1<f64>, PredictionError> {
    let s0 = y_init.len();
    let needed = cfg.l_u.max(cfg.l_y);
    if s0 < needed {
        return Err(PredictionError::InsufficientHistory {
            got: s0,
            needed,
        });
    }
    if u.len() <= s0 {
        return Err(PredictionError::HorizonTooShort {
            horizon: u.len(),
            start: s0,
        });
    }
    let mut history = y_init.to_vec();
    let mut state = net.sim_state();
    let mut z = Array1::zeros(cfg.dimension());
    for s in s0..u.len() {
        for i in 0..=cfg.l_u {
            z[i] = u[s - i];
        }
        for i in 1..=cfg.l_y {
            z[cfg.l_u + i] = history[s - i];
        }
        let y_hat = net.step_sim(&mut state, z.view());
        history.push(y_hat);
    }
    Ok(Array1::from_vec(history.split_off(s0)))
}

/// Free-run simulation driven by an existing regressor matrix: measured
/// input lags are taken from the rows, measured output lags are replaced by
/// fed-back predictions once available. The first row's output-lag block
/// provides the initial conditions. Returns one prediction per row.
pub fn free_run_over_rows(
    net: &Network,
    z: &Array2<f64>,
    cfg: &RegressorConfig,
) -> Result<Array1<f64>, PredictionError> {
    if z.nrows() == 0 {
        return Err(PredictionError::Empty);
    }
    let mut state = net.sim_state();
    let mut predictions: Vec<f64> = Vec::with_capacity(z.nrows());
    let mut row = Array1::zeros(z.ncols());
    for k in 0..z.nrows() {
        row.assign(&z.row(k));
        for i in 1..=cfg.l_y {
            // Row k predicts y(s0 + k); lag i refers to y(s0 + k − i),
            // which we have predicted ourselves once k − i ≥ 0.
            if k >= i {
                row[cfg.l_u + i] = predictions[k - i];
            }
        }
        predictions.push(net.step_sim(&mut state, row.view()));
    }
    Ok(Array1::from_vec(predictions))
}

/// Monte-Carlo free-run band: `m` posterior draws, each simulated once over
/// the whole horizon (weights fixed per trajectory), plus the ζ floor.
pub fn free_run_bands(
    pm: &PosteriorModel,
    u: ArrayView1<f64>,
    y_init: &[f64],
    cfg: &RegressorConfig,
    m: usize,
    seed: u64,
) -> Result<PredictiveBand, PredictionError> {
    if m < 2 {
        return Err(PredictionError::TooFewSamples(m));
    }
    let trajectories: Vec<Array1<f64>> = (0..m)
        .into_par_iter()
        .map(|draw| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add((draw as u64).wrapping_mul(SEED_STRIDE)));
            let net = sample_posterior(pm, &mut rng);
            free_run_simulate(&net, u, y_init, cfg)
        })
        .collect::<Result<_, _>>()?;
    let (mean, var) = moments(&trajectories, pm.zeta);
    Ok(PredictiveBand {
        mean,
        std: var.mapv(f64::sqrt),
        samples: m,
    })
}

/// Root-mean-square error between a prediction and a reference sequence.
pub fn rmse(predicted: ArrayView1<f64>, reference: ArrayView1<f64>) -> Result<f64, PredictionError> {
    if predicted.len() != reference.len() {
        return Err(PredictionError::LengthMismatch {
            left: predicted.len(),
            right: reference.len(),
        });
    }
    if predicted.is_empty() {
        return Err(PredictionError::Empty);
    }
    let sum: f64 = predicted
        .iter()
        .zip(reference.iter())
        .map(|(p, r)| (p - r) * (p - r))
        .sum();
    Ok((sum / predicted.len() as f64).sqrt())
}

/// Fraction of pruned parameters over all trainable matrices.
pub fn sparsity(net: &Network) -> f64 {
    let total: usize = net.slots().iter().map(|s| s.len()).sum();
    let pruned: usize = net.slots().iter().map(|s| s.pruned_count()).sum();
    pruned as f64 / total as f64
}

/// Aleatoric variance estimate: population variance of the one-step-ahead
/// residuals of the trained mean model on the estimation data.
pub fn estimate_zeta(residuals: ArrayView1<f64>) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    let n = residuals.len() as f64;
    let mean = residuals.sum() / n;
    residuals.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n
}
