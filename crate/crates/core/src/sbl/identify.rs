//! The outer identification loop: repeated sparse training runs, each a
//! sequence of train → curvature → posterior → prior-refresh → prune
//! cycles, with the best model picked by free-run validation error.
//!
//! Repeats differ only in their derived seed and run independently (in
//! parallel); results are merged in repeat order so the report is
//! byte-reproducible for a given config and seed.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::posterior::{posterior_variance, update_alpha};
use super::priors::{
    penalty_grads, prune, regularised_loss, update_omega_psi, GroupWeights, Grouping,
};
use super::SblError;
use crate::data::{RegressionMatrix, RegressorConfig};
use crate::hessian::{clamp_nonnegative, network_hessian_diag};
use crate::models::{cosine_lr, AdamState, ModelSpec, Network, ParamMatrix};
use crate::prediction::{estimate_zeta, free_run_over_rows, rmse, sparsity, SEED_STRIDE};

/// Knobs for one identification experiment. A single λ covers the whole
/// experiment; the groupwise regularisation weights ω adapt per cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentificationConfig {
    /// Penalty strength λ; zero disables regularisation entirely.
    pub lambda: f64,
    /// Prior/prune cycles per repeat.
    pub cycles: usize,
    /// Full-batch optimiser epochs per cycle.
    pub epochs: usize,
    /// Independent restarts.
    pub repeats: usize,
    /// Prune any weight whose prior width falls below this.
    pub kappa_psi: f64,
    /// Prune any weight whose magnitude falls below this.
    pub kappa_w: f64,
    /// Prior grouping for input-facing matrices.
    pub input_grouping: Grouping,
    /// Prior grouping for the remaining weight matrices.
    pub hidden_grouping: Grouping,
    /// Truncation depth for recurrent gradients and curvature.
    pub tau: usize,
    /// Root seed; repeat r runs from `seed + r·stride`.
    pub seed: u64,
    /// Initial Adam learning rate (cosine-annealed within each cycle).
    pub learning_rate: f64,
    /// Final learning rate of the cosine schedule.
    pub lr_min: f64,
}

impl Default for IdentificationConfig {
    fn default() -> Self {
        IdentificationConfig {
            lambda: 1e-3,
            cycles: 6,
            epochs: 200,
            repeats: 5,
            kappa_psi: 1e-3,
            kappa_w: 1e-3,
            input_grouping: Grouping::RowAndColumn,
            hidden_grouping: Grouping::ShapeWise,
            tau: 10,
            seed: 0,
            learning_rate: 0.01,
            lr_min: 1e-4,
        }
    }
}

impl IdentificationConfig {
    /// Rejects configurations that cannot run. Zero λ and zero prune
    /// thresholds are legal (they reduce the loop to plain training).
    pub fn validate(&self) -> Result<(), SblError> {
        if self.cycles == 0 {
            return Err(SblError::BadConfig("cycles must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(SblError::BadConfig("epochs must be at least 1".into()));
        }
        if self.repeats == 0 {
            return Err(SblError::BadConfig("repeats must be at least 1".into()));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(SblError::BadConfig(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        for (name, v) in [("kappa_psi", self.kappa_psi), ("kappa_w", self.kappa_w)] {
            if !v.is_finite() || v < 0.0 {
                return Err(SblError::BadConfig(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(SblError::BadConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !self.lr_min.is_finite() || self.lr_min < 0.0 || self.lr_min > self.learning_rate {
            return Err(SblError::BadConfig(format!(
                "lr_min must lie in [0, learning_rate], got {}",
                self.lr_min
            )));
        }
        if self.tau == 0 {
            return Err(SblError::BadConfig("tau must be at least 1".into()));
        }
        Ok(())
    }
}

/// One cycle's outcome within a repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    /// Regularised training objective after this cycle's epochs.
    pub train_loss: f64,
    /// Free-run RMSE on the validation rows.
    pub val_rmse: f64,
    /// Fraction of weights pruned so far.
    pub sparsity: f64,
    /// Regressor indices no input-facing matrix reads any more.
    pub pruned_regressors: Vec<usize>,
}

/// One independent restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatRecord {
    pub repeat: usize,
    pub seed: u64,
    pub cycles: Vec<CycleRecord>,
    /// Diagnostic when the repeat aborted (non-finite loss or gradient).
    pub diverged: Option<String>,
    /// Per-cycle mask snapshots (one matrix per slot), kept for artifact
    /// writing but not serialised into the report.
    #[serde(skip, default)]
    pub cycle_masks: Vec<Vec<Array2<bool>>>,
}

/// The winning model and everything needed to predict with uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestModel {
    pub repeat: usize,
    pub cycle: usize,
    pub val_rmse: f64,
    pub sparsity: f64,
    pub network: Network,
    /// Posterior weight variances, slot-aligned; zero on pruned entries.
    pub variances: Vec<Array2<f64>>,
    /// Diagonal curvature as computed, slot-aligned.
    pub hessian_raw: Vec<Array2<f64>>,
    /// The same curvature clamped to be nonnegative.
    pub hessian_clamped: Vec<Array2<f64>>,
    /// Noise-floor variance: population variance of one-step residuals on
    /// the estimation rows.
    pub zeta: f64,
}

/// Full experiment outcome: config echo, every repeat's trajectory, and the
/// best model (absent when every repeat diverged).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentificationReport {
    pub config: IdentificationConfig,
    pub repeats: Vec<RepeatRecord>,
    pub best: Option<BestModel>,
}

/// Grouping used for one matrix: biases are always per-entry, input-facing
/// matrices use the configured input grouping, everything else the hidden
/// grouping.
fn grouping_for(slot: &ParamMatrix, cfg: &IdentificationConfig) -> Grouping {
    if slot.name.ends_with(".b") {
        Grouping::ShapeWise
    } else if slot.input_facing {
        cfg.input_grouping
    } else {
        cfg.hidden_grouping
    }
}

/// Data loss and its gradients for either network family.
fn data_grads(net: &Network, est: &RegressionMatrix, tau: usize) -> (f64, Vec<Array2<f64>>) {
    match net {
        Network::Mlp(m) => m.backward_batch(&est.z, &est.targets),
        Network::Lstm(l) => l.bptt(&est.z, &est.targets, tau),
    }
}

/// Mean one-step loss `(1/N) Σ ½(ŷ−y)²` at the current parameters.
fn one_step_loss(net: &Network, data: &RegressionMatrix) -> Result<f64, SblError> {
    let preds = net.predict_series(&data.z)?;
    let err = &preds - &data.targets;
    Ok(0.5 * err.mapv(|e| e * e).mean().unwrap_or(0.0))
}

/// Candidate comparison: lower validation RMSE wins; ties go to the sparser
/// model, then to the earlier (repeat, cycle).
fn improves(challenger: (f64, f64), incumbent: (f64, f64)) -> bool {
    challenger.0 < incumbent.0 || (challenger.0 == incumbent.0 && challenger.1 > incumbent.1)
}

struct CycleOutcome {
    record: CycleRecord,
    masks: Vec<Array2<bool>>,
    candidate: Option<BestModel>,
}

/// Everything after a cycle's training epochs: curvature, posterior,
/// prior refresh, pruning, and validation.
#[allow(clippy::too_many_arguments)]
fn cycle_tail(
    cfg: &IdentificationConfig,
    est: &RegressionMatrix,
    val: &RegressionMatrix,
    lags: &RegressorConfig,
    net: &mut Network,
    groupings: &[Grouping],
    weights: &mut Vec<GroupWeights>,
    psi: &mut Vec<Array2<f64>>,
    repeat: usize,
    cycle: usize,
    incumbent: Option<(f64, f64)>,
) -> Result<CycleOutcome, SblError> {
    // Objective actually optimised this cycle (pre-refresh weights).
    let train_loss = regularised_loss(
        one_step_loss(net, est)?,
        net.slots(),
        weights,
        cfg.lambda,
    );

    let raw = network_hessian_diag(net, &est.z, &est.targets, cfg.tau);
    let clamped = clamp_nonnegative(&raw);

    // Per-entry posterior variance and CCCP slope at the trained weights.
    let mut sigmas: Vec<Array2<f64>> = Vec::with_capacity(clamped.len());
    let mut alphas: Vec<Array2<f64>> = Vec::with_capacity(clamped.len());
    for (si, slot) in net.slots().iter().enumerate() {
        let mut sig = Array2::zeros(slot.values.dim());
        let mut al = Array2::zeros(slot.values.dim());
        for (idx, &m) in slot.mask.indexed_iter() {
            if !m {
                continue;
            }
            let s = posterior_variance(clamped[si][idx], psi[si][idx])?;
            sig[idx] = s;
            al[idx] = update_alpha(s, psi[si][idx])?;
        }
        sigmas.push(sig);
        alphas.push(al);
    }

    // Refresh the grouped priors, then prune against the new widths.
    for (si, slot) in net.slots().iter().enumerate() {
        let (w, p) = update_omega_psi(slot, &alphas[si], groupings[si]);
        weights[si] = w;
        psi[si] = p;
    }
    prune(net.slots_mut(), psi, cfg.kappa_psi, cfg.kappa_w);

    let preds = free_run_over_rows(net, &val.z, lags)?;
    let val_rmse = rmse(preds.view(), val.targets.view())?;
    let spars = sparsity(net);
    let masks: Vec<Array2<bool>> = net.slots().iter().map(|s| s.mask.clone()).collect();

    let candidate = if val_rmse.is_finite()
        && incumbent.is_none_or(|inc| improves((val_rmse, spars), inc))
    {
        let one_step = net.predict_series(&est.z)?;
        let residuals: Array1<f64> = &est.targets - &one_step;
        // Pruned entries carry no posterior mass.
        for (sig, slot) in sigmas.iter_mut().zip(net.slots()) {
            for (idx, &m) in slot.mask.indexed_iter() {
                if !m {
                    sig[idx] = 0.0;
                }
            }
        }
        Some(BestModel {
            repeat,
            cycle,
            val_rmse,
            sparsity: spars,
            network: net.clone(),
            variances: sigmas,
            hessian_raw: raw,
            hessian_clamped: clamped,
            zeta: estimate_zeta(residuals.view()),
        })
    } else {
        None
    };

    Ok(CycleOutcome {
        record: CycleRecord {
            cycle,
            train_loss,
            val_rmse,
            sparsity: spars,
            pruned_regressors: net.pruned_regressors(),
        },
        masks,
        candidate,
    })
}

fn run_repeat(
    cfg: &IdentificationConfig,
    est: &RegressionMatrix,
    val: &RegressionMatrix,
    lags: &RegressorConfig,
    spec: &ModelSpec,
    repeat: usize,
) -> (RepeatRecord, Option<BestModel>) {
    let seed = cfg.seed.wrapping_add((repeat as u64).wrapping_mul(SEED_STRIDE));
    let mut net = Network::init(spec, seed);
    let groupings: Vec<Grouping> = net
        .slots()
        .iter()
        .map(|s| grouping_for(s, cfg))
        .collect();
    // Cycle 0 trains against unit weights and unit widths, i.e. a plain
    // sparse group lasso objective.
    let mut weights: Vec<GroupWeights> = net
        .slots()
        .iter()
        .zip(&groupings)
        .map(|(s, &g)| GroupWeights::ones(g, s.values.nrows(), s.values.ncols()))
        .collect();
    let mut psi: Vec<Array2<f64>> = net
        .slots()
        .iter()
        .map(|s| Array2::ones(s.values.dim()))
        .collect();

    let mut record = RepeatRecord {
        repeat,
        seed,
        cycles: Vec::new(),
        diverged: None,
        cycle_masks: Vec::new(),
    };
    let mut best: Option<BestModel> = None;

    'cycles: for cycle in 0..cfg.cycles {
        let mut adam = AdamState::new(net.slots());
        for epoch in 0..cfg.epochs {
            let lr = cosine_lr(cfg.learning_rate, cfg.lr_min, epoch, cfg.epochs);
            let (data_loss, mut grads) = data_grads(&net, est, cfg.tau);
            if !data_loss.is_finite() {
                record.diverged = Some(format!(
                    "non-finite training loss at cycle {cycle}, epoch {epoch}"
                ));
                break 'cycles;
            }
            if cfg.lambda != 0.0 {
                for ((g, slot), w) in grads.iter_mut().zip(net.slots()).zip(&weights) {
                    g.scaled_add(cfg.lambda, &penalty_grads(slot, w));
                }
            }
            if let Err(e) = adam.step(net.slots_mut(), &grads, lr) {
                record.diverged = Some(format!("cycle {cycle}, epoch {epoch}: {e}"));
                break 'cycles;
            }
        }
        net.apply_masks();

        let incumbent = best.as_ref().map(|b| (b.val_rmse, b.sparsity));
        match cycle_tail(
            cfg, est, val, lags, &mut net, &groupings, &mut weights, &mut psi, repeat, cycle,
            incumbent,
        ) {
            Ok(outcome) => {
                record.cycles.push(outcome.record);
                record.cycle_masks.push(outcome.masks);
                if let Some(c) = outcome.candidate {
                    best = Some(c);
                }
            }
            Err(e) => {
                record.diverged = Some(format!("cycle {cycle}: {e}"));
                break 'cycles;
            }
        }
    }

    // A repeat that aborted is reported for diagnostics but fields no model.
    if record.diverged.is_some() {
        best = None;
    }
    (record, best)
}

/// Runs the full identification experiment: `repeats` independent restarts
/// of `cycles` train/prune cycles each, merged deterministically.
///
/// Returns the per-repeat trajectories and the best surviving model by
/// free-run validation RMSE (ties: higher sparsity, then lower repeat
/// index). `best` is `None` only when every repeat diverged.
pub fn run_identification(
    cfg: &IdentificationConfig,
    est: &RegressionMatrix,
    val: &RegressionMatrix,
    lags: &RegressorConfig,
    spec: &ModelSpec,
) -> Result<IdentificationReport, SblError> {
    cfg.validate()?;
    if est.z.nrows() == 0 || val.z.nrows() == 0 {
        return Err(SblError::BadConfig(
            "estimation and validation sets must be non-empty".into(),
        ));
    }
    for z in [&est.z, &val.z] {
        if z.ncols() != spec.input_dim() {
            return Err(SblError::InputWidthMismatch {
                model: spec.input_dim(),
                data: z.ncols(),
            });
        }
    }
    if lags.l_u + lags.l_y + 1 != est.z.ncols() {
        return Err(SblError::BadConfig(format!(
            "lag structure implies {} regressors but the data has {}",
            lags.l_u + lags.l_y + 1,
            est.z.ncols()
        )));
    }

    let results: Vec<(RepeatRecord, Option<BestModel>)> = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| run_repeat(cfg, est, val, lags, spec, r))
        .collect();

    let mut repeats = Vec::with_capacity(results.len());
    let mut best: Option<BestModel> = None;
    for (record, candidate) in results {
        repeats.push(record);
        if let Some(c) = candidate {
            best = match best {
                None => Some(c),
                Some(b) => {
                    if improves((c.val_rmse, c.sparsity), (b.val_rmse, b.sparsity)) {
                        Some(c)
                    } else {
                        Some(b)
                    }
                }
            };
        }
    }

    Ok(IdentificationReport {
        config: cfg.clone(),
        repeats,
        best,
    })
}
