//! Grouped prior layouts: ω/ψ refresh rules, the sparse-group penalty, and
//! dynamic pruning.
//!
//! A prior grouping decides which weights share a width ψ and a
//! regularisation weight ω. Per-entry priors give a weighted ℓ1 penalty;
//! row/column priors give weighted group-ℓ2 penalties over a matrix's rows
//! or columns; the combined layout applies both at once, with per-entry
//! widths merged harmonically. Masked (pruned) entries are excluded from
//! every norm, sum, and update.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::SblError;
use crate::models::ParamMatrix;

/// Lower bound on regularisation weights; keeps ψ = |W|/ω finite when the
/// evidence is flat (α = 0).
pub const OMEGA_FLOOR: f64 = 1e-8;

/// Upper bound on prior widths.
pub const PSI_CAP: f64 = 1e8;

/// Lower bound on the per-entry widths returned to the posterior step, so a
/// weight sitting exactly at zero cannot produce a degenerate (zero-width)
/// prior before pruning removes it.
pub const PSI_FLOOR: f64 = 1e-12;

/// Which weights share a prior group within one matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// One group per entry (weighted ℓ1).
    ShapeWise,
    /// One group per matrix row (all fan-out of one input).
    RowWise,
    /// One group per matrix column (all fan-in of one unit).
    ColumnWise,
    /// Row and column groups simultaneously.
    RowAndColumn,
}

impl std::str::FromStr for Grouping {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shape_wise" | "shape" => Ok(Grouping::ShapeWise),
            "row_wise" | "row" => Ok(Grouping::RowWise),
            "column_wise" | "column" => Ok(Grouping::ColumnWise),
            "row_and_column" | "combined" => Ok(Grouping::RowAndColumn),
            other => Err(format!(
                "unknown grouping '{other}' (expected shape_wise, row_wise, column_wise, or row_and_column)"
            )),
        }
    }
}

/// Regularisation weights ω in the grouping's own layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum GroupWeights {
    Shape(Array2<f64>),
    Row(Array1<f64>),
    Column(Array1<f64>),
    RowAndColumn { row: Array1<f64>, col: Array1<f64> },
}

impl GroupWeights {
    /// The all-ones initial layout ω(0) = 𝟙 for a matrix of shape
    /// `(rows, cols)`.
    pub fn ones(grouping: Grouping, rows: usize, cols: usize) -> GroupWeights {
        match grouping {
            Grouping::ShapeWise => GroupWeights::Shape(Array2::ones((rows, cols))),
            Grouping::RowWise => GroupWeights::Row(Array1::ones(rows)),
            Grouping::ColumnWise => GroupWeights::Column(Array1::ones(cols)),
            Grouping::RowAndColumn => GroupWeights::RowAndColumn {
                row: Array1::ones(rows),
                col: Array1::ones(cols),
            },
        }
    }
}

/// Harmonic merge of a row width and a column width:
/// ψ = 1/(1/ψ_row + 1/ψ_col) ≤ min(ψ_row, ψ_col).
pub fn combined_prior_width(psi_row: f64, psi_col: f64) -> Result<f64, SblError> {
    if psi_row <= 0.0 {
        return Err(SblError::NonPositivePsi(psi_row));
    }
    if psi_col <= 0.0 {
        return Err(SblError::NonPositivePsi(psi_col));
    }
    Ok(1.0 / (1.0 / psi_row + 1.0 / psi_col))
}

/// ℓ2 norm of a row's live entries.
fn row_norm(slot: &ParamMatrix, a: usize) -> f64 {
    let mut s = 0.0;
    for b in 0..slot.values.ncols() {
        if slot.mask[[a, b]] {
            s += slot.values[[a, b]] * slot.values[[a, b]];
        }
    }
    s.sqrt()
}

/// ℓ2 norm of a column's live entries.
fn col_norm(slot: &ParamMatrix, b: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..slot.values.nrows() {
        if slot.mask[[a, b]] {
            s += slot.values[[a, b]] * slot.values[[a, b]];
        }
    }
    s.sqrt()
}

fn row_groups(slot: &ParamMatrix, alpha: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let rows = slot.values.nrows();
    let mut omega = Array1::zeros(rows);
    let mut psi = Array1::zeros(rows);
    for a in 0..rows {
        let live = slot.mask.row(a).iter().any(|&m| m);
        if !live {
            continue;
        }
        let alpha_sum: f64 = (0..slot.values.ncols())
            .filter(|&b| slot.mask[[a, b]])
            .map(|b| alpha[[a, b]])
            .sum();
        omega[a] = alpha_sum.sqrt().max(OMEGA_FLOOR);
        psi[a] = (row_norm(slot, a) / omega[a]).min(PSI_CAP);
    }
    (omega, psi)
}

fn col_groups(slot: &ParamMatrix, alpha: &Array2<f64>) -> (Array1<f64>, Array1<f64>) {
    let cols = slot.values.ncols();
    let mut omega = Array1::zeros(cols);
    let mut psi = Array1::zeros(cols);
    for b in 0..cols {
        let live = slot.mask.column(b).iter().any(|&m| m);
        if !live {
            continue;
        }
        let alpha_sum: f64 = (0..slot.values.nrows())
            .filter(|&a| slot.mask[[a, b]])
            .map(|a| alpha[[a, b]])
            .sum();
        omega[b] = alpha_sum.sqrt().max(OMEGA_FLOOR);
        psi[b] = (col_norm(slot, b) / omega[b]).min(PSI_CAP);
    }
    (omega, psi)
}

/// Refreshes (ω, ψ) for one matrix from the per-entry CCCP slopes `alpha`.
///
/// Returns the regularisation weights in the grouping's layout and the
/// per-entry prior widths for the next posterior step. Live entries get a
/// width in `[PSI_FLOOR, PSI_CAP]`; masked entries get ω and ψ of zero and
/// never contribute to group sums or norms.
pub fn update_omega_psi(
    slot: &ParamMatrix,
    alpha: &Array2<f64>,
    grouping: Grouping,
) -> (GroupWeights, Array2<f64>) {
    let (rows, cols) = slot.values.dim();
    let mut psi = Array2::zeros((rows, cols));
    match grouping {
        Grouping::ShapeWise => {
            let mut omega = Array2::zeros((rows, cols));
            for a in 0..rows {
                for b in 0..cols {
                    if !slot.mask[[a, b]] {
                        continue;
                    }
                    let om = alpha[[a, b]].sqrt().max(OMEGA_FLOOR);
                    omega[[a, b]] = om;
                    psi[[a, b]] = (slot.values[[a, b]].abs() / om)
                        .clamp(PSI_FLOOR, PSI_CAP);
                }
            }
            (GroupWeights::Shape(omega), psi)
        }
        Grouping::RowWise => {
            let (omega, psi_row) = row_groups(slot, alpha);
            for a in 0..rows {
                for b in 0..cols {
                    if slot.mask[[a, b]] {
                        psi[[a, b]] = psi_row[a].clamp(PSI_FLOOR, PSI_CAP);
                    }
                }
            }
            (GroupWeights::Row(omega), psi)
        }
        Grouping::ColumnWise => {
            let (omega, psi_col) = col_groups(slot, alpha);
            for a in 0..rows {
                for b in 0..cols {
                    if slot.mask[[a, b]] {
                        psi[[a, b]] = psi_col[b].clamp(PSI_FLOOR, PSI_CAP);
                    }
                }
            }
            (GroupWeights::Column(omega), psi)
        }
        Grouping::RowAndColumn => {
            let (omega_row, psi_row) = row_groups(slot, alpha);
            let (omega_col, psi_col) = col_groups(slot, alpha);
            for a in 0..rows {
                for b in 0..cols {
                    if !slot.mask[[a, b]] {
                        continue;
                    }
                    let merged = if psi_row[a] > 0.0 && psi_col[b] > 0.0 {
                        1.0 / (1.0 / psi_row[a] + 1.0 / psi_col[b])
                    } else {
                        0.0
                    };
                    psi[[a, b]] = merged.clamp(PSI_FLOOR, PSI_CAP);
                }
            }
            (
                GroupWeights::RowAndColumn {
                    row: omega_row,
                    col: omega_col,
                },
                psi,
            )
        }
    }
}

/// Weighted sparse-group penalty ρ(ω, W) for one matrix.
fn slot_penalty(slot: &ParamMatrix, weights: &GroupWeights) -> f64 {
    match weights {
        GroupWeights::Shape(omega) => {
            let mut p = 0.0;
            for (idx, &w) in slot.values.indexed_iter() {
                if slot.mask[idx] {
                    p += omega[idx] * w.abs();
                }
            }
            p
        }
        GroupWeights::Row(omega) => (0..slot.values.nrows())
            .map(|a| omega[a] * row_norm(slot, a))
            .sum(),
        GroupWeights::Column(omega) => (0..slot.values.ncols())
            .map(|b| omega[b] * col_norm(slot, b))
            .sum(),
        GroupWeights::RowAndColumn { row, col } => {
            let r: f64 = (0..slot.values.nrows())
                .map(|a| row[a] * row_norm(slot, a))
                .sum();
            let c: f64 = (0..slot.values.ncols())
                .map(|b| col[b] * col_norm(slot, b))
                .sum();
            r + c
        }
    }
}

/// Total penalty Σ_l ρ(ω^l, W^l) over all matrices.
pub fn penalty(slots: &[ParamMatrix], weights: &[GroupWeights]) -> f64 {
    slots
        .iter()
        .zip(weights)
        .map(|(s, w)| slot_penalty(s, w))
        .sum()
}

/// Full training objective: data loss plus λ times the grouped penalty.
pub fn regularised_loss(
    data_loss: f64,
    slots: &[ParamMatrix],
    weights: &[GroupWeights],
    lambda: f64,
) -> f64 {
    data_loss + lambda * penalty(slots, weights)
}

/// Subgradient of one matrix's penalty, zero on masked entries and on
/// entries whose group norm (or own value, shape-wise) is zero.
pub fn penalty_grads(slot: &ParamMatrix, weights: &GroupWeights) -> Array2<f64> {
    let (rows, cols) = slot.values.dim();
    let mut g = Array2::zeros((rows, cols));
    match weights {
        GroupWeights::Shape(omega) => {
            for (idx, &w) in slot.values.indexed_iter() {
                if slot.mask[idx] && w != 0.0 {
                    g[idx] = omega[idx] * w.signum();
                }
            }
        }
        GroupWeights::Row(omega) => {
            for a in 0..rows {
                let norm = row_norm(slot, a);
                if norm == 0.0 {
                    continue;
                }
                for b in 0..cols {
                    if slot.mask[[a, b]] {
                        g[[a, b]] = omega[a] * slot.values[[a, b]] / norm;
                    }
                }
            }
        }
        GroupWeights::Column(omega) => {
            for b in 0..cols {
                let norm = col_norm(slot, b);
                if norm == 0.0 {
                    continue;
                }
                for a in 0..rows {
                    if slot.mask[[a, b]] {
                        g[[a, b]] = omega[b] * slot.values[[a, b]] / norm;
                    }
                }
            }
        }
        GroupWeights::RowAndColumn { row, col } => {
            for a in 0..rows {
                let norm = row_norm(slot, a);
                if norm == 0.0 {
                    continue;
                }
                for b in 0..cols {
                    if slot.mask[[a, b]] {
                        g[[a, b]] = row[a] * slot.values[[a, b]] / norm;
                    }
                }
            }
            for b in 0..cols {
                let norm = col_norm(slot, b);
                if norm == 0.0 {
                    continue;
                }
                for a in 0..rows {
                    if slot.mask[[a, b]] {
                        g[[a, b]] += col[b] * slot.values[[a, b]] / norm;
                    }
                }
            }
        }
    }
    g
}

/// Permanently masks every live entry whose prior width or magnitude fell
/// under its threshold, zeroes the masked values, and returns how many
/// entries were newly pruned. Already-pruned entries never revive.
pub fn prune(
    slots: &mut [ParamMatrix],
    psis: &[Array2<f64>],
    kappa_psi: f64,
    kappa_w: f64,
) -> usize {
    let mut newly = 0;
    for (slot, psi) in slots.iter_mut().zip(psis) {
        for (idx, m) in slot.mask.indexed_iter_mut() {
            if *m && (psi[idx] < kappa_psi || slot.values[idx].abs() < kappa_w) {
                *m = false;
                newly += 1;
            }
        }
        slot.apply_mask();
    }
    newly
}
