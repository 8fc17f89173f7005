//! Per-entry posterior and CCCP closed forms.
//!
//! Under the diagonal curvature approximation every weight decouples: its
//! posterior variance, the slope of the linearised concave evidence term,
//! and the optimal prior width all have scalar closed forms.

use super::SblError;

/// Posterior variance of one weight: Σ = 1/(H + 1/ψ).
///
/// `h` is the clamped loss curvature (≥ 0), `ψ` the current prior width.
/// For nonnegative curvature Σ ≤ ψ holds analytically, so any excess is
/// double-reciprocal roundoff and is clamped away; negative curvature is
/// passed through raw for `update_alpha` to reject.
pub fn posterior_variance(h: f64, psi: f64) -> Result<f64, SblError> {
    if psi <= 0.0 {
        return Err(SblError::NonPositivePsi(psi));
    }
    let sigma = 1.0 / (h + 1.0 / psi);
    Ok(if h >= 0.0 { sigma.min(psi) } else { sigma })
}

/// CCCP slope for one weight: α = 1/ψ − Σ/ψ² = (1/ψ)(1 − Σ/ψ).
///
/// Nonnegative whenever Σ ≤ ψ, which the clamped curvature guarantees; a
/// violation signals an unclamped Hessian upstream and is reported.
pub fn update_alpha(sigma: f64, psi: f64) -> Result<f64, SblError> {
    if psi <= 0.0 {
        return Err(SblError::NonPositivePsi(psi));
    }
    if sigma > psi {
        return Err(SblError::VarianceAbovePrior { sigma, psi });
    }
    Ok((1.0 - sigma / psi) / psi)
}

/// Closed-form minimiser of the per-entry width objective W²/ψ + αψ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiSolution {
    pub psi: f64,
    /// Objective value at the minimiser: 2√α·|W|.
    pub objective: f64,
}

/// Minimises W²/ψ + αψ over ψ > 0: ψ* = |W|/√α.
///
/// Returns `None` when both the slope and the weight vanish (the objective
/// is identically zero — leave ψ unchanged). A zero or negative slope with a
/// nonzero weight makes the objective unbounded below, which is an error.
pub fn solve_psi_scalar(w: f64, alpha: f64) -> Result<Option<PsiSolution>, SblError> {
    if alpha < 0.0 {
        return Err(SblError::NegativeAlpha(alpha));
    }
    if alpha == 0.0 {
        return if w == 0.0 {
            Ok(None)
        } else {
            Err(SblError::UnboundedObjective(w))
        };
    }
    let root = alpha.sqrt();
    Ok(Some(PsiSolution {
        psi: w.abs() / root,
        objective: 2.0 * root * w.abs(),
    }))
}

/// Evidence-side concave term v(ψ) = Σ log ψ + Σ log(H + 1/ψ), diagonal
/// closed form of log|Ψ| + log|H + Ψ⁻¹|.
fn concave_term(psi: &[f64], h: &[f64]) -> f64 {
    psi.iter()
        .zip(h)
        .map(|(&p, &hh)| p.ln() + (hh + 1.0 / p).ln())
        .sum()
}

/// Tangency gap of the CCCP linearisation:
/// `[v(ψ_k) + α(ψ_k)·(ψ_cand − ψ_k)] − v(ψ_cand)`.
///
/// v is concave, so its tangent at ψ_k over-estimates it everywhere and the
/// gap is nonnegative (zero at the tangent point). Used as a property-test
/// primitive certifying the α update really is the gradient of v.
pub fn cccp_gap(psi_candidate: &[f64], psi_k: &[f64], h: &[f64]) -> f64 {
    let mut linearised = concave_term(psi_k, h);
    for ((&cand, &p), &hh) in psi_candidate.iter().zip(psi_k).zip(h) {
        let sigma = 1.0 / (hh + 1.0 / p);
        let alpha = (1.0 - sigma / p) / p;
        linearised += alpha * (cand - p);
    }
    linearised - concave_term(psi_candidate, h)
}
