//! Derived quantities of the reduced problem.
//!
//! With the conditioning asset first, `q = Σe₁/σ₁` is the loading of every
//! asset on the stress variable and `Q = Σ − qqᵀ` is what remains of the
//! covariance once that direction is projected out. Eliminating `x₁` through
//! the budget constraint leaves the block `Q̂` and the excess vectors
//! `μ̂ᵢ = μᵢ₊₁ − μ₁`, `q̂ᵢ = qᵢ₊₁ − σ₁`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CovarError, Result};
use crate::linalg::Cholesky;
use crate::model::{ModelWarning, RiskParams, ValidatedModel};

/// Threshold on the normalized Gram determinant of {1, μ, q}.
pub const INDEPENDENCE_TOL: f64 = 1e-10;
/// Scores below this (but above [`INDEPENDENCE_TOL`]) get a warning.
pub const INDEPENDENCE_WARN: f64 = 1e-6;

/// Gram matrix of μ̂ and q̂ under the Q̂⁻¹ inner product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gramian {
    #[serde(rename = "alpha_C")]
    pub alpha: f64,
    #[serde(rename = "beta_C")]
    pub beta: f64,
    #[serde(rename = "gamma_C")]
    pub gamma: f64,
    #[serde(rename = "detG")]
    pub det: f64,
}

#[derive(Debug, Clone)]
pub struct ReducedModel {
    /// `q = Σe₁/σ₁`.
    pub loading: DVector<f64>,
    /// `Q = Σ − qqᵀ`; first row and column are exactly zero.
    pub residual: DMatrix<f64>,
    /// Lower-right (n−1)×(n−1) block of `Q`.
    pub residual_hat: DMatrix<f64>,
    pub mu_hat: DVector<f64>,
    pub loading_hat: DVector<f64>,
    pub gram: Gramian,
    /// `Δ = b²α_C − a² det G`.
    pub delta: f64,
    pub independent: bool,
    /// Normalized Gram determinant of {1, μ, q}, in [0, 1].
    pub independence_score: f64,
    pub warnings: Vec<ModelWarning>,
    /// Intensities Δ was computed with.
    pub risk: RiskParams,
    residual_hat_chol: Cholesky,
    /// Q̂⁻¹μ̂
    pub(crate) qinv_mu: DVector<f64>,
    /// Q̂⁻¹q̂
    pub(crate) qinv_q: DVector<f64>,
}

impl ReducedModel {
    pub fn residual_hat_cholesky(&self) -> &Cholesky {
        &self.residual_hat_chol
    }

    /// `x̂ᵀQ̂x̂` for a reduced vector.
    pub fn residual_form(&self, x_hat: &DVector<f64>) -> f64 {
        let y = self.residual_hat_chol.l().transpose() * x_hat;
        y.dot(&y)
    }

    /// Δ recomputed for different intensities.
    pub fn delta_for(&self, a: f64, b: f64) -> f64 {
        b * b * self.gram.alpha - a * a * self.gram.det
    }
}

pub fn reduce(m: &ValidatedModel) -> Result<ReducedModel> {
    let n = m.n();
    let sigma = m.sigma();
    let sigma1 = m.sigma1();
    let risk = m.risk();

    let loading = sigma.column(0).into_owned() / sigma1;
    let mut residual = sigma - &loading * loading.transpose();
    for k in 0..n {
        residual[(0, k)] = 0.0;
        residual[(k, 0)] = 0.0;
    }
    // Symmetrize the block explicitly; the outer product is symmetric only up to rounding.
    let residual_hat = DMatrix::from_fn(n - 1, n - 1, |i, j| {
        0.5 * (residual[(i + 1, j + 1)] + residual[(j + 1, i + 1)])
    });
    for i in 0..(n - 1) {
        for j in 0..(n - 1) {
            residual[(i + 1, j + 1)] = residual_hat[(i, j)];
        }
    }

    let mu = m.mu();
    let mu_hat = DVector::from_fn(n - 1, |i, _| mu[i + 1] - mu[0]);
    let loading_hat = DVector::from_fn(n - 1, |i, _| loading[i + 1] - sigma1);

    let residual_hat_chol = Cholesky::factor(&residual_hat).map_err(|f| {
        CovarError::NumericalBreakdown(format!(
            "reduced residual covariance failed Cholesky at pivot {} ({:e})",
            f.pivot + 1,
            f.value
        ))
    })?;
    let gram = gramian_with(&residual_hat_chol, &mu_hat, &loading_hat);
    let qinv_mu = residual_hat_chol.solve(&mu_hat);
    let qinv_q = residual_hat_chol.solve(&loading_hat);

    let independence_score = independence_score_of(mu, &loading);
    let independent = n >= 3 && independence_score > INDEPENDENCE_TOL && gram.det > 0.0;
    let mut warnings = Vec::new();
    if independent && independence_score < INDEPENDENCE_WARN {
        warnings.push(ModelWarning::NearlyDependent { score: independence_score });
    }

    Ok(ReducedModel {
        loading,
        residual,
        residual_hat,
        mu_hat,
        loading_hat,
        gram,
        delta: risk.b * risk.b * gram.alpha - risk.a * risk.a * gram.det,
        independent,
        independence_score,
        warnings,
        risk: *risk,
        residual_hat_chol,
        qinv_mu,
        qinv_q,
    })
}

/// α_C, β_C, γ_C and det G from one triangular solve per vector.
pub fn gramian_scalars(
    residual_hat: &DMatrix<f64>,
    mu_hat: &DVector<f64>,
    loading_hat: &DVector<f64>,
) -> Result<Gramian> {
    if residual_hat.nrows() != mu_hat.len() || residual_hat.nrows() != loading_hat.len() {
        return Err(CovarError::DimensionMismatch("Gramian inputs".into()));
    }
    let chol = Cholesky::factor(residual_hat).map_err(|f| {
        CovarError::NumericalBreakdown(format!("Q̂ is not positive definite at pivot {}", f.pivot + 1))
    })?;
    Ok(gramian_with(&chol, mu_hat, loading_hat))
}

fn gramian_with(chol: &Cholesky, mu_hat: &DVector<f64>, loading_hat: &DVector<f64>) -> Gramian {
    let ym = chol.solve_lower(mu_hat);
    let yq = chol.solve_lower(loading_hat);
    let alpha = ym.dot(&ym);
    let beta = ym.dot(&yq);
    let gamma = yq.dot(&yq);
    Gramian { alpha, beta, gamma, det: alpha * gamma - beta * beta }
}

/// Whether 1ₙ, μ and q are linearly independent.
pub fn check_independence(m: &ValidatedModel) -> bool {
    if m.n() < 3 {
        return false;
    }
    let loading = m.sigma().column(0).into_owned() / m.sigma1();
    independence_score_of(m.mu(), &loading) > INDEPENDENCE_TOL
}

/// Determinant of the Gram matrix of the three vectors after scaling each to
/// unit length: 1 for orthogonal, 0 for dependent.
fn independence_score_of(mu: &DVector<f64>, loading: &DVector<f64>) -> f64 {
    let n = mu.len();
    if n < 3 {
        return 0.0;
    }
    let ones = DVector::from_element(n, 1.0);
    let vs = [ones, mu.clone(), loading.clone()];
    let mut unit = Vec::with_capacity(3);
    for v in &vs {
        let norm = v.norm();
        if norm == 0.0 {
            return 0.0;
        }
        unit.push(v / norm);
    }
    let g = DMatrix::from_fn(3, 3, |i, j| unit[i].dot(&unit[j]));
    g.determinant().max(0.0)
}
