//! Portfolio risk figures: σ, VaR and the equality-conditioned CoVaR.
//!
//! CoVaR is evaluated two ways. The bivariate route feeds `(μ_X, σ_X, ρ)`
//! into the Gaussian conditional-quantile formula; the reduced route uses
//! `−xᵀμ + a·xᵀq + b·√(xᵀQx)`. [`covar_portfolio`] computes both and refuses
//! to answer if they disagree.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CovarError, Result};
use crate::model::{Portfolio, ValidatedModel};
use crate::reduction::ReducedModel;

/// `xᵀQx` below this is treated as exactly zero.
pub const SQRT_FLOOR: f64 = 1e-24;
/// Relative agreement required between the two CoVaR routes.
pub const ROUTE_TOL: f64 = 1e-9;
const RHO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioReport {
    #[serde(rename = "E")]
    pub expected_return: f64,
    pub sigma: f64,
    pub var_alpha: f64,
    pub rho: f64,
    pub covar: f64,
}

/// CoVaR of `X` given `Y` at its α-stress level, for a bivariate normal pair.
///
/// `−μ_X + σ_X (ρ a + b √(1 − ρ²))`. For `|ρ| = 1` this is `−μ_X ± a σ_X`.
pub fn covar_bivariate(mu_x: f64, sigma_x: f64, rho: f64, a: f64, b: f64) -> Result<f64> {
    if !(sigma_x >= 0.0) {
        return Err(CovarError::Domain(format!("sigma_X = {sigma_x} must be nonnegative")));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(CovarError::Domain(format!("a = {a}, b = {b} must be positive")));
    }
    if !(rho.abs() <= 1.0 + RHO_TOL) {
        return Err(CovarError::Domain(format!("|rho| = {} exceeds 1", rho.abs())));
    }
    let rho = rho.clamp(-1.0, 1.0);
    let tail = ((1.0 - rho) * (1.0 + rho)).max(0.0).sqrt();
    Ok(-mu_x + sigma_x * (rho * a + b * tail))
}

/// √(xᵀQx) computed through the PD block, with the floor applied.
fn residual_sd(r: &ReducedModel, x: &DVector<f64>) -> f64 {
    let x_hat = x.rows(1, x.len() - 1).into_owned();
    let form = r.residual_form(&x_hat);
    if form < SQRT_FLOOR {
        0.0
    } else {
        form.sqrt()
    }
}

/// The reduced-route CoVaR on all of ℝⁿ (canonical order, no budget check).
///
/// This is the convex, positively homogeneous function whose restriction to
/// the budget hyperplane is the portfolio CoVaR.
pub fn covar_raw(m: &ValidatedModel, r: &ReducedModel, x: &DVector<f64>) -> f64 {
    let risk = m.risk();
    -x.dot(m.mu()) + risk.a * x.dot(&r.loading) + risk.b * residual_sd(r, x)
}

/// [`covar_raw`] for weights in the caller's order.
pub fn covar_raw_original(m: &ValidatedModel, r: &ReducedModel, weights: &[f64]) -> f64 {
    covar_raw(m, r, &m.to_canonical(weights))
}

pub fn covar_portfolio(
    m: &ValidatedModel,
    r: &ReducedModel,
    x: &Portfolio,
) -> Result<PortfolioReport> {
    if x.len() != m.n() {
        return Err(CovarError::DimensionMismatch(format!(
            "portfolio has {} weights, model has {} assets",
            x.len(),
            m.n()
        )));
    }
    let xc = m.to_canonical(x.weights());
    let risk = m.risk();
    let expected_return = xc.dot(m.mu());
    let variance = xc.dot(&(m.sigma() * &xc));
    let sigma = variance.max(0.0).sqrt();
    // Bivariate route from (μ_X, σ_X, ρ).
    let cov_xy = xc.dot(&m.sigma().column(0));
    let rho = if sigma > 0.0 { cov_xy / (m.sigma1() * sigma) } else { 0.0 };
    let bivariate = covar_bivariate(expected_return, sigma, rho, risk.a, risk.b)?;

    let covar = covar_raw(m, r, &xc);

    let w = ((1.0 - rho.clamp(-1.0, 1.0)) * (1.0 + rho.clamp(-1.0, 1.0))).max(0.0).sqrt();
    let eps8 = 8.0 * f64::EPSILON;
    let sqrt_err = eps8 / w.max(eps8.sqrt());
    let scale = expected_return.abs() + (risk.a + risk.b) * sigma;
    let tol = ROUTE_TOL * scale.max(1.0) + 10.0 * risk.b * sigma * sqrt_err;
    if (covar - bivariate).abs() > tol {
        return Err(CovarError::NumericalBreakdown(format!(
            "CoVaR routes disagree: reduced {covar}, bivariate {bivariate}"
        )));
    }

    Ok(PortfolioReport {
        expected_return,
        sigma,
        var_alpha: -expected_return + risk.a * sigma,
        rho,
        covar,
    })
}

/// σ and VaR_α of a portfolio.
pub fn sigma_and_var(m: &ValidatedModel, x: &Portfolio) -> Result<(f64, f64)> {
    if x.len() != m.n() {
        return Err(CovarError::DimensionMismatch("portfolio length".into()));
    }
    let xc = m.to_canonical(x.weights());
    let sigma = xc.dot(&(m.sigma() * &xc)).max(0.0).sqrt();
    Ok((sigma, -xc.dot(m.mu()) + m.risk().a * sigma))
}
