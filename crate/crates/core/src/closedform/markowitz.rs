//! Merton's closed form for the minimum-variance critical line.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CovarError, Result};
use crate::model::{Portfolio, ValidatedModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkowitzCoefficients {
    /// μᵀΣ⁻¹μ
    pub alpha: f64,
    /// μᵀΣ⁻¹1
    pub beta: f64,
    /// 1ᵀΣ⁻¹1
    pub gamma: f64,
}

impl MarkowitzCoefficients {
    pub fn det(&self) -> f64 {
        self.alpha * self.gamma - self.beta * self.beta
    }

    /// Return of the global minimum-variance portfolio.
    pub fn gmv_return(&self) -> f64 {
        self.beta / self.gamma
    }

    /// Variance along the critical line at target `e`.
    pub fn variance_at(&self, e: f64) -> f64 {
        (self.gamma * e * e - 2.0 * self.beta * e + self.alpha) / self.det()
    }
}

struct Line {
    coef: MarkowitzCoefficients,
    sinv_mu: DVector<f64>,
    sinv_one: DVector<f64>,
}

fn line(m: &ValidatedModel) -> Result<Line> {
    let chol = m.sigma_cholesky();
    let ones = DVector::from_element(m.n(), 1.0);
    let sinv_mu = chol.solve(m.mu());
    let sinv_one = chol.solve(&ones);
    let coef = MarkowitzCoefficients {
        alpha: m.mu().dot(&sinv_mu),
        beta: m.mu().dot(&sinv_one),
        gamma: ones.dot(&sinv_one),
    };
    if !(coef.det() > 0.0) {
        return Err(CovarError::NumericalBreakdown(
            "Markowitz determinant αγ − β² is not positive".into(),
        ));
    }
    Ok(Line { coef, sinv_mu, sinv_one })
}

pub fn markowitz_coefficients(m: &ValidatedModel) -> Result<MarkowitzCoefficients> {
    line(m).map(|l| l.coef)
}

/// Canonical-order weights `x(E) = u + E·v` of the critical line.
pub(crate) fn markowitz_affine(m: &ValidatedModel) -> Result<(DVector<f64>, DVector<f64>)> {
    let Line { coef, sinv_mu, sinv_one } = line(m)?;
    let d = coef.det();
    let u = (&sinv_one * coef.alpha - &sinv_mu * coef.beta) / d;
    let v = (&sinv_mu * coef.gamma - &sinv_one * coef.beta) / d;
    Ok((u, v))
}

pub(crate) fn markowitz_canonical(m: &ValidatedModel, e: f64) -> Result<DVector<f64>> {
    let Line { coef, sinv_mu, sinv_one } = line(m)?;
    let d = coef.det();
    let w_mu = (e * coef.gamma - coef.beta) / d;
    let w_one = (coef.alpha - e * coef.beta) / d;
    Ok(&sinv_mu * w_mu + &sinv_one * w_one)
}

/// Minimum-variance portfolio with expected return `e`, short sales allowed.
pub fn markowitz_critical(m: &ValidatedModel, e: f64) -> Result<Portfolio> {
    if !e.is_finite() {
        return Err(CovarError::NonFinite("target return"));
    }
    let x = markowitz_canonical(m, e)?;
    Portfolio::new(m.to_original(&x))
}
