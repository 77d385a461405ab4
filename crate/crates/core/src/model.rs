//! Market inputs, validation and the canonical asset ordering.
//!
//! Internally the conditioning asset always sits at index 0. A
//! [`ValidatedModel`] remembers the swap so weights can be moved between the
//! caller's ordering and the canonical one without loss.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CovarError, Result};
use crate::linalg::Cholesky;
pub use crate::normal::{normal_cdf, normal_quantile};

/// Relative tolerance for the symmetry check on Σ.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative tolerance for weights summing to one.
pub const BUDGET_TOL: f64 = 1e-12;

/// How the stress intensities are supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RiskSpec {
    /// Quantile levels, both in (0, 1/2).
    Levels { alpha: f64, beta: f64 },
    /// Stress intensities `a = −Φ⁻¹(α)`, `b = −Φ⁻¹(β)` given directly.
    Intensities { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    pub a: f64,
    pub b: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

impl RiskParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        check_intensity("a", a)?;
        check_intensity("b", b)?;
        Ok(Self { a, b, alpha: None, beta: None })
    }

    pub fn from_levels(alpha: f64, beta: f64) -> Result<Self> {
        check_level("alpha", alpha)?;
        check_level("beta", beta)?;
        let a = -normal_quantile(alpha)?;
        let b = -normal_quantile(beta)?;
        Ok(Self { a, b, alpha: Some(alpha), beta: Some(beta) })
    }

    pub fn from_spec(spec: RiskSpec) -> Result<Self> {
        match spec {
            RiskSpec::Levels { alpha, beta } => Self::from_levels(alpha, beta),
            RiskSpec::Intensities { a, b } => Self::new(a, b),
        }
    }

    /// α = Φ(−a), whether or not it was supplied.
    pub fn alpha_level(&self) -> f64 {
        self.alpha.unwrap_or_else(|| normal_cdf(-self.a))
    }

    pub fn beta_level(&self) -> f64 {
        self.beta.unwrap_or_else(|| normal_cdf(-self.b))
    }
}

fn check_level(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 0.5 {
        Ok(())
    } else {
        Err(CovarError::BadQuantileLevel { name, value })
    }
}

fn check_intensity(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CovarError::BadRiskParam { name, value })
    }
}

/// Raw, unvalidated market description in the caller's asset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    /// 1-based index of the asset whose stress defines the conditioning event.
    pub conditioning_asset: usize,
    pub risk: RiskSpec,
}

impl MarketModel {
    pub fn new(mu: Vec<f64>, sigma: Vec<Vec<f64>>, conditioning_asset: usize, risk: RiskSpec) -> Self {
        Self { mu, sigma, conditioning_asset, risk }
    }

    pub fn with_intensities(mu: Vec<f64>, sigma: Vec<Vec<f64>>, a: f64, b: f64) -> Self {
        Self::new(mu, sigma, 1, RiskSpec::Intensities { a, b })
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }
}

/// Non-fatal findings attached to a validated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelWarning {
    /// The implied quantile level is below double-precision resolution.
    ExtremeIntensity { name: String, value: f64 },
    /// {1, μ, q} are independent, but only barely.
    NearlyDependent { score: f64 },
}

/// A checked model in canonical order (conditioning asset first).
#[derive(Debug, Clone)]
pub struct ValidatedModel {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    sigma_chol: Cholesky,
    risk: RiskParams,
    conditioning: usize,
    warnings: Vec<ModelWarning>,
}

/// Check every invariant of a [`MarketModel`] and move it to canonical order.
pub fn validate_model(m: &MarketModel) -> Result<ValidatedModel> {
    let n = m.mu.len();
    if n < 2 {
        return Err(CovarError::TooFewAssets(n));
    }
    if m.sigma.len() != n {
        return Err(CovarError::DimensionMismatch(format!(
            "sigma has {} rows, mu has {} entries",
            m.sigma.len(),
            n
        )));
    }
    for (i, row) in m.sigma.iter().enumerate() {
        if row.len() != n {
            return Err(CovarError::DimensionMismatch(format!(
                "sigma[{i}] has {} entries, expected {n}",
                row.len()
            )));
        }
    }
    if m.mu.iter().any(|v| !v.is_finite()) {
        return Err(CovarError::NonFinite("mu"));
    }
    if m.sigma.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CovarError::NonFinite("sigma"));
    }
    if m.conditioning_asset == 0 || m.conditioning_asset > n {
        return Err(CovarError::BadConditioningAsset { index: m.conditioning_asset, n });
    }
    let risk = RiskParams::from_spec(m.risk)?;

    let scale = m.sigma.iter().flatten().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (m.sigma[i][j] - m.sigma[j][i]).abs();
            if gap > SYMMETRY_TOL * scale {
                return Err(CovarError::NotSymmetric { row: i, col: j, gap });
            }
        }
    }

    let mu_scale = m.mu.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let (lo, hi) = m
        .mu
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo <= 1e-12 * mu_scale {
        return Err(CovarError::MuParallelToOnes);
    }

    let c = m.conditioning_asset - 1;
    let perm = |i: usize| swap_index(i, c);
    let mu = DVector::from_fn(n, |i, _| m.mu[perm(i)]);
    let sigma = DMatrix::from_fn(n, n, |i, j| {
        let (pi, pj) = (perm(i), perm(j));
        0.5 * (m.sigma[pi][pj] + m.sigma[pj][pi])
    });
    let sigma_chol = Cholesky::factor(&sigma)
        .map_err(|f| CovarError::NotPositiveDefinite { pivot: perm(f.pivot), value: f.value })?;

    let mut warnings = Vec::new();
    for (name, value) in [("a", risk.a), ("b", risk.b)] {
        if normal_cdf(-value) < 1e-15 {
            warnings.push(ModelWarning::ExtremeIntensity { name: name.to_string(), value });
        }
    }

    Ok(ValidatedModel { mu, sigma, sigma_chol, risk, conditioning: c, warnings })
}

/// The transposition that brings asset `c` to the front.
fn swap_index(i: usize, c: usize) -> usize {
    if i == 0 {
        c
    } else if i == c {
        0
    } else {
        i
    }
}

impl ValidatedModel {
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// Expected returns, canonical order.
    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    /// Covariance, canonical order.
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_cholesky(&self) -> &Cholesky {
        &self.sigma_chol
    }

    pub fn risk(&self) -> &RiskParams {
        &self.risk
    }

    /// 0-based index of the conditioning asset in the caller's ordering.
    pub fn conditioning_index(&self) -> usize {
        self.conditioning
    }

    pub fn warnings(&self) -> &[ModelWarning] {
        &self.warnings
    }

    /// Mean of the conditioning asset.
    pub fn mu1(&self) -> f64 {
        self.mu[0]
    }

    /// Standard deviation of the conditioning asset.
    pub fn sigma1(&self) -> f64 {
        self.sigma[(0, 0)].sqrt()
    }

    /// Same model with different stress intensities.
    pub fn with_risk(&self, risk: RiskParams) -> Self {
        let mut out = self.clone();
        out.risk = risk;
        out.warnings.retain(|w| !matches!(w, ModelWarning::ExtremeIntensity { .. }));
        out
    }

    /// Caller's 0-based index of the asset at canonical position `k`.
    pub fn original_index(&self, k: usize) -> usize {
        swap_index(k, self.conditioning)
    }

    /// Caller-ordered weights to canonical order.
    pub fn to_canonical(&self, weights: &[f64]) -> DVector<f64> {
        assert_eq!(weights.len(), self.n(), "weight vector length");
        DVector::from_fn(self.n(), |i, _| weights[swap_index(i, self.conditioning)])
    }

    /// Canonical weights back to the caller's order.
    pub fn to_original(&self, canonical: &DVector<f64>) -> Vec<f64> {
        (0..self.n()).map(|i| canonical[swap_index(i, self.conditioning)]).collect()
    }

    /// Expected returns in the caller's order.
    pub fn mu_original(&self) -> Vec<f64> {
        self.to_original(&self.mu)
    }
}

/// Weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Portfolio(Vec<f64>);

impl Portfolio {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(CovarError::DimensionMismatch("empty portfolio".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(CovarError::NonFinite("weights"));
        }
        let sum: f64 = weights.iter().sum();
        let l1: f64 = weights.iter().map(|w| w.abs()).sum();
        if (sum - 1.0).abs() > BUDGET_TOL * l1.max(1.0) {
            return Err(CovarError::NotAPortfolio { sum });
        }
        Ok(Self(weights))
    }

    /// All weight on asset `i` (0-based).
    pub fn unit(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Portfolio {
    type Error = CovarError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Portfolio::new(v)
    }
}

impl From<Portfolio> for Vec<f64> {
    fn from(p: Portfolio) -> Self {
        p.0
    }
}
