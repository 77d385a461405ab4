//! Critical set of the mean–CoVaR problem without short-selling limits.
//!
//! For a target return `E`, with `Ê = E − μ₁`, the reduced problem is
//! `min −μ₁ + aσ₁ − x̂ᵀμ̂ + a x̂ᵀq̂ + b √(x̂ᵀQ̂x̂)` subject to `x̂ᵀμ̂ = Ê`.
//! Fixing `t̂ = x̂ᵀq̂` turns it into a quadratic program with two equality
//! constraints, whose value in `t̂` has the shape handled by [`lemma`]. The
//! sign of `Δ = b²α_C − a² det G` decides between a unique minimizer, an
//! unattained infimum and an objective unbounded below.

pub mod frontier;
pub mod lemma;
pub mod markowitz;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CovarError, Result};
use crate::model::{Portfolio, ValidatedModel};
use crate::reduction::ReducedModel;
use crate::riskmeasures::covar_portfolio;

pub use frontier::{frontier, markowitz_frontier, uniform_grid, FrontierMode, FrontierPoint};
pub use lemma::{lemma_minimize, LemmaOutcome, LemmaParams};
pub use markowitz::{markowitz_coefficients, markowitz_critical, MarkowitzCoefficients};

/// Relative width of the band treated as `Δ = 0`.
pub const DELTA_TOL: f64 = 1e-12;
/// Relative agreement between the closed-form value and a direct evaluation.
pub const VALUE_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    /// `Δ > 0`: a unique minimizer.
    Unique,
    /// `Δ < 0`: CoVaR decreases without bound on the constraint set.
    UnboundedBelow,
    /// `Δ = 0`, `Ê ≠ 0`: bounded below, infimum approached along a ray.
    InfimumNotAttained,
    /// `Δ = 0`, `Ê = 0`: the minimum is attained at `e₁` but not uniquely.
    NonUniqueMinimum,
    /// {1, μ, q} dependent: the critical set is Markowitz's critical line.
    MarkowitzFallback,
}

impl SolveStatus {
    pub fn is_solved(self) -> bool {
        matches!(self, SolveStatus::Unique | SolveStatus::NonUniqueMinimum | SolveStatus::MarkowitzFallback)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Unique => "Unique",
            SolveStatus::UnboundedBelow => "UnboundedBelow",
            SolveStatus::InfimumNotAttained => "InfimumNotAttained",
            SolveStatus::NonUniqueMinimum => "NonUniqueMinimum",
            SolveStatus::MarkowitzFallback => "MarkowitzFallback",
        }
    }
}

/// Which part of the critical set is CoVaR-efficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EfficiencyClass {
    NoneEfficient,
    /// Only the portfolios with `Ê ≥ 0`.
    NonNegativeEHalf,
    AllEfficient,
}

impl EfficiencyClass {
    pub fn is_efficient(self, e_hat: f64) -> bool {
        match self {
            EfficiencyClass::NoneEfficient => false,
            EfficiencyClass::NonNegativeEHalf => e_hat >= 0.0,
            EfficiencyClass::AllEfficient => true,
        }
    }
}

/// Internals of the two-constraint subproblem at the optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Optimal `x̂ᵀq̂`.
    pub t_hat: f64,
}

/// A feasible ray `x(τ) = origin + τ·direction`, `τ ≥ 0`, along which CoVaR
/// is strictly decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessRay {
    pub origin: Vec<f64>,
    pub direction: Vec<f64>,
    /// CoVaR at `τ = 0`.
    pub start_value: f64,
    /// Limit of d CoVaR / dτ as τ → ∞ (nonpositive).
    pub asymptotic_slope: f64,
    /// Limit of CoVaR along the ray; `None` means −∞.
    pub limit: Option<f64>,
}

impl WitnessRay {
    pub fn point(&self, tau: f64) -> Vec<f64> {
        self.origin.iter().zip(&self.direction).map(|(o, d)| o + tau * d).collect()
    }

    /// A `τ` at which CoVaR is at most `level`, if the ray gets there.
    pub fn step_to_reach(&self, level: f64) -> Option<f64> {
        if level >= self.start_value {
            return Some(0.0);
        }
        if self.limit.is_some_and(|lim| level <= lim) || self.asymptotic_slope >= 0.0 {
            return None;
        }
        // Along the ray CoVaR ≤ start_value + asymptotic_slope·τ.
        Some((self.start_value - level) / -self.asymptotic_slope)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalSolution {
    #[serde(rename = "E")]
    pub target: f64,
    pub e_hat: f64,
    /// Optimal weights in the caller's order, when a minimizer exists.
    pub weights: Option<Vec<f64>>,
    /// Optimal value; the infimum for `InfimumNotAttained`; `None` if unbounded.
    pub value: Option<f64>,
    pub status: SolveStatus,
    pub efficiency: Option<EfficiencyClass>,
    pub witness: Option<WitnessRay>,
    pub multipliers: Option<Multipliers>,
}

impl CriticalSolution {
    pub fn portfolio(&self) -> Option<Portfolio> {
        self.weights.as_ref().and_then(|w| Portfolio::new(w.clone()).ok())
    }
}

fn delta_is_zero(r: &ReducedModel) -> bool {
    let (a, b) = (r.risk.a, r.risk.b);
    let scale = b * b * r.gram.alpha + a * a * r.gram.det.abs();
    r.delta.abs() <= DELTA_TOL * scale
}

/// Sign of Δ with the zero band applied: 1, 0 or −1.
pub fn delta_sign(r: &ReducedModel) -> i8 {
    if delta_is_zero(r) {
        0
    } else if r.delta > 0.0 {
        1
    } else {
        -1
    }
}

/// Reduced vector to full canonical weights, `x₁ = 1 − Σx̂`.
fn lift(x_hat: &DVector<f64>) -> DVector<f64> {
    let n = x_hat.len() + 1;
    let mut x = DVector::zeros(n);
    x[0] = 1.0 - x_hat.sum();
    x.rows_mut(1, n - 1).copy_from(x_hat);
    x
}

fn lift_direction(d_hat: &DVector<f64>) -> DVector<f64> {
    let n = d_hat.len() + 1;
    let mut d = DVector::zeros(n);
    d[0] = -d_hat.sum();
    d.rows_mut(1, n - 1).copy_from(d_hat);
    d
}

/// The closed-form critical portfolio for target return `e`.
pub fn solve_critical(m: &ValidatedModel, r: &ReducedModel, e: f64) -> Result<CriticalSolution> {
    if !e.is_finite() {
        return Err(CovarError::NonFinite("target return"));
    }
    let e_hat = e - m.mu1();
    let risk = m.risk();
    let a = risk.a;
    let base = -m.mu1() + a * m.sigma1();

    if !r.independent {
        let x = markowitz::markowitz_critical(m, e)?;
        let report = covar_portfolio(m, r, &x)?;
        return Ok(CriticalSolution {
            target: e,
            e_hat,
            weights: Some(x.into_inner()),
            value: Some(report.covar),
            status: SolveStatus::MarkowitzFallback,
            efficiency: None,
            witness: None,
            multipliers: None,
        });
    }

    let g = r.gram;
    match delta_sign(r) {
        1 => {
            let sqrt_delta = r.delta.sqrt();
            let x_hat = if e_hat == 0.0 {
                DVector::zeros(m.n() - 1)
            } else {
                let correction = &r.qinv_mu * g.beta - &r.qinv_q * g.alpha;
                &r.qinv_mu * (e_hat / g.alpha)
                    + correction * (e_hat.abs() * a / (g.alpha * sqrt_delta))
            };
            let t_hat = g.beta / g.alpha * e_hat - e_hat.abs() * a * g.det / (g.alpha * sqrt_delta);
            let lambda1 = (g.gamma * e_hat - g.beta * t_hat) / g.det;
            let lambda2 = (g.alpha * t_hat - g.beta * e_hat) / g.det;
            let value =
                base + e_hat * (a * g.beta / g.alpha - 1.0) + e_hat.abs() / g.alpha * sqrt_delta;

            let x = if e_hat == 0.0 {
                Portfolio::unit(m.n(), m.conditioning_index())
            } else {
                Portfolio::new(m.to_original(&lift(&x_hat)))?
            };
            let direct = covar_portfolio(m, r, &x)?.covar;
            let scale = base.abs()
                + e_hat.abs() * (a * g.beta.abs() / g.alpha + 1.0 + sqrt_delta / g.alpha);
            if (direct - value).abs() > VALUE_CHECK_TOL * scale.max(1.0) {
                return Err(CovarError::NumericalBreakdown(format!(
                    "closed-form value {value} disagrees with direct evaluation {direct}"
                )));
            }
            Ok(CriticalSolution {
                target: e,
                e_hat,
                weights: Some(x.into_inner()),
                value: Some(value),
                status: SolveStatus::Unique,
                efficiency: Some(classify_efficiency(r)?),
                witness: None,
                multipliers: Some(Multipliers { lambda1, lambda2, t_hat }),
            })
        }
        0 if e_hat == 0.0 => Ok(CriticalSolution {
            target: e,
            e_hat,
            weights: Some(Portfolio::unit(m.n(), m.conditioning_index()).into_inner()),
            value: Some(base),
            status: SolveStatus::NonUniqueMinimum,
            efficiency: None,
            witness: Some(witness_ray(m, r, e_hat)),
            multipliers: None,
        }),
        sign => {
            let witness = witness_ray(m, r, e_hat);
            let (status, value) = if sign == 0 {
                (SolveStatus::InfimumNotAttained, witness.limit)
            } else {
                (SolveStatus::UnboundedBelow, None)
            };
            Ok(CriticalSolution {
                target: e,
                e_hat,
                weights: None,
                value,
                status,
                efficiency: None,
                witness: Some(witness),
                multipliers: None,
            })
        }
    }
}

/// Ray through the `t̂ = β_C Ê/α_C` point of the slice, moving `t̂ → −∞`.
///
/// Writing `κ = b √(α_C / det G)` and `q_l = det G · Ê² / α_C²`, CoVaR along the
/// ray is `−μ₁ + aσ₁ − Ê + a(p − τ) + κ √(τ² + q_l)`: strictly decreasing,
/// with slope tending to `κ − a` (negative when Δ < 0, zero when Δ = 0).
pub fn witness_ray(m: &ValidatedModel, r: &ReducedModel, e_hat: f64) -> WitnessRay {
    let g = r.gram;
    let (a, b) = (m.risk().a, m.risk().b);
    let origin_hat = &r.qinv_mu * (e_hat / g.alpha);
    let dir_hat = (&r.qinv_mu * g.beta - &r.qinv_q * g.alpha) / g.det;
    let p = g.beta / g.alpha * e_hat;
    let kappa = b * (g.alpha / g.det).sqrt();
    let q_l = g.det * e_hat * e_hat / (g.alpha * g.alpha);
    let base = -m.mu1() + a * m.sigma1() - e_hat;
    let start_value = base + a * p + kappa * q_l.sqrt();
    let zero_delta = delta_is_zero(r);
    WitnessRay {
        origin: m.to_original(&lift(&origin_hat)),
        direction: m.to_original(&lift_direction(&dir_hat)),
        start_value,
        asymptotic_slope: if zero_delta { 0.0 } else { (kappa - a).min(0.0) },
        limit: if zero_delta { Some(base + a * p) } else { None },
    }
}

/// Which critical portfolios are efficient, from `t = aβ_C − α_C` against ±√Δ.
pub fn classify_efficiency(r: &ReducedModel) -> Result<EfficiencyClass> {
    if !r.independent {
        return Err(CovarError::PreconditionViolated(
            "efficiency classes need 1, mu, q linearly independent".into(),
        ));
    }
    if delta_sign(r) <= 0 {
        return Err(CovarError::PreconditionViolated(format!(
            "efficiency classes need Delta > 0, got {:e}",
            r.delta
        )));
    }
    let sqrt_delta = r.delta.sqrt();
    let t = r.risk.a * r.gram.beta - r.gram.alpha;
    Ok(if t <= -sqrt_delta {
        EfficiencyClass::NoneEfficient
    } else if t <= sqrt_delta {
        EfficiencyClass::NonNegativeEHalf
    } else {
        EfficiencyClass::AllEfficient
    })
}
