//! Sampling the critical set over a grid of target returns.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::markowitz::{markowitz_affine, markowitz_coefficients, markowitz_critical};
use super::{delta_sign, solve_critical, SolveStatus};
use crate::error::{CovarError, Result};
use crate::model::ValidatedModel;
use crate::reduction::ReducedModel;
use crate::riskmeasures::sigma_and_var;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    #[serde(rename = "E")]
    pub target: f64,
    pub value: f64,
    pub weights: Vec<f64>,
    pub efficient: bool,
    pub status: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrontierMode {
    Covar,
    Sigma,
    Var,
}

/// `steps` evenly spaced targets from `e_min` to `e_max` inclusive.
/// A zero-width range gives a single point regardless of `steps`.
pub fn uniform_grid(e_min: f64, e_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(e_min.is_finite() && e_max.is_finite()) {
        return Err(CovarError::NonFinite("frontier range"));
    }
    if e_min > e_max {
        return Err(CovarError::BadConfig(format!("E_min = {e_min} exceeds E_max = {e_max}")));
    }
    if e_min == e_max {
        return Ok(vec![e_min]);
    }
    if steps < 2 {
        return Err(CovarError::BadConfig(format!("need at least 2 grid steps, got {steps}")));
    }
    let h = (e_max - e_min) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|k| if k + 1 == steps { e_max } else { e_min + k as f64 * h })
        .collect())
}

/// CoVaR critical set on a uniform grid, in increasing `E`.
pub fn frontier(
    m: &ValidatedModel,
    r: &ReducedModel,
    e_min: f64,
    e_max: f64,
    steps: usize,
) -> Result<Vec<FrontierPoint>> {
    if r.independent && delta_sign(r) <= 0 {
        let regime = if delta_sign(r) == 0 { "InfimumNotAttained" } else { "UnboundedBelow" };
        return Err(CovarError::PreconditionViolated(format!(
            "no critical set: Delta = {:e} ({regime})",
            r.delta
        )));
    }
    let grid = uniform_grid(e_min, e_max, steps)?;
    grid.par_iter().map(|&e| frontier_point(m, r, e)).collect()
}

fn frontier_point(m: &ValidatedModel, r: &ReducedModel, e: f64) -> Result<FrontierPoint> {
    let s = solve_critical(m, r, e)?;
    let efficient = match (s.status, s.efficiency) {
        (SolveStatus::MarkowitzFallback, _) => fallback_efficient(m, r, e)?,
        (_, Some(class)) => class.is_efficient(s.e_hat),
        _ => false,
    };
    let weights = s.weights.ok_or_else(|| {
        CovarError::NumericalBreakdown(format!("no critical portfolio at E = {e}"))
    })?;
    Ok(FrontierPoint {
        target: e,
        value: s.value.unwrap_or(f64::NAN),
        weights,
        efficient,
        status: s.status.as_str().to_string(),
    })
}

/// On the Markowitz line `x(E) = u + E v` CoVaR is convex in `E`; a point is
/// efficient when its right derivative is nonnegative.
fn fallback_efficient(m: &ValidatedModel, r: &ReducedModel, e: f64) -> Result<bool> {
    let (u, v) = markowitz_affine(m)?;
    let x = &u + &v * e;
    let risk = m.risk();
    let x_hat = x.rows(1, x.len() - 1).into_owned();
    let v_hat = v.rows(1, v.len() - 1).into_owned();
    let qx = &r.residual_hat * &x_hat;
    let form = x_hat.dot(&qx);
    let slope_root = if form > 1e-24 {
        v_hat.dot(&qx) / form.sqrt()
    } else {
        r.residual_form(&v_hat).max(0.0).sqrt()
    };
    let derivative = -1.0 + risk.a * v.dot(&r.loading) + risk.b * slope_root;
    Ok(derivative >= 0.0)
}

/// The σ or VaR curve of Markowitz's critical line on a grid of targets.
pub fn markowitz_frontier(m: &ValidatedModel, grid: &[f64], mode: FrontierMode) -> Result<Vec<FrontierPoint>> {
    if mode == FrontierMode::Covar {
        return Err(CovarError::BadConfig("covar mode uses the CoVaR critical set".into()));
    }
    let c = markowitz_coefficients(m)?;
    let a = m.risk().a;
    grid.par_iter()
        .map(|&e| {
            let x = markowitz_critical(m, e)?;
            let (sigma, var) = sigma_and_var(m, &x)?;
            let (value, efficient) = match mode {
                FrontierMode::Sigma => (sigma, e >= c.gmv_return()),
                _ => {
                    let dsigma = (c.gamma * e - c.beta) / (c.det() * sigma);
                    (var, -1.0 + a * dsigma >= 0.0)
                }
            };
            Ok(FrontierPoint {
                target: e,
                value,
                weights: x.into_inner(),
                efficient,
                status: "Markowitz".to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_model, MarketModel};
    use crate::reduction::reduce;

    fn setup(m: MarketModel) -> (ValidatedModel, ReducedModel) {
        let v = validate_model(&m).unwrap();
        let r = reduce(&v).unwrap();
        (v, r)
    }

    fn corner_optimum() -> MarketModel {
        MarketModel::with_intensities(
            vec![2.0, 3.0, 1.0],
            vec![vec![1.0, 0.2, 1.0], vec![0.2, 1.0, 0.0], vec![1.0, 0.0, 9.0]],
            1.0,
            2.0,
        )
    }

    #[test]
    fn grid_shapes() {
        assert_eq!(uniform_grid(1.0, 3.0, 5).unwrap(), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(uniform_grid(2.0, 2.0, 1).unwrap(), vec![2.0]);
        assert!(uniform_grid(1.0, 3.0, 1).is_err());
        assert!(uniform_grid(3.0, 1.0, 4).is_err());
    }

    #[test]
    fn corner_optimum_v_shape() {
        let (v, r) = setup(corner_optimum());
        let pts = frontier(&v, &r, 1.0, 3.0, 21).unwrap();
        assert_eq!(pts.len(), 21);
        let g = r.gram;
        let a = 1.0;
        let left = (a * g.beta / g.alpha - 1.0) - r.delta.sqrt() / g.alpha;
        let right = (a * g.beta / g.alpha - 1.0) + r.delta.sqrt() / g.alpha;
        let (imin, min) = pts
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.value.total_cmp(&y.1.value))
            .map(|(i, p)| (i, p.value))
            .unwrap();
        assert_eq!(pts[imin].target, 2.0);
        assert_eq!(min, -1.0);
        for p in &pts {
            let e_hat = p.target - 2.0;
            let slope = if e_hat < 0.0 { left } else { right };
            assert!((p.value - (-1.0 + slope * e_hat)).abs() < 1e-12);
            assert_eq!(p.efficient, e_hat >= 0.0);
        }
    }

    #[test]
    fn single_point_grid_equals_solve() {
        let (v, r) = setup(corner_optimum());
        let pts = frontier(&v, &r, 2.4, 2.4, 7).unwrap();
        assert_eq!(pts.len(), 1);
        let s = solve_critical(&v, &r, 2.4).unwrap();
        assert_eq!(Some(pts[0].value), s.value);
        assert_eq!(Some(pts[0].weights.clone()), s.weights);
    }

    #[test]
    fn unbounded_model_has_no_frontier() {
        let (v, r) = setup(MarketModel::with_intensities(
            vec![1.0, 4.0, 3.0],
            vec![
                vec![1.0, -4.0 / 3.0, 2.0 / 3.0],
                vec![-4.0 / 3.0, 4.0, -1.0],
                vec![2.0 / 3.0, -1.0, 1.0],
            ],
            0.8,
            0.7,
        ));
        assert!(matches!(frontier(&v, &r, 1.0, 3.0, 5), Err(CovarError::PreconditionViolated(_))));
    }

    #[test]
    fn markowitz_sigma_curve_bottoms_at_gmv() {
        let (v, _) = setup(corner_optimum());
        let c = markowitz_coefficients(&v).unwrap();
        let grid = uniform_grid(c.gmv_return() - 1.0, c.gmv_return() + 1.0, 41).unwrap();
        let pts = markowitz_frontier(&v, &grid, FrontierMode::Sigma).unwrap();
        for p in &pts {
            assert!((p.value * p.value - c.variance_at(p.target)).abs() < 1e-10);
            assert_eq!(p.efficient, p.target >= c.gmv_return());
        }
    }
}
