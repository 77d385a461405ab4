//! CoVaR minimization without short sales.
//!
//! The feasible set is the simplex, optionally cut by a target return. The
//! objective `cᵀx + b√(xᵀQx)` (with `c = aq − μ`) is convex but not smooth at
//! `x = e₁`, the only feasible point where `xᵀQx = 0`. The solver therefore
//!
//! 1. decides whether `e₁` is optimal through its subdifferential (a small
//!    nonnegative least-squares problem),
//! 2. otherwise runs accelerated projected gradient on `cᵀx + b√(xᵀQx + ε²)`,
//!    halving ε from 1e-2, to find the support of the minimizer,
//! 3. and polishes with Newton steps on the active face, releasing bounds
//!    with negative multipliers until the KKT conditions hold.

mod projection;

pub use projection::{project_simplex, project_slice};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closedform::FrontierPoint;
use crate::error::{CovarError, Result};
use crate::linalg::{least_squares, nnls, null_space, Cholesky};
use crate::model::ValidatedModel;
use crate::reduction::ReducedModel;
use crate::riskmeasures::covar_raw;

const EPS_START: f64 = 1e-2;
const EPS_END: f64 = 1e-12;
const STAGE_ITERS: usize = 10_000;
const FACE_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeasibleSet {
    /// `x ≥ 0`, `Σx = 1`.
    Simplex,
    /// The simplex intersected with `xᵀμ = target`.
    SimplexSlice { target: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct ConstrainedProblem<'a> {
    model: &'a ValidatedModel,
    reduced: &'a ReducedModel,
    feasible: FeasibleSet,
}

impl<'a> ConstrainedProblem<'a> {
    pub fn new(model: &'a ValidatedModel, reduced: &'a ReducedModel, feasible: FeasibleSet) -> Result<Self> {
        let feasible = match feasible {
            FeasibleSet::Simplex => FeasibleSet::Simplex,
            FeasibleSet::SimplexSlice { target } => {
                if !target.is_finite() {
                    return Err(CovarError::NonFinite("target return"));
                }
                let (lo, hi) = mu_range(model);
                let slack = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
                if target < lo - slack || target > hi + slack {
                    return Err(CovarError::InfeasibleSlice { target, min: lo, max: hi });
                }
                FeasibleSet::SimplexSlice { target: target.clamp(lo, hi) }
            }
        };
        Ok(Self { model, reduced, feasible })
    }

    pub fn feasible_set(&self) -> FeasibleSet {
        self.feasible
    }
}

fn mu_range(m: &ValidatedModel) -> (f64, f64) {
    m.mu().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedSolution {
    /// Weights in the caller's order.
    pub weights: Vec<f64>,
    pub value: f64,
    /// Sup-norm KKT stationarity residual at `weights`.
    pub kkt_residual: f64,
    /// Assets with positive weight, 0-based, caller's order, ascending.
    pub support: Vec<usize>,
    /// The minimizer is the conditioning asset alone.
    pub at_conditioning_vertex: bool,
    /// Some multiplier is (numerically) zero, so other minimizers may exist.
    pub degenerate: bool,
    pub iterations: usize,
}

/// `cᵀx + b √(xᵀQx)` in canonical coordinates.
struct Objective {
    c: DVector<f64>,
    q: DMatrix<f64>,
    b: f64,
    /// Typical gradient magnitude, for scaling tolerances.
    gscale: f64,
}

impl Objective {
    fn new(m: &ValidatedModel, r: &ReducedModel) -> Self {
        let c = &r.loading * m.risk().a - m.mu();
        let q = r.residual.clone();
        let b = m.risk().b;
        let qdiag = (0..q.nrows()).map(|i| q[(i, i)]).fold(0.0_f64, f64::max);
        let gscale = (c.amax() + b * qdiag.sqrt()).max(1.0);
        Self { c, q, b, gscale }
    }

    fn form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.q * x)).max(0.0)
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let f = self.form(x);
        self.c.dot(x) + self.b * if f < 1e-24 { 0.0 } else { f.sqrt() }
    }

    fn smooth_value(&self, x: &DVector<f64>, eps: f64) -> f64 {
        self.c.dot(x) + self.b * (self.form(x) + eps * eps).sqrt()
    }

    fn smooth_grad(&self, x: &DVector<f64>, eps: f64) -> DVector<f64> {
        let qx = &self.q * x;
        let root = (x.dot(&qx).max(0.0) + eps * eps).sqrt();
        &self.c + qx * (self.b / root)
    }
}

struct Constraints {
    a: DMatrix<f64>,
    target: Option<f64>,
}

impl Constraints {
    fn new(m: &ValidatedModel, feasible: FeasibleSet) -> Self {
        let n = m.n();
        match feasible {
            FeasibleSet::Simplex => Self { a: DMatrix::from_element(1, n, 1.0), target: None },
            FeasibleSet::SimplexSlice { target } => {
                let mut a = DMatrix::from_element(2, n, 1.0);
                a.set_row(1, &m.mu().transpose());
                Self { a, target: Some(target) }
            }
        }
    }

    fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let Some(target) = self.target else {
            return Ok(project_simplex(y));
        };
        let mu = self.a.row(1).transpose();
        project_slice(y, &mu, target).ok_or_else(|| {
            CovarError::NumericalBreakdown("projection onto the return slice failed".into())
        })
    }
}

/// Optimality of `e₁` and, when it is not optimal, a feasible descent direction.
struct VertexTest {
    optimal: bool,
    /// `‖w‖_{Q̂⁻¹}` of the closest subgradient; optimal iff `≤ b`.
    dist: f64,
    escape: Option<DVector<f64>>,
}

fn vertex_test(m: &ValidatedModel, r: &ReducedModel, obj: &Objective, with_return: bool) -> VertexTest {
    let k = m.n() - 1;
    let chol = r.residual_hat_cholesky();
    // ĉ = aq̂ − μ̂: linear coefficients after substituting x₁ = 1 − Σx̂.
    let c_hat = DVector::from_fn(k, |i, _| obj.c[i + 1] - obj.c[0]);
    let cols = if with_return { k + 2 } else { k };
    let mut basis = DMatrix::zeros(k, cols);
    for i in 0..k {
        basis[(i, i)] = 1.0;
    }
    if with_return {
        basis.set_column(k, &r.mu_hat);
        basis.set_column(k + 1, &(-&r.mu_hat));
    }
    let mut lhs = DMatrix::zeros(k, cols);
    for j in 0..cols {
        lhs.set_column(j, &chol.solve_lower(&basis.column(j).into_owned()));
    }
    let rhs = chol.solve_lower(&c_hat);
    let z = nnls(&lhs, &rhs);
    // w = ĉ − λ − κμ̂ is the part of the linear term no bound multiplier absorbs.
    let w = &c_hat - &basis * &z;
    let dist = chol.solve_lower(&w).norm();
    let optimal = dist <= obj.b * (1.0 + 1e-12);
    let escape = (!optimal).then(|| {
        let d_hat = (-chol.solve(&w)).map(|v| v.max(0.0));
        let mut d = DVector::zeros(k + 1);
        d[0] = -d_hat.sum();
        d.rows_mut(1, k).copy_from(&d_hat);
        d
    });
    VertexTest { optimal, dist, escape }
}

/// Accelerated projected gradient with adaptive restart, one smoothing level.
fn fista_stage(
    obj: &Objective,
    cons: &Constraints,
    x0: DVector<f64>,
    eps: f64,
    lipschitz: &mut f64,
) -> Result<(DVector<f64>, usize)> {
    let mut x = x0;
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut fx = obj.smooth_value(&x, eps);
    for it in 0..STAGE_ITERS {
        let g = obj.smooth_grad(&y, eps);
        let fy = obj.smooth_value(&y, eps);
        let x_new = loop {
            let cand = cons.project(&(&y - &g / *lipschitz))?;
            let d = &cand - &y;
            let model = fy + g.dot(&d) + 0.5 * *lipschitz * d.norm_squared();
            if obj.smooth_value(&cand, eps) <= model + 1e-15 * fy.abs().max(1.0) {
                break cand;
            }
            *lipschitz *= 2.0;
            if !lipschitz.is_finite() {
                return Err(CovarError::NumericalBreakdown("step size collapsed".into()));
            }
        };
        let f_new = obj.smooth_value(&x_new, eps);
        let moved = (&x_new - &x).amax();
        let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if f_new > fx {
            y = x_new.clone();
            t = 1.0;
        } else {
            y = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
            t = t_new;
        }
        x = x_new;
        fx = f_new;
        if moved <= 1e-14 {
            return Ok((x, it + 1));
        }
    }
    Ok((x, STAGE_ITERS))
}

fn smoothing_continuation(obj: &Objective, cons: &Constraints, x0: DVector<f64>) -> Result<(DVector<f64>, usize)> {
    let mut x = x0;
    let mut eps = EPS_START;
    let mut lipschitz = 1.0;
    let mut total = 0;
    loop {
        let (next, its) = fista_stage(obj, cons, x, eps, &mut lipschitz)?;
        x = next;
        total += its;
        // Once ε is negligible next to √(xᵀQx) further stages change nothing.
        let root = obj.form(&x).sqrt();
        if eps <= EPS_END || eps < 1e-7 * root {
            return Ok((x, total));
        }
        eps = (eps * 0.5).max(EPS_END);
    }
}

enum FaceOutcome {
    Converged,
    AtVertex,
}

struct Polisher<'a> {
    obj: &'a Objective,
    cons: &'a Constraints,
    escape: Option<&'a DVector<f64>>,
    iterations: usize,
}

impl Polisher<'_> {
    fn support_indices(support: &[bool]) -> Vec<usize> {
        (0..support.len()).filter(|&j| support[j]).collect()
    }

    /// Move along `d` (zero off the support) with a ratio test and Armijo
    /// backtracking. Returns false if no decrease was possible.
    fn line_step(&self, x: &mut DVector<f64>, support: &mut [bool], d: &DVector<f64>, t_max_init: f64) -> bool {
        let mut t_max = f64::INFINITY;
        let mut blocking = None;
        for j in 0..x.len() {
            if support[j] && d[j] < 0.0 {
                let t = -x[j] / d[j];
                if t < t_max {
                    t_max = t;
                    blocking = Some(j);
                }
            }
        }
        let t0 = t_max.min(t_max_init);
        if !(t0 > 0.0) {
            if let Some(j) = blocking {
                x[j] = 0.0;
                support[j] = false;
                return true;
            }
            return false;
        }
        let f0 = self.obj.value(x);
        let g = self.grad(x);
        let slope = g.dot(d);
        let mut t = t0;
        for _ in 0..80 {
            let trial = &*x + d * t;
            let ft = self.obj.value(&trial);
            if ft <= f0 + 1e-4 * t * slope.min(0.0) && ft <= f0 {
                let hit = t == t_max;
                *x = trial;
                if hit {
                    if let Some(j) = blocking {
                        x[j] = 0.0;
                        support[j] = false;
                    }
                }
                for j in 0..x.len() {
                    if support[j] && x[j] <= 0.0 {
                        x[j] = 0.0;
                        support[j] = false;
                    }
                }
                return ft < f0 || hit;
            }
            t *= 0.5;
        }
        false
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        let qx = &self.obj.q * x;
        let root = x.dot(&qx).max(0.0).sqrt();
        if root == 0.0 {
            return self.obj.c.clone();
        }
        &self.obj.c + qx * (self.obj.b / root)
    }

    fn is_vertex(&self, x: &DVector<f64>) -> bool {
        self.obj.form(x) <= 1e-28 * x.norm_squared().max(1.0)
    }

    /// Newton iterations restricted to the face of `support`.
    fn face_newton(&mut self, x: &mut DVector<f64>, support: &mut [bool], mut steepest_first: bool) -> FaceOutcome {
        for _ in 0..FACE_ITERS {
            self.iterations += 1;
            if self.is_vertex(x) {
                return FaceOutcome::AtVertex;
            }
            let idx = Self::support_indices(support);
            let basis = null_space(&self.cons.a.select_columns(&idx));
            if basis.ncols() == 0 {
                return FaceOutcome::Converged;
            }
            let g = self.grad(x);
            let g_s = DVector::from_fn(idx.len(), |i, _| g[idx[i]]);
            let rg = basis.transpose() * &g_s;
            if rg.amax() <= 1e-15 * self.obj.gscale {
                return FaceOutcome::Converged;
            }
            let dz = if steepest_first {
                -rg.clone()
            } else {
                self.newton_direction(x, &idx, &basis, &rg)
            };
            let slope = rg.dot(&dz);
            let dz = if slope < 0.0 { dz } else { -rg.clone() };
            let d_s = &basis * dz;
            let mut d = DVector::zeros(x.len());
            for (i, &j) in idx.iter().enumerate() {
                d[j] = d_s[i];
            }
            let t_init = if steepest_first { f64::INFINITY } else { 1.0 };
            steepest_first = false;
            let before = support.to_vec();
            if !self.line_step(x, support, &d, t_init) {
                return FaceOutcome::Converged;
            }
            if support != before.as_slice() {
                steepest_first = false;
            }
        }
        FaceOutcome::Converged
    }

    fn newton_direction(&self, x: &DVector<f64>, idx: &[usize], basis: &DMatrix<f64>, rg: &DVector<f64>) -> DVector<f64> {
        let k = idx.len();
        let q_s = DMatrix::from_fn(k, k, |i, j| self.obj.q[(idx[i], idx[j])]);
        let x_s = DVector::from_fn(k, |i, _| x[idx[i]]);
        let qx = &q_s * &x_s;
        let s = x_s.dot(&qx).max(0.0).sqrt();
        let h = (&q_s / s - &qx * qx.transpose() / (s * s * s)) * self.obj.b;
        let hr = basis.transpose() * h * basis;
        let dim = hr.nrows();
        let diag_max = (0..dim).map(|i| hr[(i, i)].abs()).fold(0.0_f64, f64::max);
        let mut ridge = 1e-12 * diag_max.max(1e-12);
        for _ in 0..30 {
            let mut reg = hr.clone();
            for i in 0..dim {
                reg[(i, i)] += ridge;
            }
            if let Ok(ch) = Cholesky::factor_with_tol(&reg, 0.0) {
                return -ch.solve(rg);
            }
            ridge *= 100.0;
        }
        -rg.clone()
    }

    /// Multipliers and KKT residual at `x` for the given support. The second
    /// element is the most negative reduced cost, with its index.
    fn kkt(&self, x: &DVector<f64>, support: &[bool]) -> (f64, Option<(usize, f64)>, bool) {
        let idx = Self::support_indices(support);
        let g = self.grad(x);
        let a_s = self.cons.a.select_columns(&idx);
        let g_s = DVector::from_fn(idx.len(), |i, _| g[idx[i]]);
        let nu = least_squares(&a_s.transpose(), &g_s);
        let stationarity = (&g_s - a_s.transpose() * &nu).amax();
        let reduced = &g - self.cons.a.transpose() * &nu;
        let tie_tol = 1e-9 * self.obj.gscale;
        let mut worst: Option<(usize, f64)> = None;
        let mut degenerate = false;
        for j in 0..x.len() {
            if support[j] {
                continue;
            }
            if reduced[j].abs() <= tie_tol {
                degenerate = true;
            }
            if worst.is_none_or(|(_, v)| reduced[j] < v) {
                worst = Some((j, reduced[j]));
            }
        }
        (stationarity, worst, degenerate)
    }
}

/// Minimize CoVaR over the no-short-selling feasible set.
///
/// `tol` bounds the KKT residual relative to the gradient scale of the problem.
pub fn minimize_constrained(p: &ConstrainedProblem<'_>, tol: f64) -> Result<ConstrainedSolution> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CovarError::BadConfig(format!("tolerance must be positive, got {tol}")));
    }
    let (m, r) = (p.model, p.reduced);
    let n = m.n();
    let obj = Objective::new(m, r);
    let cons = Constraints::new(m, p.feasible);
    let with_return = matches!(p.feasible, FeasibleSet::SimplexSlice { .. });

    let vertex_feasible = match p.feasible {
        FeasibleSet::Simplex => true,
        FeasibleSet::SimplexSlice { target } => {
            (target - m.mu1()).abs() <= 1e-12 * target.abs().max(m.mu1().abs()).max(1.0)
        }
    };
    let vertex = vertex_feasible.then(|| vertex_test(m, r, &obj, with_return));
    if let Some(v) = vertex.as_ref().filter(|v| v.optimal) {
        let mut e1 = DVector::zeros(n);
        e1[0] = 1.0;
        return Ok(ConstrainedSolution {
            weights: m.to_original(&e1),
            value: covar_raw(m, r, &e1),
            kkt_residual: 0.0,
            support: vec![m.conditioning_index()],
            at_conditioning_vertex: true,
            degenerate: v.dist >= obj.b * (1.0 - 1e-9),
            iterations: 0,
        });
    }

    // Slice targets at an extreme return pin the weights on the extreme assets.
    if let FeasibleSet::SimplexSlice { target } = p.feasible {
        let (lo, hi) = mu_range(m);
        if target == lo || target == hi {
            let pinned: Vec<usize> = (0..n).filter(|&j| m.mu()[j] == target).collect();
            if pinned.len() == 1 {
                let mut x = DVector::zeros(n);
                x[pinned[0]] = 1.0;
                return Ok(finish(m, r, &obj, &x, 0.0, false, 0));
            }
        }
    }

    let start = cons.project(&DVector::from_element(n, 1.0 / n as f64))?;
    let (x_smooth, mut iterations) = smoothing_continuation(&obj, &cons, start)?;

    let escape = vertex.as_ref().and_then(|v| v.escape.as_ref());
    let mut polisher = Polisher { obj: &obj, cons: &cons, escape, iterations: 0 };
    let mut x = x_smooth;
    let mut support: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
    let kkt_tol = tol * obj.gscale;
    let mut steepest = false;
    let mut result = None;
    for _ in 0..(10 * n + 20) {
        match polisher.face_newton(&mut x, &mut support, steepest) {
            FaceOutcome::AtVertex => {
                let Some(d) = polisher.escape else {
                    return Err(CovarError::NumericalBreakdown(
                        "descent reached the conditioning vertex without an escape direction".into(),
                    ));
                };
                let mut e1 = DVector::zeros(n);
                e1[0] = 1.0;
                x = e1;
                support = d.iter().enumerate().map(|(j, &v)| j == 0 || v > 0.0).collect();
                let d = d.clone();
                polisher.line_step(&mut x, &mut support, &d, f64::INFINITY);
                steepest = false;
                continue;
            }
            FaceOutcome::Converged => {}
        }
        let (stationarity, worst, degenerate) = polisher.kkt(&x, &support);
        match worst {
            Some((j, rc)) if rc < -kkt_tol => {
                support[j] = true;
                steepest = true;
            }
            _ => {
                let residual = stationarity.max(worst.map_or(0.0, |(_, rc)| (-rc).max(0.0)));
                result = Some((residual, degenerate));
                break;
            }
        }
    }
    iterations += polisher.iterations;
    let Some((residual, degenerate)) = result else {
        return Err(CovarError::NoConvergence { iterations, residual: f64::NAN });
    };
    if residual > kkt_tol {
        return Err(CovarError::NoConvergence { iterations, residual });
    }
    Ok(finish(m, r, &obj, &x, residual, degenerate, iterations))
}

fn finish(
    m: &ValidatedModel,
    r: &ReducedModel,
    obj: &Objective,
    x: &DVector<f64>,
    residual: f64,
    degenerate: bool,
    iterations: usize,
) -> ConstrainedSolution {
    let weights = m.to_original(x);
    let support = (0..weights.len()).filter(|&j| weights[j] > 0.0).collect();
    let at_vertex = obj.form(x) == 0.0 && x[0] == 1.0;
    ConstrainedSolution {
        weights,
        value: covar_raw(m, r, x),
        kkt_residual: residual,
        support,
        at_conditioning_vertex: at_vertex,
        degenerate,
        iterations,
    }
}

/// Constrained minimum at each target, as frontier points in grid order.
///
/// A point is flagged efficient when every later grid point has strictly
/// larger CoVaR; the last point is efficient if it sits at the top attainable
/// return or the curve is still rising into it.
pub fn constrained_frontier(
    m: &ValidatedModel,
    r: &ReducedModel,
    grid: &[f64],
    tol: f64,
) -> Result<Vec<FrontierPoint>> {
    let sols: Vec<ConstrainedSolution> = grid
        .par_iter()
        .map(|&e| {
            let p = ConstrainedProblem::new(m, r, FeasibleSet::SimplexSlice { target: e })?;
            minimize_constrained(&p, tol)
        })
        .collect::<Result<_>>()?;
    let (_, top) = mu_range(m);
    let mut later_min = f64::INFINITY;
    let mut efficient = vec![false; sols.len()];
    for k in (0..sols.len()).rev() {
        efficient[k] = if k + 1 == sols.len() {
            grid[k] >= top || (k > 0 && sols[k].value > sols[k - 1].value)
        } else {
            sols[k].value < later_min
        };
        later_min = later_min.min(sols[k].value);
    }
    Ok(grid
        .iter()
        .zip(sols)
        .zip(efficient)
        .map(|((&e, s), eff)| FrontierPoint {
            target: e,
            value: s.value,
            weights: s.weights,
            efficient: eff,
            status: "Constrained".to_string(),
        })
        .collect())
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

    fn short_unbounded() -> MarketModel {
        MarketModel::with_intensities(
            vec![1.0, 4.0, 3.0],
            vec![
                vec![1.0, -4.0 / 3.0, 2.0 / 3.0],
                vec![-4.0 / 3.0, 4.0, -1.0],
                vec![2.0 / 3.0, -1.0, 1.0],
            ],
            0.8,
            0.7,
        )
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
    fn short_unbounded_slice() {
        let (v, r) = setup(short_unbounded());
        let p = ConstrainedProblem::new(&v, &r, FeasibleSet::SimplexSlice { target: 2.0 }).unwrap();
        let s = minimize_constrained(&p, 1e-9).unwrap();
        let want = [2.0 / 3.0, 1.0 / 3.0, 0.0];
        for (w, e) in s.weights.iter().zip(want) {
            assert!((w - e).abs() < 1e-12, "{:?}", s.weights);
        }
        assert!((s.value - (-82.0 + 7.0 * 5f64.sqrt()) / 45.0).abs() < 1e-12);
        assert_eq!(s.support, vec![0, 1]);
    }

    #[test]
    fn corner_optimum_simplex() {
        let (v, r) = setup(corner_optimum());
        let p = ConstrainedProblem::new(&v, &r, FeasibleSet::Simplex).unwrap();
        let s = minimize_constrained(&p, 1e-9).unwrap();
        assert_eq!(s.weights, vec![1.0, 0.0, 0.0]);
        assert_eq!(s.value, -1.0);
        assert!(s.at_conditioning_vertex);
    }

    #[test]
    fn top_return_is_a_vertex() {
        let (v, r) = setup(short_unbounded());
        let p = ConstrainedProblem::new(&v, &r, FeasibleSet::SimplexSlice { target: 4.0 }).unwrap();
        let s = minimize_constrained(&p, 1e-9).unwrap();
        assert_eq!(s.weights, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn infeasible_targets() {
        let (v, r) = setup(short_unbounded());
        for e in [0.5, 4.5] {
            assert!(matches!(
                ConstrainedProblem::new(&v, &r, FeasibleSet::SimplexSlice { target: e }),
                Err(CovarError::InfeasibleSlice { .. })
            ));
        }
    }

    #[test]
    fn short_unbounded_simplex_interior_of_edge() {
        // Over the whole simplex the minimum is near the high-return asset.
        let (v, r) = setup(short_unbounded());
        let p = ConstrainedProblem::new(&v, &r, FeasibleSet::Simplex).unwrap();
        let s = minimize_constrained(&p, 1e-9).unwrap();
        let x = v.to_canonical(&s.weights);
        assert!(x.iter().all(|&w| w >= 0.0));
        assert!((x.sum() - 1.0).abs() < 1e-12);
        // Compare against a fine barycentric lattice.
        let k = 600;
        let mut best = f64::INFINITY;
        for i in 0..=k {
            for j in 0..=(k - i) {
                let w = [i as f64 / k as f64, j as f64 / k as f64, (k - i - j) as f64 / k as f64];
                best = best.min(crate::riskmeasures::covar_raw_original(&v, &r, &w));
            }
        }
        assert!(s.value <= best + 1e-12);
        assert!(best - s.value < 1e-3);
    }

    #[test]
    fn frontier_hits_the_fixture() {
        let (v, r) = setup(short_unbounded());
        let grid: Vec<f64> = (0..=12).map(|k| 1.0 + 0.25 * k as f64).collect();
        let pts = constrained_frontier(&v, &r, &grid, 1e-9).unwrap();
        let at2 = pts.iter().find(|p| p.target == 2.0).unwrap();
        assert!((at2.value - (-82.0 + 7.0 * 5f64.sqrt()) / 45.0).abs() < 1e-12);
        assert_eq!(pts.last().unwrap().weights, vec![0.0, 1.0, 0.0]);
    }
}
