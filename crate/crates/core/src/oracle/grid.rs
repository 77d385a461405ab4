use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CovarError, Result};
use crate::linalg::{least_squares, null_space};
use crate::model::ValidatedModel;
use crate::reduction::ReducedModel;
use crate::riskmeasures::covar_raw;

const MAX_DIM: usize = 4;
const MAX_POINTS: u64 = 1 << 32;

/// Where [`grid_minimize`] searches. Box bounds apply to coordinates that
/// parametrize the budget hyperplane: the weights of the assets other than
/// the conditioning asset, or, on a return slice, coordinates along an
/// orthonormal basis of the slice directions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GridDomain {
    Simplex,
    SimplexSlice { target: f64 },
    Hyperplane { lo: f64, hi: f64 },
    HyperplaneSlice { target: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMinimum {
    /// Minimizing weights in the caller's order.
    pub weights: Vec<f64>,
    pub value: f64,
    pub evaluated: u64,
    /// The minimizer touches the edge of a box domain, so the true minimum
    /// may lie outside it.
    pub on_box_boundary: bool,
}

/// An affine parametrization `x = origin + basis·z` with `z` on a lattice.
struct Lattice {
    origin: DVector<f64>,
    basis: DMatrix<f64>,
    axes: Vec<Vec<f64>>,
    nonneg: bool,
    simplex_sum: Option<usize>,
    boxed: bool,
}

impl Lattice {
    fn total(&self) -> u64 {
        self.axes.iter().map(|a| a.len() as u64).product()
    }

    fn decode(&self, mut flat: u64, idx: &mut [usize]) {
        for (d, axis) in self.axes.iter().enumerate() {
            let len = axis.len() as u64;
            idx[d] = (flat % len) as usize;
            flat /= len;
        }
    }

    fn point(&self, idx: &[usize]) -> Option<DVector<f64>> {
        if let Some(k) = self.simplex_sum {
            if idx.iter().sum::<usize>() > k {
                return None;
            }
        }
        let z = DVector::from_fn(idx.len(), |d, _| self.axes[d][idx[d]]);
        let mut x = &self.origin + &self.basis * z;
        if let Some(k) = self.simplex_sum {
            // Exact barycentric coordinates avoid drift in the first weight.
            let used: usize = idx.iter().sum();
            x[0] = (k - used) as f64 / k as f64;
        }
        if self.nonneg {
            if x.iter().any(|&v| v < -1e-12) {
                return None;
            }
            x.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Some(x)
    }
}

fn axis(lo: f64, hi: f64, h: f64) -> Vec<f64> {
    let steps = ((hi - lo) / h).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|i| if i == steps { hi } else { lo + (hi - lo) * i as f64 / steps as f64 })
        .collect()
}

fn slice_frame(m: &ValidatedModel, target: f64) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.n();
    let mut a = DMatrix::from_element(2, n, 1.0);
    a.set_row(1, &m.mu().transpose());
    let origin = least_squares(&a, &DVector::from_vec(vec![1.0, target]));
    (origin, null_space(&a))
}

fn check_box(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CovarError::BadConfig(format!("bad box [{lo}, {hi}]")));
    }
    Ok(())
}

fn build(m: &ValidatedModel, domain: GridDomain, h: f64) -> Result<Lattice> {
    let n = m.n();
    let k = n - 1;
    let hyperplane_basis = || {
        let mut b = DMatrix::zeros(n, k);
        for j in 0..k {
            b[(0, j)] = -1.0;
            b[(j + 1, j)] = 1.0;
        }
        b
    };
    let mut e1 = DVector::zeros(n);
    e1[0] = 1.0;
    Ok(match domain {
        GridDomain::Simplex => {
            let steps = (1.0 / h).ceil() as usize;
            let ticks: Vec<f64> = (0..=steps).map(|i| i as f64 / steps as f64).collect();
            Lattice {
                origin: e1,
                basis: hyperplane_basis(),
                axes: vec![ticks; k],
                nonneg: true,
                simplex_sum: Some(steps),
                boxed: false,
            }
        }
        GridDomain::Hyperplane { lo, hi } => {
            check_box(lo, hi)?;
            Lattice {
                origin: e1,
                basis: hyperplane_basis(),
                axes: vec![axis(lo, hi, h); k],
                nonneg: false,
                simplex_sum: None,
                boxed: true,
            }
        }
        GridDomain::HyperplaneSlice { target, lo, hi } => {
            check_box(lo, hi)?;
            let (origin, basis) = slice_frame(m, target);
            let dims = basis.ncols();
            Lattice { origin, basis, axes: vec![axis(lo, hi, h); dims], nonneg: false, simplex_sum: None, boxed: true }
        }
        GridDomain::SimplexSlice { target } => {
            let lo_mu = m.mu().min();
            let hi_mu = m.mu().max();
            if target < lo_mu || target > hi_mu {
                return Err(CovarError::InfeasibleSlice { target, min: lo_mu, max: hi_mu });
            }
            let (origin, basis) = slice_frame(m, target);
            let dims = basis.ncols();
            let ticks = if dims == 1 {
                // The slice is a segment; put lattice ends exactly on its endpoints.
                let (mut t_lo, mut t_hi) = (f64::NEG_INFINITY, f64::INFINITY);
                for i in 0..n {
                    let (o, d) = (origin[i], basis[(i, 0)]);
                    if d > 0.0 {
                        t_lo = t_lo.max(-o / d);
                    } else if d < 0.0 {
                        t_hi = t_hi.min(-o / d);
                    }
                }
                if t_hi <= t_lo {
                    vec![0.5 * (t_lo + t_hi)]
                } else {
                    axis(t_lo, t_hi, h)
                }
            } else {
                axis(-std::f64::consts::SQRT_2, std::f64::consts::SQRT_2, h)
            };
            Lattice { origin, basis, axes: vec![ticks; dims], nonneg: true, simplex_sum: None, boxed: false }
        }
    })
}

/// Exhaustive minimization of CoVaR over a lattice with spacing `resolution`.
///
/// Limited to `n ≤ 4`. Ties go to the first lattice point in enumeration
/// order, so the answer is reproducible.
pub fn grid_minimize(
    m: &ValidatedModel,
    r: &ReducedModel,
    domain: GridDomain,
    resolution: f64,
) -> Result<GridMinimum> {
    let n = m.n();
    if n > MAX_DIM {
        return Err(CovarError::DimensionTooLarge { n, max: MAX_DIM });
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(CovarError::BadConfig(format!("resolution must be positive, got {resolution}")));
    }
    let lattice = build(m, domain, resolution)?;
    let total = lattice.total();
    if total > MAX_POINTS {
        return Err(CovarError::BadConfig(format!("grid of {total} points is too large")));
    }
    let dims = lattice.axes.len();
    let best = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0usize; dims],
            |idx, flat| {
                lattice.decode(flat, idx);
                lattice.point(idx).map(|x| (covar_raw(m, r, &x), flat))
            },
        )
        .flatten()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let Some((value, flat)) = best else {
        return Err(CovarError::BadConfig("grid contains no feasible point".into()));
    };
    let mut idx = vec![0usize; dims];
    lattice.decode(flat, &mut idx);
    let x = lattice.point(&idx).expect("point was feasible during the search");
    let on_box_boundary =
        lattice.boxed && idx.iter().zip(&lattice.axes).any(|(&i, a)| i == 0 || i + 1 == a.len());
    Ok(GridMinimum { weights: m.to_original(&x), value, evaluated: total, on_box_boundary })
}
