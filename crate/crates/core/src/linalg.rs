//! Small dense linear algebra for symmetric positive definite systems.
//!
//! Sizes here are tiny (n <= 100), so everything is plain row-major loops
//! on top of `nalgebra` storage.

use nalgebra::{DMatrix, DVector};

/// Relative pivot tolerance used by [`Cholesky::factor`].
pub const PIVOT_TOL: f64 = 1e-10;

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DMatrix<f64>,
}

/// A pivot that fell below tolerance: its index and value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotFailure {
    pub pivot: usize,
    pub value: f64,
}

impl Cholesky {
    /// Factor a symmetric matrix, rejecting pivots below
    /// `rel_tol * max(diag(A))`. Only the lower triangle is read.
    pub fn factor_with_tol(a: &DMatrix<f64>, rel_tol: f64) -> Result<Self, PivotFailure> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "Cholesky of a non-square matrix");
        let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0_f64, f64::max);
        let floor = rel_tol * max_diag;
        let mut l = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > floor) || !d.is_finite() {
                return Err(PivotFailure { pivot: j, value: d });
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Cholesky { l })
    }

    pub fn factor(a: &DMatrix<f64>) -> Result<Self, PivotFailure> {
        Self::factor_with_tol(a, PIVOT_TOL)
    }

    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Solve `L y = b`.
    pub fn solve_lower(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[(i, k)] * y[k];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solve `Lᵀ x = y`.
    pub fn solve_upper(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = y.clone();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// Solve `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `L v` for a standard-normal vector `v` gives a draw with covariance `A`.
    pub fn mul_lower(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = 0.0;
            for k in 0..=i {
                s += self.l[(i, k)] * v[k];
            }
            out[i] = s;
        }
    }
}

/// Orthonormal basis (columns) of the null space of the rows of `a`.
///
/// Runs modified Gram-Schmidt over the rows, then over the unit vectors,
/// keeping whatever survives. Rows that are (numerically) dependent are
/// dropped, so rank-deficient constraint sets are fine.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let push = |v: DVector<f64>, basis: &mut Vec<DVector<f64>>| -> bool {
        let scale = v.norm();
        if scale == 0.0 {
            return false;
        }
        let mut w = v / scale;
        for _ in 0..2 {
            for b in basis.iter() {
                let c = w.dot(b);
                w.axpy(-c, b, 1.0);
            }
        }
        let norm = w.norm();
        if norm > 1e-10 {
            basis.push(w / norm);
            true
        } else {
            false
        }
    };
    for i in 0..m {
        let row = a.row(i).transpose();
        push(row, &mut basis);
    }
    let rank = basis.len();
    for j in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        push(e, &mut basis);
    }
    let k = n - rank;
    let mut out = DMatrix::zeros(n, k);
    for (c, v) in basis[rank..].iter().enumerate() {
        out.set_column(c, v);
    }
    out
}

/// Minimum-norm least-squares solution of `a x ≈ b` for a short, wide or
/// tall matrix (used for constraint multipliers, at most a handful of rows).
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.solve(b, tol).expect("SVD computed with both factors")
}

/// Nonnegative least squares, `min ‖a x − b‖ s.t. x ≥ 0` (Lawson–Hanson).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-13 * (a.norm() * b.norm()).max(f64::MIN_POSITIVE);
    let at = a.transpose();
    for _outer in 0..(3 * n + 10) {
        let w = &at * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        match candidate {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => break,
        }
        for _inner in 0..(3 * n + 10) {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let sub = a.select_columns(&idx);
            let z_sub = least_squares(&sub, b);
            if z_sub.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z_sub[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if z_sub[k] <= 0.0 {
                    let denom = x[j] - z_sub[k];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                x[j] += alpha * (z_sub[k] - x[j]);
                if x[j] <= 1e-15 * (1.0 + z_sub[k].abs()) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    x
}

pub fn quad_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0]);
        let ch = Cholesky::factor(&a).unwrap();
        let b = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let x = ch.solve(&b);
        assert_relative_eq!(&a * &x, b, epsilon = 1e-14);
        let l = ch.l();
        assert_relative_eq!(l * l.transpose(), a, epsilon = 1e-14);
    }

    #[test]
    fn cholesky_rejects_rank_one() {
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let a = &v * v.transpose();
        let err = Cholesky::factor(&a).unwrap_err();
        assert_eq!(err.pivot, 1);
    }

    #[test]
    fn null_space_is_orthogonal_to_rows() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 3.0, 4.0]);
        let n = null_space(&a);
        assert_eq!(n.ncols(), 2);
        assert_relative_eq!(&a * &n, DMatrix::zeros(2, 2), epsilon = 1e-14);
        assert_relative_eq!(n.transpose() * &n, DMatrix::identity(2, 2), epsilon = 1e-14);
    }

    #[test]
    fn null_space_tolerates_dependent_rows() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        assert_eq!(null_space(&a).ncols(), 2);
    }

    #[test]
    fn nnls_matches_known_solution() {
        // Unconstrained optimum is (1, -1); with x >= 0 it is (0.5, 0)... checked by KKT.
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let x = nnls(&a, &b);
        assert!(x.iter().all(|&v| v >= 0.0));
        let grad = a.transpose() * (&a * &x - &b);
        for j in 0..2 {
            if x[j] > 0.0 {
                assert!(grad[j].abs() < 1e-12);
            } else {
                assert!(grad[j] >= -1e-12);
            }
        }
        assert_relative_eq!(x[0], 0.5, epsilon = 1e-12);
        assert_eq!(x[1], 0.0);
    }
}
