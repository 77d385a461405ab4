//! Euclidean projections onto the feasible polytopes.

use nalgebra::DVector;

/// Projection onto the probability simplex `{x ≥ 0, Σx = 1}` by sorting.
pub fn project_simplex(y: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = y.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    y.map(|v| (v - theta).max(0.0))
}

/// Projection onto the return slice `{x ≥ 0, Σx = 1, μᵀx = target}`.
///
/// For a fixed multiplier `ν` of the return constraint the minimizer is the
/// simplex projection of `y + νμ`, and its return is nondecreasing in `ν`.
/// Bisection on `ν` fixes the support; the multipliers are then recomputed
/// exactly from the 2×2 system on that support. Returns `None` for an empty
/// slice.
pub fn project_slice(y: &DVector<f64>, mu: &DVector<f64>, target: f64) -> Option<DVector<f64>> {
    let (lo, hi) = (mu.min(), mu.max());
    let spread = hi - lo;
    let tol = 1e-13 * lo.abs().max(hi.abs()).max(1.0);
    if target < lo - tol || target > hi + tol {
        return None;
    }
    let at = |nu: f64| project_simplex(&(y + mu * nu));
    if spread == 0.0 {
        return Some(project_simplex(y));
    }
    let ret = |x: &DVector<f64>| mu.dot(x);

    let mut width = (y.amax() + 1.0) / spread;
    let (mut nu_lo, mut nu_hi) = (-width, width);
    for _ in 0..2000 {
        let (r_lo, r_hi) = (ret(&at(nu_lo)), ret(&at(nu_hi)));
        if r_lo <= target && r_hi >= target {
            break;
        }
        width *= 2.0;
        if r_lo > target {
            nu_lo = -width;
        }
        if r_hi < target {
            nu_hi = width;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (nu_lo + nu_hi);
        if mid <= nu_lo || mid >= nu_hi {
            break;
        }
        if ret(&at(mid)) < target {
            nu_lo = mid;
        } else {
            nu_hi = mid;
        }
    }
    let approx = at(0.5 * (nu_lo + nu_hi));
    let exact = polish(y, mu, target, &approx);
    let residual = |x: &DVector<f64>| (x.sum() - 1.0).abs().max((ret(x) - target).abs());
    match exact {
        Some(x) if residual(&x) <= residual(&approx) => Some(x),
        _ => (residual(&approx) <= 1e-11 * (1.0 + target.abs())).then_some(approx),
    }
}

/// Exact projection given the support of `approx`, if it is consistent.
fn polish(y: &DVector<f64>, mu: &DVector<f64>, target: f64, approx: &DVector<f64>) -> Option<DVector<f64>> {
    let support: Vec<usize> = (0..y.len()).filter(|&j| approx[j] > 0.0).collect();
    let k = support.len() as f64;
    let (s_mu, s_mu2, s_y, s_my) = support.iter().fold((0.0, 0.0, 0.0, 0.0), |acc, &j| {
        (acc.0 + mu[j], acc.1 + mu[j] * mu[j], acc.2 + y[j], acc.3 + mu[j] * y[j])
    });
    let det = k * s_mu2 - s_mu * s_mu;
    if det <= 1e-14 * k * s_mu2.max(1e-300) {
        return None;
    }
    let (r1, r2) = (1.0 - s_y, target - s_my);
    let nu1 = (s_mu2 * r1 - s_mu * r2) / det;
    let nu2 = (k * r2 - s_mu * r1) / det;
    let mut x = DVector::zeros(y.len());
    let slack = 1e-12 * (y.amax() + nu1.abs() + nu2.abs() * mu.amax() + 1.0);
    for j in 0..y.len() {
        let v = y[j] + nu1 + nu2 * mu[j];
        if approx[j] > 0.0 {
            if v < -slack {
                return None;
            }
            x[j] = v.max(0.0);
        } else if v > slack {
            return None;
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_basics() {
        let y = DVector::from_vec(vec![0.2, 0.3, 0.5]);
        assert_eq!(project_simplex(&y), y);
        let p = project_simplex(&DVector::from_vec(vec![2.0, 0.0, 0.0]));
        assert_eq!(p.as_slice(), &[1.0, 0.0, 0.0]);
        let p = project_simplex(&DVector::from_vec(vec![1.0, 1.0, -3.0]));
        assert_eq!(p.as_slice(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn simplex_projection_is_optimal() {
        // Compare against brute force over a fine lattice in 3D.
        let y = DVector::from_vec(vec![0.9, -0.4, 0.7]);
        let p = project_simplex(&y);
        let k = 400;
        let mut best = f64::INFINITY;
        for i in 0..=k {
            for j in 0..=(k - i) {
                let x = DVector::from_vec(vec![
                    i as f64 / k as f64,
                    j as f64 / k as f64,
                    (k - i - j) as f64 / k as f64,
                ]);
                best = best.min((x - &y).norm());
            }
        }
        assert!((p - &y).norm() <= best + 1e-12);
    }

    #[test]
    fn slice_projection_hits_constraints() {
        let mu = DVector::from_vec(vec![1.0, 4.0, 3.0, 2.0]);
        let y = DVector::from_vec(vec![0.3, -0.2, 1.1, 0.4]);
        let x = project_slice(&y, &mu, 2.5).unwrap();
        assert!(x.iter().all(|&v| v >= 0.0));
        assert!((x.sum() - 1.0).abs() < 1e-14);
        assert!((mu.dot(&x) - 2.5).abs() < 1e-14);
        // Variational inequality: (y − x)ᵀ(z − x) ≤ 0 at the vertices z of the slice.
        for (i, j) in [(0, 1), (0, 2), (3, 1), (3, 2)] {
            let w = (2.5 - mu[i]) / (mu[j] - mu[i]);
            let mut z = DVector::zeros(4);
            z[i] = 1.0 - w;
            z[j] = w;
            assert!((&y - &x).dot(&(z - &x)) <= 1e-12);
        }
    }

    #[test]
    fn slice_projection_against_lattice() {
        let mu = DVector::from_vec(vec![0.5, 2.0, 1.2]);
        for y in [[0.9, -0.4, 0.7], [5.0, 5.0, -3.0], [-1.0, 0.1, 0.2]] {
            let y = DVector::from_vec(y.to_vec());
            let x = project_slice(&y, &mu, 1.0).unwrap();
            // The slice is a segment between two edge points; search along it.
            let ends = [
                DVector::from_vec(vec![2.0 / 3.0, 1.0 / 3.0, 0.0]),
                DVector::from_vec(vec![2.0 / 7.0, 0.0, 5.0 / 7.0]),
            ];
            let best = (0..=100_000)
                .map(|k| {
                    let t = k as f64 / 100_000.0;
                    (&ends[0] * (1.0 - t) + &ends[1] * t - &y).norm()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((x - &y).norm() <= best + 1e-12);
        }
    }

    #[test]
    fn slice_at_extreme_return_is_the_vertex() {
        let mu = DVector::from_vec(vec![1.0, 4.0, 3.0]);
        let x = project_slice(&DVector::from_vec(vec![0.3, 0.3, 0.4]), &mu, 4.0).unwrap();
        assert!((x - DVector::from_vec(vec![0.0, 1.0, 0.0])).amax() < 1e-14);
        assert!(project_slice(&DVector::from_vec(vec![0.3, 0.3, 0.4]), &mu, 4.5).is_none());
    }
}
