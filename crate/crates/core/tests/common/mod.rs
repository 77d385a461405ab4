#![allow(dead_code)]

use covar_core::{reduce, validate_model, MarketModel, ReducedModel, ValidatedModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use nalgebra::{DMatrix, DVector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Σ = AAᵀ + δI with standard normal-ish entries, well conditioned enough
/// for 1e-10 comparisons.
pub fn random_sigma(rng: &mut impl Rng, n: usize) -> Vec<Vec<f64>> {
    let a: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            s[i][j] = (0..n).map(|k| a[i][k] * a[j][k]).sum::<f64>();
        }
        s[i][i] += 0.1;
    }
    s
}

pub fn random_mu(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..3.0)).collect()
}

pub fn random_model(rng: &mut impl Rng, n: usize) -> MarketModel {
    let a = rng.random_range(0.2..2.5);
    let b = rng.random_range(0.2..2.5);
    let mut m = MarketModel::with_intensities(random_mu(rng, n), random_sigma(rng, n), a, b);
    m.conditioning_asset = rng.random_range(1..=n);
    m
}

pub fn setup(m: &MarketModel) -> (ValidatedModel, ReducedModel) {
    let v = validate_model(m).expect("valid model");
    let r = reduce(&v).expect("reducible model");
    (v, r)
}

/// A random model with {1, μ, q} independent and Δ > 0 by a clear margin.
pub fn random_bounded_model(rng: &mut impl Rng, n: usize) -> (MarketModel, ValidatedModel, ReducedModel) {
    loop {
        let m = random_model(rng, n);
        let (v, r) = setup(&m);
        let scale = r.risk.b.powi(2) * r.gram.alpha + r.risk.a.powi(2) * r.gram.det.abs();
        if r.independent && r.delta > 1e-3 * scale && r.independence_score > 1e-4 {
            return (m, v, r);
        }
    }
}

/// Golden-section minimization of a convex function on [lo, hi].
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if hi - lo < 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    let mut best = (f(lo), lo);
    for t in [c, d, hi] {
        let v = f(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    (best.1, best.0)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

/// CoVaR straight from the Gaussian conditional formula, with no reduction.
pub fn covar_direct(m: &MarketModel, x: &[f64]) -> f64 {
    let c = m.conditioning_asset - 1;
    let (a, b) = match m.risk {
        covar_core::RiskSpec::Intensities { a, b } => (a, b),
        _ => unreachable!("tests build models from intensities"),
    };
    let mu_x = dot(&m.mu, x);
    let var_x = dot(x, &mat_vec(&m.sigma, x));
    let cov = dot(&m.sigma[c], x);
    // Conditional law of X given Y: mean shift cov/σ_Y² per unit of Y, variance
    // σ_X² − cov²/σ_Y². Writing it this way avoids √(1 − ρ²) cancellation.
    let sy = m.sigma[c][c].sqrt();
    let cond_var = (var_x - cov * cov / m.sigma[c][c]).max(0.0);
    -mu_x + a * cov / sy + b * cond_var.sqrt()
}

/// The segment of the n = 3 return slice inside the simplex, as
/// `x(t) = p + t·d` for t in [lo, hi] (canonical order irrelevant).
pub fn slice_segment(mu: &[f64], e: f64) -> Option<([f64; 3], [f64; 3], f64, f64)> {
    // Direction orthogonal to (1,1,1) and μ.
    let ones = [1.0, 1.0, 1.0];
    let d = [
        ones[1] * mu[2] - ones[2] * mu[1],
        ones[2] * mu[0] - ones[0] * mu[2],
        ones[0] * mu[1] - ones[1] * mu[0],
    ];
    // A particular solution: combination of e_i giving sum 1 and return e.
    // Use the two assets with extreme returns.
    let (imin, imax) = {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| mu[i].total_cmp(&mu[j]));
        (idx[0], idx[2])
    };
    if mu[imax] == mu[imin] {
        return None;
    }
    let w = (e - mu[imin]) / (mu[imax] - mu[imin]);
    let mut p = [0.0; 3];
    p[imin] = 1.0 - w;
    p[imax] = w;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..3 {
        if d[i] > 0.0 {
            lo = lo.max(-p[i] / d[i]);
        } else if d[i] < 0.0 {
            hi = hi.min(-p[i] / d[i]);
        } else if p[i] < 0.0 {
            return None;
        }
    }
    (lo <= hi).then_some((p, d, lo, hi))
}

/// Minimize VaR on `{Σx = 1, xᵀμ = E}` by damped Newton in null-space
/// coordinates, without any closed form.
pub fn var_argmin_numeric(m: &MarketModel, a: f64, e: f64) -> Vec<f64> {
    let n = m.mu.len();
    let sigma = DMatrix::from_fn(n, n, |i, j| m.sigma[i][j]);
    let mut cons = DMatrix::from_element(2, n, 1.0);
    for j in 0..n {
        cons[(1, j)] = m.mu[j];
    }
    let svd = cons.clone().svd(true, true);
    let x0 = svd.solve(&DVector::from_vec(vec![1.0, e]), 1e-14).unwrap();
    let vt = svd.v_t.unwrap();
    // Rows 2.. of the full V span the null space; build it from a QR of the complement.
    let full = DMatrix::from_fn(n, n, |i, j| if j < 2 { vt[(j, i)] } else if i == j { 1.0 } else { 0.0 });
    let q = full.qr().q();
    let basis = q.columns(2, n - 2).into_owned();
    let var = |z: &DVector<f64>| {
        let x = &x0 + &basis * z;
        -x.dot(&DVector::from_vec(m.mu.clone())) + a * x.dot(&(&sigma * &x)).sqrt()
    };
    let mut z = DVector::zeros(n - 2);
    for _ in 0..100 {
        let x = &x0 + &basis * &z;
        let sx = &sigma * &x;
        let s = x.dot(&sx).sqrt();
        let grad = basis.transpose() * (&sx * (a / s));
        let hess = basis.transpose() * (&sigma / s - &sx * sx.transpose() / (s * s * s)) * &basis * a;
        let step = hess.lu().solve(&(-&grad)).unwrap();
        let mut t = 1.0;
        let f0 = var(&z);
        // Near the optimum f is flat to rounding; judge descent with slack
        // so full Newton steps are kept and the iterate converges in x.
        while var(&(&z + &step * t)) > f0 + 1e-13 * f0.abs().max(1.0) && t > 1e-12 {
            t *= 0.5;
        }
        z += &step * t;
        if (&step * t).amax() < 1e-15 {
            break;
        }
    }
    (x0 + basis * z).iter().copied().collect()
}
