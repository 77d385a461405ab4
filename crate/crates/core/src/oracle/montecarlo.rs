use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CovarError, Result};
use crate::model::{Portfolio, ValidatedModel};
use crate::normal::normal_cdf;

const CHUNK: usize = 1 << 16;
const MIN_SAMPLES: usize = 10_000;
const MIN_BAND_KEPT: usize = 100;
/// Stream offset separating the band sampler from the conditional sampler.
const BAND_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    /// Half-width of the conditioning band, in units of σ_Y. `None` skips
    /// the band estimator.
    pub band_epsilon: Option<f64>,
    pub bootstrap_reps: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self { samples: 1_000_000, seed: 0, band_epsilon: Some(0.05), bootstrap_reps: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    /// CoVaR from exact conditional sampling.
    pub estimate: f64,
    /// Bootstrap standard error of `estimate`.
    pub std_error: f64,
    /// CoVaR from joint sampling restricted to a band around the stress level.
    pub band_estimate: Option<f64>,
    pub band_kept: usize,
    pub seed: u64,
    pub samples: usize,
    /// Always `"chacha20"`.
    pub rng: String,
}

fn chunk_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draw `n` standard normals (or pairs, with `width = 2`) in fixed-size
/// chunks, each from its own stream, so the output does not depend on how
/// rayon splits the work.
fn normals(seed: u64, stream_base: u64, n: usize, width: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * width];
    out.par_chunks_mut(CHUNK * width).enumerate().for_each(|(k, chunk)| {
        let mut rng = chunk_rng(seed, stream_base + k as u64);
        for v in chunk.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    });
    out
}

/// 1-based rank of the lower β-quantile in a sorted sample of size `n`.
fn quantile_rank(n: usize, beta: f64) -> usize {
    ((n as f64 * beta).ceil() as usize).clamp(1, n)
}

fn sort(v: &mut [f64]) {
    v.par_sort_unstable_by(|a, b| a.total_cmp(b));
}

/// Monte-Carlo CoVaR of a portfolio.
///
/// The main estimator samples the exact conditional law of the portfolio
/// return given the conditioning asset at its stress level and reports the
/// negated empirical β-quantile. Its standard error comes from a bootstrap
/// of that order statistic: the k-th order statistic of a resample is
/// `X_(⌈N·U⌉)` with `U ~ Beta(k, N − k + 1)`, so each replicate costs one
/// draw. The optional band estimator samples the pair jointly and keeps the
/// draws whose conditioning return lies within the band.
pub fn mc_covar(m: &ValidatedModel, x: &Portfolio, cfg: &McConfig) -> Result<McEstimate> {
    if cfg.samples < MIN_SAMPLES {
        return Err(CovarError::BadConfig(format!(
            "at least {MIN_SAMPLES} samples required, got {}",
            cfg.samples
        )));
    }
    if cfg.bootstrap_reps < 2 {
        return Err(CovarError::BadConfig("need at least 2 bootstrap replicates".into()));
    }
    if x.len() != m.n() {
        return Err(CovarError::DimensionMismatch(format!(
            "portfolio has {} weights, model has {} assets",
            x.len(),
            m.n()
        )));
    }
    let xc = m.to_canonical(x.weights());
    let risk = m.risk();
    let mu_x = xc.dot(m.mu());
    let sigma_x = xc.dot(&(m.sigma() * &xc)).max(0.0).sqrt();
    let sigma_y = m.sigma1();
    let rho = if sigma_x > 0.0 {
        (xc.dot(&m.sigma().column(0)) / (sigma_x * sigma_y)).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    let tail = ((1.0 - rho) * (1.0 + rho)).max(0.0).sqrt();
    let beta = normal_cdf(-risk.b);
    let n = cfg.samples;

    let cond_mean = mu_x - rho * sigma_x * risk.a;
    let cond_sd = sigma_x * tail;
    let mut draws = normals(cfg.seed, 0, n, 1);
    draws.par_iter_mut().for_each(|z| *z = cond_mean + cond_sd * *z);
    sort(&mut draws);
    let k = quantile_rank(n, beta);
    let estimate = -draws[k - 1];

    let beta_law = Beta::new(k as f64, (n - k + 1) as f64)
        .map_err(|e| CovarError::NumericalBreakdown(format!("bootstrap law: {e}")))?;
    let mut rng = chunk_rng(cfg.seed, BAND_STREAM - 1);
    let reps: Vec<f64> = (0..cfg.bootstrap_reps)
        .map(|_| {
            let u: f64 = beta_law.sample(&mut rng);
            let idx = ((n as f64 * u).ceil() as usize).clamp(1, n);
            -draws[idx - 1]
        })
        .collect();
    let mean = reps.iter().sum::<f64>() / reps.len() as f64;
    let var = reps.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps.len() - 1) as f64;

    let (band_estimate, band_kept) = match cfg.band_epsilon {
        None => (None, 0),
        Some(eps) => {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(CovarError::BadConfig(format!("band half-width must be positive, got {eps}")));
            }
            let pairs = normals(cfg.seed, BAND_STREAM, n, 2);
            // In standardized units the stress level is Z₁ = −a.
            let mut kept: Vec<f64> = pairs
                .par_chunks(2)
                .filter(|p| (p[0] + risk.a).abs() < eps)
                .map(|p| mu_x + sigma_x * (rho * p[0] + tail * p[1]))
                .collect();
            if kept.len() < MIN_BAND_KEPT {
                return Err(CovarError::TooFewBandSamples { kept: kept.len(), needed: MIN_BAND_KEPT });
            }
            sort(&mut kept);
            let kb = quantile_rank(kept.len(), beta);
            (Some(-kept[kb - 1]), kept.len())
        }
    };

    Ok(McEstimate {
        estimate,
        std_error: var.sqrt(),
        band_estimate,
        band_kept,
        seed: cfg.seed,
        samples: n,
        rng: "chacha20".to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate_model, MarketModel};
    use crate::reduction::reduce;
    use crate::riskmeasures::covar_portfolio;

    fn two_ray(a: f64, b: f64) -> ValidatedModel {
        validate_model(&MarketModel::with_intensities(
            vec![1.0, 2.0, 3.0],
            vec![vec![1.0, 1.0, 2.0], vec![1.0, 9.0, 0.0], vec![2.0, 0.0, 16.0]],
            a,
            b,
        ))
        .unwrap()
    }

    #[test]
    fn agrees_with_formula() {
        let m = two_ray(1.2, 0.9);
        let r = reduce(&m).unwrap();
        let x = Portfolio::new(vec![0.2, 0.5, 0.3]).unwrap();
        let exact = covar_portfolio(&m, &r, &x).unwrap().covar;
        let cfg = McConfig { samples: 200_000, seed: 7, ..Default::default() };
        let est = mc_covar(&m, &x, &cfg).unwrap();
        assert!((est.estimate - exact).abs() < 4.0 * est.std_error, "{est:?} vs {exact}");
        let band = est.band_estimate.unwrap();
        assert!((band - exact).abs() < 0.2, "{band} vs {exact}");
    }

    #[test]
    fn two_ray_high_confidence() {
        let m = two_ray(1.0, 2.0);
        let r = reduce(&m).unwrap();
        let x = Portfolio::new(vec![0.2, 0.5, 0.3]).unwrap();
        let exact = covar_portfolio(&m, &r, &x).unwrap().covar;
        let est = mc_covar(&m, &x, &McConfig { samples: 400_000, seed: 3, ..Default::default() }).unwrap();
        assert!((est.estimate - exact).abs() < 3.0 * est.std_error, "{est:?} vs {exact}");
    }

    #[test]
    fn uncorrelated_portfolio() {
        // Asset 2 is independent of asset 1, so the stress event is irrelevant.
        let m = validate_model(&MarketModel::with_intensities(
            vec![0.5, 1.5],
            vec![vec![1.0, 0.0], vec![0.0, 4.0]],
            1.0,
            1.5,
        ))
        .unwrap();
        let x = Portfolio::unit(2, 1);
        let est = mc_covar(&m, &x, &McConfig { samples: 300_000, seed: 11, ..Default::default() }).unwrap();
        let want = -1.5 + 1.5 * 2.0;
        assert!((est.estimate - want).abs() < 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn corner_optimum_conditioning_vertex() {
        let m = validate_model(&MarketModel::with_intensities(
            vec![2.0, 3.0, 1.0],
            vec![vec![1.0, 0.2, 1.0], vec![0.2, 1.0, 0.0], vec![1.0, 0.0, 9.0]],
            1.0,
            2.0,
        ))
        .unwrap();
        let est = mc_covar(&m, &Portfolio::unit(3, 0), &McConfig { samples: 20_000, ..Default::default() }).unwrap();
        assert_eq!(est.estimate, -1.0);
        // The band keeps Y within 0.05·σ_Y of its stress level 1.
        assert!((est.band_estimate.unwrap() + 1.0).abs() < 0.05);
    }

    #[test]
    fn doubling_samples_shrinks_error() {
        let m = two_ray(1.0, 1.0);
        let x = Portfolio::new(vec![0.4, 0.4, 0.2]).unwrap();
        let base = McConfig { samples: 500_000, seed: 5, band_epsilon: None, bootstrap_reps: 2000 };
        let one = mc_covar(&m, &x, &base).unwrap();
        let two = mc_covar(&m, &x, &McConfig { samples: 1_000_000, ..base }).unwrap();
        let ratio = two.std_error / one.std_error;
        assert!((ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.2 * std::f64::consts::FRAC_1_SQRT_2, "{ratio}");
    }

    #[test]
    fn band_approaches_conditional() {
        let m = two_ray(1.0, 1.0);
        let r = reduce(&m).unwrap();
        let x = Portfolio::new(vec![0.3, 0.3, 0.4]).unwrap();
        let exact = covar_portfolio(&m, &r, &x).unwrap().covar;
        let err = |eps: f64| {
            let cfg = McConfig { samples: 2_000_000, seed: 9, band_epsilon: Some(eps), bootstrap_reps: 100 };
            (mc_covar(&m, &x, &cfg).unwrap().band_estimate.unwrap() - exact).abs()
        };
        let (wide, narrow) = (err(1.0), err(0.05));
        assert!(narrow < wide, "narrow {narrow}, wide {wide}");
        assert!(narrow < 0.05, "{narrow}");
    }

    #[test]
    fn deterministic_per_seed() {
        let m = two_ray(1.0, 1.0);
        let x = Portfolio::new(vec![0.3, 0.3, 0.4]).unwrap();
        let cfg = McConfig { samples: 150_000, seed: 42, ..Default::default() };
        let a = mc_covar(&m, &x, &cfg).unwrap();
        let b = mc_covar(&m, &x, &cfg).unwrap();
        assert_eq!(a, b);
        let c = mc_covar(&m, &x, &McConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a.estimate, c.estimate);
    }

    #[test]
    fn rejects_small_runs() {
        let m = two_ray(1.0, 1.0);
        let x = Portfolio::unit(3, 0);
        let cfg = McConfig { samples: 100, ..Default::default() };
        assert!(matches!(mc_covar(&m, &x, &cfg), Err(CovarError::BadConfig(_))));
    }

    #[test]
    fn narrow_band_starves() {
        let m = two_ray(1.0, 1.0);
        let x = Portfolio::unit(3, 1);
        let cfg = McConfig { samples: 10_000, band_epsilon: Some(1e-6), ..Default::default() };
        assert!(matches!(mc_covar(&m, &x, &cfg), Err(CovarError::TooFewBandSamples { .. })));
    }

    #[test]
    fn conditioning_asset_is_degenerate() {
        // Given Y at its stress level, Y itself is a constant.
        let m = two_ray(1.0, 1.0);
        let x = Portfolio::unit(3, 0);
        let cfg = McConfig { samples: 10_000, band_epsilon: None, ..Default::default() };
        let est = mc_covar(&m, &x, &cfg).unwrap();
        assert!((est.estimate - 0.0).abs() < 1e-12);
        assert_eq!(est.std_error, 0.0);
    }
}
