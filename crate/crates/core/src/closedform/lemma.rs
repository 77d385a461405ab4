//! Minimization of `F(t) = s·t + √((t − p)² + q)` over the real line.

use serde::{Deserialize, Serialize};

use crate::error::{CovarError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaParams {
    /// Slope, `s ≥ 0`.
    pub s: f64,
    /// Location of the distance term.
    pub p: f64,
    /// Offset inside the root, `q_lem > 0`.
    pub q_lem: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LemmaOutcome {
    /// Global minimum `value` attained at `argmin`.
    Min { value: f64, argmin: f64 },
    /// Bounded below with infimum `p`, approached as `t → −∞` and never attained.
    Infimum(f64),
    /// `F → −∞` as `t → −∞`.
    Unbounded,
}

impl LemmaParams {
    pub fn new(s: f64, p: f64, q_lem: f64) -> Result<Self> {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(CovarError::Domain(format!("lemma slope s = {s} must be >= 0")));
        }
        if !(q_lem > 0.0 && q_lem.is_finite()) {
            return Err(CovarError::Domain(format!("lemma offset q = {q_lem} must be > 0")));
        }
        if !p.is_finite() {
            return Err(CovarError::Domain("lemma location p must be finite".into()));
        }
        Ok(Self { s, p, q_lem })
    }

    /// F(t). Left of `p` the root is rewritten as `|u| + q/(√(u²+q) + |u|)`
    /// so that `s = 1` does not lose everything to cancellation.
    pub fn eval(&self, t: f64) -> f64 {
        let u = t - self.p;
        let root = u.hypot(self.q_lem.sqrt());
        if u < 0.0 {
            (self.s - 1.0) * t + self.p + self.q_lem / (root - u)
        } else {
            self.s * t + root
        }
    }
}

pub fn lemma_minimize(l: &LemmaParams) -> LemmaOutcome {
    let LemmaParams { s, p, q_lem } = *l;
    if s < 1.0 {
        let one_minus = (1.0 - s) * (1.0 + s);
        LemmaOutcome::Min {
            value: p * s + (q_lem * one_minus).sqrt(),
            argmin: p - s * (q_lem / one_minus).sqrt(),
        }
    } else if s == 1.0 {
        LemmaOutcome::Infimum(p)
    } else {
        LemmaOutcome::Unbounded
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Dense grid followed by golden-section refinement.
    fn numeric_min(l: &LemmaParams, lo: f64, hi: f64) -> (f64, f64) {
        let n = 4000;
        let h = (hi - lo) / n as f64;
        let best = (0..=n)
            .map(|k| lo + k as f64 * h)
            .min_by(|x, y| l.eval(*x).total_cmp(&l.eval(*y)))
            .unwrap();
        let (mut a, mut b) = (best - h, best + h);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if l.eval(c) < l.eval(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let t = 0.5 * (a + b);
        (l.eval(t), t)
    }

    #[test]
    fn pure_distance_term() {
        let l = LemmaParams::new(0.0, 3.0, 4.0).unwrap();
        assert_eq!(lemma_minimize(&l), LemmaOutcome::Min { value: 2.0, argmin: 3.0 });
    }

    #[test]
    fn unit_slope_has_infimum_at_p() {
        let l = LemmaParams::new(1.0, 5.0, 1.0).unwrap();
        assert_eq!(lemma_minimize(&l), LemmaOutcome::Infimum(5.0));
        let mut prev = f64::INFINITY;
        for k in 1..=6 {
            let v = l.eval(-10f64.powi(k));
            assert!(v > 5.0 && v < prev);
            prev = v;
        }
    }

    #[test]
    fn half_slope_matches_numeric_search() {
        let l = LemmaParams::new(0.5, 2.0, 4.0).unwrap();
        let LemmaOutcome::Min { value, argmin } = lemma_minimize(&l) else {
            panic!("expected a minimum");
        };
        assert!((value - (1.0 + 3f64.sqrt())).abs() < 1e-15);
        assert!((argmin - (2.0 - (4.0f64 / 3.0).sqrt())).abs() < 1e-15);
        let (v, t) = numeric_min(&l, -20.0, 20.0);
        assert!((v - value).abs() < 1e-12);
        assert!((t - argmin).abs() < 1e-6);
    }

    #[test]
    fn steep_slope_is_unbounded() {
        let l = LemmaParams::new(1.5, 0.0, 1.0).unwrap();
        assert_eq!(lemma_minimize(&l), LemmaOutcome::Unbounded);
        assert!(l.eval(-1e6) < -4e5);
    }

    #[test]
    fn invalid_parameters() {
        assert!(LemmaParams::new(-0.1, 0.0, 1.0).is_err());
        assert!(LemmaParams::new(0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn stable_eval_matches_naive_near_p() {
        let l = LemmaParams::new(0.3, 1.0, 2.0).unwrap();
        for t in [-3.0, 0.0, 0.99, 1.0, 4.0] {
            let naive = l.s * t + ((t - l.p).powi(2) + l.q_lem).sqrt();
            assert!((l.eval(t) - naive).abs() < 1e-14);
        }
    }
}
