use thiserror::Error;

pub type Result<T> = std::result::Result<T, CovarError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CovarError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("at least two assets are required, got {0}")]
    TooFewAssets(usize),
    #[error("non-finite input value in {0}")]
    NonFinite(&'static str),
    #[error("covariance matrix is not symmetric: |sigma[{row}][{col}] - sigma[{col}][{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },
    #[error("covariance matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("expected returns are parallel to the all-ones vector")]
    MuParallelToOnes,
    #[error("quantile level {name} = {value} is outside (0, 1/2)")]
    BadQuantileLevel { name: &'static str, value: f64 },
    #[error("risk parameter {name} = {value} must be positive and finite")]
    BadRiskParam { name: &'static str, value: f64 },
    #[error("conditioning asset {index} is out of range 1..={n}")]
    BadConditioningAsset { index: usize, n: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("weights sum to {sum}, expected 1")]
    NotAPortfolio { sum: f64 },
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("target return {target} outside the attainable range [{min}, {max}]")]
    InfeasibleSlice { target: f64, min: f64, max: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("conditioning band retained only {kept} draws (need at least {needed})")]
    TooFewBandSamples { kept: usize, needed: usize },
    #[error("grid search supports at most {max} assets, got {n}")]
    DimensionTooLarge { n: usize, max: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

impl CovarError {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CovarError::NumericalBreakdown(_) | CovarError::NoConvergence { .. }
        )
    }
}
