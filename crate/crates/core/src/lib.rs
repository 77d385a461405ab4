//! Mean–CoVaR portfolio selection for Gaussian returns.
//!
//! Risk is the value-at-risk of the portfolio return conditioned on one
//! chosen asset sitting exactly at its own value-at-risk level. The crate
//! evaluates that measure, computes the closed-form critical set with its
//! solvability and efficiency diagnosis, minimizes under a no-short-selling
//! constraint, and ships Monte-Carlo and grid oracles to cross-check all of
//! it.

pub mod closedform;
pub mod constrained;
pub mod error;
pub mod linalg;
pub mod model;
mod normal;
pub mod oracle;
pub mod reduction;
pub mod riskmeasures;

pub use closedform::{
    classify_efficiency, frontier, lemma_minimize, markowitz_critical, solve_critical,
    CriticalSolution, EfficiencyClass, FrontierMode, FrontierPoint, LemmaOutcome, LemmaParams,
    SolveStatus, WitnessRay,
};
pub use constrained::{
    constrained_frontier, minimize_constrained, ConstrainedProblem, ConstrainedSolution,
    FeasibleSet,
};
pub use error::{CovarError, Result};
pub use model::{
    normal_cdf, normal_quantile, validate_model, MarketModel, ModelWarning, Portfolio,
    RiskParams, RiskSpec, ValidatedModel,
};
pub use oracle::{grid_minimize, mc_covar, GridDomain, McConfig, McEstimate};
pub use reduction::{check_independence, gramian_scalars, reduce, Gramian, ReducedModel};
pub use riskmeasures::{covar_bivariate, covar_portfolio, covar_raw, sigma_and_var, PortfolioReport};
