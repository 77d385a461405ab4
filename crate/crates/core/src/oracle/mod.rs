//! Independent checks on the analytic results.
//!
//! [`mc_covar`] estimates CoVaR by simulation, with no use of the reduced
//! form. [`grid_minimize`] searches small feasible sets exhaustively.

mod grid;
mod montecarlo;

pub use grid::{grid_minimize, GridDomain, GridMinimum};
pub use montecarlo::{mc_covar, McConfig, McEstimate};
