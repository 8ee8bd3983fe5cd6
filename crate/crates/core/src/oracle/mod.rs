//! Ground truth for tiny instances: exhaustive search, finite-difference
//! Hessians and Monte Carlo moments.

pub mod grid;
pub mod hessian;
pub mod montecarlo;

pub use grid::{brute_force_optimum, search, GridSpec, OracleInner, OracleResult, Target, GRID_BOUND};
pub use hessian::{default_steps, eigenvalues, max_eigenvalue, numerical_hessian};
pub use montecarlo::{rate_distribution_check, trimmed_sum_distribution_check, MomentCheck, RateCheck};
