//! Poisson approximation of worst-case union bounds for compressed-sensing
//! matrix parameters.
//!
//! The crate evaluates restricted-isometry and mutual-coherence statistics
//! of Gaussian and Bernoulli sensing matrices as indicator-kernel
//! U-statistics, estimates their marginal and joint tail probabilities by
//! reproducible Monte Carlo, and compares the empirical worst-case tail with
//! the Poisson prediction `1 - exp(-lambda)` and its Stein-Chen error bounds.
//!
//! Modules:
//! - [`ensembles`]: seedable random sensing matrices and row outer products.
//! - [`kernels`]: the subset functions (RIC kernel, extreme squared singular
//!   values, normalized coherence).
//! - [`ustat`]: subset enumeration, exact U-statistics and the Monte-Carlo
//!   engine for marginal, joint and extreme tails.
//! - [`poisson`]: `lambda_n`, `exp(-lambda)` and the three error bounds.
//! - [`bounds`]: closed-form divergence, Chernoff-type, coherence and union
//!   bounds plus their constants.
//! - [`check`]: executable invariant suites used by the `check` subcommand.

pub mod bounds;
pub mod check;
pub mod ensembles;
mod error;
pub mod kernels;
pub mod linalg;
pub mod poisson;
pub mod ustat;

pub use error::{Error, Result};
