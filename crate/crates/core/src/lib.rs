//! OLS and 2SLS standard errors for a treatment coefficient under random
//! assignment, with closed-form asymptotic variances and a Monte Carlo
//! engine for checking interval coverage.

pub mod cli;
pub mod dgp;
pub mod diagnostics;
pub mod error;
pub mod linmodel;
pub mod montecarlo;
pub mod rng;
pub mod variance;

pub use error::{Error, Result};
