//! Bayesian inversion of a log-diffusion coefficient field: finite-element
//! forward model with adjoints, bi-Laplacian Gaussian prior, MAP estimation
//! and low-rank Laplace approximation, geometry-aware MCMC kernels and
//! multi-chain convergence diagnostics.

pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod fem;
pub mod laplace;
pub mod linalg;
pub mod mcmc;
pub mod model;
pub mod prior;
pub mod random;

pub use error::{Error, Result};
