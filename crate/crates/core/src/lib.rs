//! Smooth mixtures of normal regressions as approximations to conditional densities.
//!
//! The crate builds finite normal mixtures with covariate-dependent weights and means from an
//! analytic target f(y|x), estimates the expected Kullback–Leibler divergence between target
//! and mixture, and evaluates the explicit error bounds, rate exponents and Gaussian
//! Riemann-sum inequalities behind the approximation results.

pub mod bounds;
pub mod discretization;
pub mod divergence;
pub mod error;
pub mod harness;
pub mod mixtures;
pub mod quad;
pub mod special;
pub mod targets;

pub use error::{Error, Result};
