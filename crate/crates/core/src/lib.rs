//! Bayesian privacy metrics, reconstruction-attack simulation and numerical
//! verification of privacy/robustness bounds.
//!
//! The finite-kernel math ([`mechanism`], [`divergence`], [`metrics`]) is
//! generic over [`Scalar`]; the aliases below fix it to `f64`, which is what
//! the verifiers, simulators and suites use.

pub mod attack;
pub mod divergence;
pub mod error;
pub mod estimators;
pub mod kernel_file;
pub mod mechanism;
pub mod metrics;
pub mod perturbation;
pub mod real;
pub mod robustness;
pub mod scalar;
pub mod seed;
pub mod suites;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Kernel = mechanism::StochasticKernel<f64>;
pub type Distribution = mechanism::DiscreteDistribution<f64>;
pub type Kernel32 = mechanism::StochasticKernel<f32>;
pub type Distribution32 = mechanism::DiscreteDistribution<f32>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
