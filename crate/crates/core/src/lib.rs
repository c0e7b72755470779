//! Composite-learning FSE-RBFNN fast finite-time backstepping control for
//! uncertain strict-feedback systems with periodic disturbances.
//!
//! The crate is split along the data flow of a closed-loop run:
//!
//! - [`mathkit`]: stateless kernels (Fourier basis, Gaussian RBF network,
//!   signed powers, smooth switching) and inequality oracles.
//! - [`plant`]: strict-feedback plant models, reference trajectories and the
//!   built-in pendulum scenario.
//! - [`controller`]: command filter, compensation system, control laws,
//!   composite adaptive laws and the serial-parallel predictor, all written
//!   as derivative evaluations over explicit state.
//! - [`sim`]: the augmented state, fixed-step RK4 integration, traces,
//!   metrics and variant comparison.

pub mod controller;
pub mod error;
pub mod mathkit;
pub mod plant;
pub mod sim;

pub use error::{Error, Result};
