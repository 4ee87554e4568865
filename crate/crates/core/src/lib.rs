//! Steady-state entanglement of two mechanical oscillators driven by a
//! detuned parametric interaction and continuously monitored.
//!
//! The four-quadrature problem splits into two independent quadrature
//! pairs. For each pair the library provides the conditional covariance
//! flow ([`riccati`]), closed-form steady-state squeezing and separability
//! ([`closedform`]), stochastic conditional-mean trajectories
//! ([`trajectories`]), and a config-driven command layer ([`cli`]).

pub mod closedform;
pub mod cli;
pub mod error;
pub mod model;
pub mod ode;
pub mod riccati;
pub mod trajectories;

pub use error::{Error, Result};
pub use model::{
    drift_matrix, reduce_to_pairs, threshold, v0, Basis, DriftMatrix4, DriveModel,
    OscillatorPairParams, PairLabel, PairSubsystem, Threshold,
};
pub use riccati::{CovarianceMatrix4, PairCovariance};
