//! Monte Carlo simulation and analytics for a continuously driven spin-1
//! (NV-centre-like) dressed-state qubit exposed to Ornstein-Uhlenbeck magnetic
//! and drive-amplitude noise.
//!
//! Units: times in μs; every configured frequency (Rabi frequencies,
//! detunings, splittings, noise amplitudes) is used directly as an angular
//! frequency in rad/μs; dephasing rates are reported in Hz.

pub mod analytics;
pub mod cli;
pub mod error;
pub mod hamiltonians;
pub mod noise;
pub mod propagator;
pub mod quantum_core;
pub mod stark;

pub use error::{Error, Result};
