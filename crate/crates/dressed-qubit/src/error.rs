//! Library error type.

use thiserror::Error;

/// Errors raised by the simulation and analytics routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A state vector did not have unit norm.
    #[error("state vector is not normalized (norm² = {norm_sq})")]
    NotNormalized { norm_sq: f64 },

    /// An operator expected to be Hermitian was not.
    #[error("operator is not Hermitian (max |H - H†| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    /// A parameter was outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A perturbative denominator vanished (resonant drive configuration).
    #[error("resonant denominator in {term}: {value:e}")]
    Resonance { term: &'static str, value: f64 },

    /// The spectral fit found no peak, or several indistinguishable peaks.
    #[error("ambiguous spectrum: {0}")]
    AmbiguousSpectrum(String),

    /// The robust-point search found no admissible minimum.
    #[error("robust-point search failed: {0}")]
    NoRobustPoint(String),

    /// The propagation step sizes violate the configured invariants.
    #[error("step size violation: {0}")]
    StepSize(String),

    /// A numerical routine failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive and finite, got {value}")))
    }
}
