//! Error type shared by the simulation and analysis modules.

use std::fmt;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while configuring or running the toolkit.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A physical or numerical parameter is outside its documented domain.
    InvalidParameter {
        /// Name of the offending parameter.
        name: &'static str,
        /// Human-readable explanation of the violated constraint.
        reason: String,
    },
    /// Configuration file could not be read or parsed.
    Config(String),
    /// The bounded-probability stepper hit its refinement limit: even at the
    /// smallest substep the total event probability still exceeds the cap.
    StepSize {
        /// Total tunnel rate at the failing instant [1/s].
        rate: f64,
        /// Smallest substep tried [s].
        substep: f64,
    },
    /// The capacitance matrix is not invertible (impossible for strictly
    /// positive capacitances; indicates corrupted parameters).
    SingularMatrix,
    /// The two-state potential has no barrier at these parameters (x >= 1).
    NoBarrier {
        /// The dimensionless barrier parameter that reached or exceeded 1.
        x: f64,
    },
    /// An adiabatic-theory expression left its domain of validity.
    TheoryOutOfRange(String),
    /// Curve fitting could not proceed.
    Fit(String),
    /// Requested spectral geometry does not fit the sampled band.
    Spectral(String),
    /// Underlying I/O failure (message carries the path).
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::StepSize { rate, substep } => write!(
                f,
                "step-size error: total rate {rate:.3e} 1/s exceeds the probability cap \
                 even at substep {substep:.3e} s"
            ),
            Error::SingularMatrix => write!(f, "capacitance matrix is singular"),
            Error::NoBarrier { x } => write!(
                f,
                "two-state potential has no barrier (x = {x:.6} >= 1; beta too small \
                 for bistability)"
            ),
            Error::TheoryOutOfRange(msg) => write!(f, "theory out of range: {msg}"),
            Error::Fit(msg) => write!(f, "fit error: {msg}"),
            Error::Spectral(msg) => write!(f, "spectral error: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
