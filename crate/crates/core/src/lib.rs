//! Inference of latent initial microstates of deterministic dynamical systems
//! from short, scalar, aggregated, possibly noisy observation series.
//!
//! The estimation pipeline has three stages: a low-pass moving-average
//! preprocess of the observations, a bounding stage that walks an arbitrary
//! guess along its orbit until its simulated observations roughly match the
//! smoothed data, and a refinement stage that minimizes a least-squares cost
//! with gradient-based optimizers. Out-of-sample prediction metrics
//! (normalized squared errors, predictability horizons, Lyapunov 10-fold
//! times) quantify the quality of the result.

pub mod dynamics;
pub mod filter;
pub mod linear;
pub mod objective;
pub mod observation;
pub mod optim;
pub mod pipeline;
pub mod seed;
pub mod validation;

#[cfg(test)]
pub(crate) mod testutil;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A trajectory produced a non-finite component.
    #[error("trajectory diverged: non-finite state at step {step}")]
    Diverged { step: usize },
    /// A state vector had the wrong length or a non-finite entry.
    #[error("invalid microstate: {0}")]
    InvalidState(String),
    /// A series violated its construction invariants.
    #[error("invalid observation series: {0}")]
    InvalidSeries(String),
    /// A configuration value was out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    /// Filter input shorter than the three-point stencil allows.
    #[error("filter input needs at least 2 points, got {0}")]
    FilterTooShort(usize),
    /// The filtered residual vanished, so the SNR gain is unbounded.
    #[error("zero filtered-residual norm: SNR gain undefined")]
    ZeroResidual,
    /// Level-set guess sampling failed after the configured retries.
    #[error("initial guess failed after {retries} retries: {reason}")]
    GuessFailed { retries: usize, reason: String },
    /// Covariance matrix could not be inverted even after regularization.
    #[error("singular covariance matrix")]
    SingularCovariance,
    /// Estimated Lyapunov exponent was not positive.
    #[error("ten-fold time undefined for non-positive exponent {0}")]
    NonPositiveExponent(f64),
    /// Dimension mismatch between cooperating objects.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
