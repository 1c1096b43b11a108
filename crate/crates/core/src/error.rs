//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the fractional-calculus kernels, assembly routines
/// and verification harnesses.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument was rejected by a precondition check.
    #[error("invalid argument for {context}: {message}")]
    InvalidArgument { context: &'static str, message: String },

    /// A node-0 value of a Riemann-Liouville-type derivative was requested.
    /// Such derivatives may be singular at t = 0 and are left undefined there.
    #[error("{quantity} is singular (undefined) at the origin node")]
    SingularAtOrigin { quantity: &'static str },

    /// Two series/meshes that must share a time grid do not.
    #[error("shape mismatch in {context}: {message}")]
    ShapeMismatch { context: &'static str, message: String },

    /// A special-function evaluation could not reach the requested accuracy.
    #[error("evaluation of {function} failed to converge: {message}")]
    NonConvergence { function: &'static str, message: String },

    /// A test function does not satisfy the hypotheses of the identity or
    /// inequality being checked.
    #[error("hypothesis violated for {check}: {message}")]
    HypothesisViolated { check: &'static str, message: String },

    /// The diffusivity dropped below the normalized lower bound at a
    /// quadrature point.
    #[error("kappa(x) = {value} < 1 at x = {x}; rescale the problem so that min kappa >= 1")]
    CoefficientBound { x: f64, value: f64 },

    /// A linear solve failed or left a residual above the configured tolerance.
    #[error("linear solve failed at step {step}: {message}")]
    LinearSolveFailure { step: usize, message: String },

    /// The time stepper produced a non-finite state.
    #[error("non-finite state detected at time step {step}")]
    NonFiniteState { step: usize },

    /// Rate fitting was given unusable samples.
    #[error("rate fit failed: {message}")]
    FitFailure { message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(context: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidArgument { context, message: message.into() }
    }
}
