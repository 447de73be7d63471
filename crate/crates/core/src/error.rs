use thiserror::Error;

use crate::process::{DomainInterval, ValidationReport};

/// Errors raised by the analysis, simulation and wealth-model routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("argument {value} lies outside the domain {domain}")]
    Domain { value: f64, domain: DomainInterval },

    #[error("invalid model specification: {0}")]
    InvalidSpec(ValidationReport),

    #[error("{what} did not converge after {iterations} iterations")]
    Convergence { what: &'static str, iterations: usize },

    #[error("matrix is numerically singular (pivot {pivot:e}, threshold {threshold:e})")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("point s = {s} is outside the convergence strip (spectral abscissa {zeta})")]
    OutsideStrip { s: f64, zeta: f64 },

    #[error("pole is not simple: |y'A'(s0)x| = {value:e}")]
    NotSimple { value: f64 },

    #[error("generator matrix is reducible")]
    Reducible,

    #[error("domain interval is the singleton {{0}}; no tail analysis is possible")]
    DomainDegenerate,

    #[error("{0} is not a root of the spectral abscissa (|zeta| = {1:e})")]
    NotARoot(f64, f64),

    #[error("pole at {0} lies on the boundary of the domain; tail bounds are not available")]
    BoundaryPole(f64),

    #[error("lattice spans are incommensurable: {0}")]
    IncommensurableSpans(String),

    #[error("lattice span unknown, bounds unavailable: {0}")]
    BUnknown(String),

    #[error("tail window holds {n_window} points, need at least {required}")]
    InsufficientTail { n_window: usize, required: usize },

    #[error("fixed-point solver did not converge: residual {residual:e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("equilibrium bracket failed: g stayed nonnegative down to r = {r_lo:e}")]
    BracketFailure { r_lo: f64 },

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of an iterative numerical method, as opposed to bad
    /// input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Convergence { .. }
                | Error::SingularMatrix { .. }
                | Error::NoConvergence { .. }
                | Error::BracketFailure { .. }
                | Error::NotSimple { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
