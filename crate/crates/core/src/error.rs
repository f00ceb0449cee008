use thiserror::Error;

use crate::continuation::ContinuationTrace;
use crate::sphere::ScalarField;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid cap domain: {0}")]
    InvalidDomain(String),

    #[error("invalid polar grid: {0}")]
    InvalidGrid(String),

    #[error("grid too coarse: n_theta = {n_theta}, need at least {min}")]
    GridTooCoarse { n_theta: usize, min: usize },

    #[error("degenerate domain: parallel offset {eps} is not below theta_max = {theta_max}")]
    DomainDegenerate { eps: f64, theta_max: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("{what}: search exhausted after {attempts} candidates (worst value {worst_value:e} at node {worst_node})")]
    SearchExhausted {
        what: &'static str,
        attempts: usize,
        worst_value: f64,
        worst_node: usize,
    },

    #[error("oracle parameters out of range: {0}")]
    OracleOutOfRange(String),

    #[error("linear solve failed: {0}")]
    SingularMatrix(String),

    #[error("line search failed at Newton iteration {iteration} (residual {residual:e})")]
    LineSearchFailed {
        iteration: usize,
        residual: f64,
        last_iterate: Box<ScalarField>,
    },

    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    MaxItersExceeded {
        iterations: usize,
        residual: f64,
        last_iterate: Box<ScalarField>,
    },

    #[error("continuation step underflow at t = {t} (step {step:e} below minimum)")]
    StepUnderflow {
        t: f64,
        step: f64,
        trace: Box<ContinuationTrace>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a single Newton solve, which continuation answers by halving its step.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix(_) | Error::LineSearchFailed { .. } | Error::MaxItersExceeded { .. }
        )
    }
}
