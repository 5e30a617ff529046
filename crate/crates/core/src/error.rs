use thiserror::Error;

/// Errors produced by the kinematics, dynamics, distribution and control layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("degenerate geometry: actuator {actuator} has length {length:e}")]
    DegenerateGeometry { actuator: usize, length: f64 },

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("mass matrix is singular or not positive definite")]
    SingularMass,

    #[error("requested wrench is outside the wrench set")]
    Infeasible,

    #[error("active-set iteration limit ({0}) reached")]
    IterationLimit(usize),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("ill-posed actuator model: {0}")]
    IllPosedModel(String),

    #[error("numeric blow-up at t = {t}")]
    NumericBlowup { t: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}
