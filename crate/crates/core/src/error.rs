use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (max |S - S^T| = {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is singular (pivot {0:e} below threshold)")]
    Singular(f64),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("problem too large: {0}")]
    Size(String),

    #[error("CB is not Lyapunov diagonally stable with the given weights (lambda_min = {0:e})")]
    LdsViolation(f64),

    #[error("nonlinearity does not meet the requirement: {0}")]
    Nonlinearity(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),

    #[error("numerical failure at t = {t}: {reason} (state {state:?})")]
    Numerical {
        t: f64,
        state: Vec<f64>,
        reason: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
