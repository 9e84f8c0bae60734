use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("covariance for user {user}, AP {ap} is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, trace {trace:e})")]
    NotPsd {
        user: usize,
        ap: usize,
        min_eigenvalue: f64,
        trace: f64,
    },

    #[error("pilot correlation matrix for user {user}, AP {ap} is near-singular (condition number {condition:e})")]
    IllConditioned { user: usize, ap: usize, condition: f64 },

    #[error("zero-forcing infeasible: {0}")]
    ZfInfeasible(String),

    #[error("zero precoding direction for user {user}{}", ap.map(|l| format!(", AP {l}")).unwrap_or_default())]
    ZeroDirection { user: usize, ap: Option<usize> },

    #[error("inconsistent hardening statistics for user {user}: denominator {denominator:e}")]
    NegativeDenominator { user: usize, denominator: f64 },

    #[error("max-min bisection did not converge after {iterations} iterations")]
    BisectionDiverged { iterations: usize },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("no runs requested")]
    NoRuns,

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    /// Whether the error stems from numerics (as opposed to user input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd { .. }
                | Error::IllConditioned { .. }
                | Error::ZfInfeasible(_)
                | Error::ZeroDirection { .. }
                | Error::NegativeDenominator { .. }
                | Error::BisectionDiverged { .. }
                | Error::Singular(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
