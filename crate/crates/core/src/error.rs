use thiserror::Error;

/// Errors raised by the modal toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A dual weight `1/sin(k*beta)` was requested where `sin(k*beta)` vanishes.
    #[error("degenerate weight at mode {mode}: |sin({mode}*{point})| = {value:e}")]
    DegenerateWeight { mode: usize, point: f64, value: f64 },

    /// The actuation points leave some modes invisible.
    #[error("degenerate configuration: modes {xi_modes:?} vanish at xi, modes {eta_modes:?} vanish at eta")]
    DegenerateConfiguration { xi_modes: Vec<usize>, eta_modes: Vec<usize> },

    #[error("mode {mode} is not diagonalizable (eigenvector condition {condition:e})")]
    NonDiagonalizable { mode: usize, condition: f64 },

    #[error("Gramian is singular or not positive definite ({0})")]
    SingularGramian(String),

    #[error("adaptive quadrature did not converge: estimated error {error:e} after {intervals} intervals")]
    QuadratureNonConvergence { error: f64, intervals: usize },

    #[error("time step {dt} exceeds the RK4 stability limit {limit:e}")]
    StepSize { dt: f64, limit: f64 },

    #[error("nonpositive energy {value:e} at t = {time}")]
    NonPositiveEnergy { time: f64, value: f64 },

    #[error("eigenvalue computation failed to converge")]
    EigenFailure,
}

pub type Result<T> = std::result::Result<T, Error>;
