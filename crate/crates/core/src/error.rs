use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Input outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no convergence after {iterations} iterations (best residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// The ground level is (nearly) degenerate, so the fidelity susceptibility
    /// is not defined.
    #[error("near-degenerate ground state (gap {gap:e}); fidelity susceptibility refused")]
    Degenerate { gap: f64 },

    #[error("ground-state overlap vanished at x = {x}: level crossing")]
    LevelCrossing { x: f64 },

    #[error("linear solve stagnated at relative residual {residual:e}; use the dense spectral route")]
    Stagnation { residual: f64 },

    #[error("dimension {dim} exceeds the dense limit {max}; use the Lanczos ground-state solver")]
    TooLarge { dim: usize, max: usize },

    /// A scaling analysis could not produce a trustworthy answer.
    #[error("analysis refused: {0}")]
    Refused(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn refused(msg: impl Into<String>) -> Self {
        Error::Refused(msg.into())
    }
}
