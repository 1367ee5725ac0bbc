//! Sweeps, curve files, cache and scaling analyses on top of `critx-core`.

pub mod analysis;
pub mod cache;
pub mod config;
pub mod curvefile;
pub mod sweep;

pub use critx_core;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("analysis refused: {0}")]
    Refusal(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 1 config or I/O, 2 solver, 3 analysis refusal.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Refusal(_) => 3,
        }
    }
}
