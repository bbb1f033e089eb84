use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the numerical kernels, solvers, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    /// The matrix handed to a QR step did not have full column rank.
    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    /// The gradient at the candidate optimum has no eigen-gap at position n-k.
    #[error("no strict-complementarity certificate: eigen-gap {gap:.3e} <= {tol:.1e}")]
    NoCertificate { gap: f64, tol: f64 },

    /// The candidate optimum does not span the bottom-k eigenspace of its gradient.
    #[error("candidate optimum is misaligned with the bottom-k eigenspace of its gradient (distance {0:.3e})")]
    Misaligned(f64),

    #[error("config error: {0}")]
    Config(String),

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("failed to parse {}: {msg}", .path.display())]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
