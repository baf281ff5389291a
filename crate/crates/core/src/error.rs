use std::path::PathBuf;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix has no nonzero entries")]
    ZeroMatrix,

    #[error("system is inconsistent: residual {residual:e} exceeds tolerance {tolerance:e}")]
    InconsistentSystem { residual: f64, tolerance: f64 },

    #[error("invalid rank {rank} for a {rows}x{cols} matrix")]
    InvalidRank { rank: usize, rows: usize, cols: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid block size {block} for {rows} rows")]
    InvalidBlockSize { block: usize, rows: usize },

    #[error("invalid sparse structure: {0}")]
    InvalidStructure(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("sketched residual is numerically zero")]
    ZeroSketchResidual,

    #[error("adaptive momentum parameters are degenerate (gradient parallel to previous step)")]
    DegenerateDirection,

    #[error("sampling stalled at iteration {iteration}: residual {residual:e} above tolerance after {draws} zero draws")]
    StalledSampling {
        iteration: usize,
        draws: usize,
        residual: f64,
    },

    #[error("breakdown at iteration {iteration}: search direction vanished with residual {residual:e}")]
    Breakdown { iteration: usize, residual: f64 },

    #[error("initial point already equals the reference solution")]
    AlreadySolved,

    #[error("relative solution error is exactly zero")]
    ExactConvergence,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
