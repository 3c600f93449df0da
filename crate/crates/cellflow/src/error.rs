use thiserror::Error;

/// Unified error type for the numerical pipeline.
#[derive(Debug, Error)]
pub enum CellflowError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("Newton iteration failed to converge: {0}")]
    NonConvergence(String),

    #[error("step size underflow below {min_step:e} at t = {t}")]
    StepFailure { t: f64, min_step: f64 },

    #[error("no section crossing before t = {t_end}")]
    NoEvent { t_end: f64 },

    #[error("trajectory entered saddle ball of radius {radius:e} at ({x}, {y})")]
    SeparatrixHit { x: f64, y: f64, radius: f64 },

    #[error("separatrix topology outside the proved regime: {0}")]
    Topology(String),

    #[error("chess line passes through lattice node within tolerance: |value - c| = {dist:e}")]
    OnLine { dist: f64 },

    #[error("level does not bound a closed orbit in the cell: {0}")]
    NotClosed(String),

    #[error("no rotation-number certificate found: {0}")]
    NotFound(String),

    #[error("unbounded-drift detection failed: {0}")]
    Unbounded(String),

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CellflowError>;
