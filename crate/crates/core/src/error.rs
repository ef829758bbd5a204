use thiserror::Error;

/// Errors raised by the laboratory.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time {t} is not a node of the solver grid (dt = {dt})")]
    OffGrid { t: f64, dt: f64 },

    #[error("paths live on different grids")]
    GridMismatch,

    #[error("implicit step did not converge at t = {time} (last residual {residual:e})")]
    Nonconvergence { time: f64, residual: f64 },

    #[error("enumeration budget exceeded: {required} leaves > budget {budget}")]
    BudgetExceeded { required: u128, budget: usize },

    #[error("empty control set")]
    EmptyControlSet,

    #[error("epsilon {eps} outside (0, {eps0})")]
    EpsilonOutOfRange { eps: f64, eps0: f64 },

    #[error("path carries no stored forcing")]
    MissingForcing,

    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// True for errors that come from bad input rather than numerics.
    pub fn is_schema_error(&self) -> bool {
        matches!(
            self,
            LabError::Config(_) | LabError::UnknownName { .. } | LabError::Json(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
