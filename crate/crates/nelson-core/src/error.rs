use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("non-finite value in field `{0}`")]
    NonFinite(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("schedule exhausted: {0}")]
    ScheduleExhausted(String),
    #[error("empty shell: {0}")]
    EmptyShell(String),
    #[error("missing shell: {0}")]
    MissingShell(String),
    #[error("basis dimension {dim} exceeds the hard limit {limit}")]
    BasisTooLarge { dim: usize, limit: usize },
    #[error("eigensolver did not converge, best residual {0:e}")]
    NoConvergence(f64),
    #[error("shift {z} lies within {distance:e} of the spectrum")]
    NearSingular { z: String, distance: f64 },
    #[error("degenerate ground state, gap {0:e}")]
    Degenerate(f64),
    #[error("projection norm {norm:e} fell below the floor {floor} at {step}")]
    NormFloor { step: String, norm: f64, floor: f64 },
    #[error("zero state supplied to {0}")]
    ZeroState(&'static str),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
