use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GkfError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("series did not converge within {terms} terms")]
    SeriesFailure { terms: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("degenerate cone: edge directions are collinear")]
    DegenerateCone,
    #[error("order {order} out of range: {reason}")]
    OrderOutOfRange { order: usize, reason: String },
    #[error("boundary data lacks curvature weights of order {order}")]
    IncompleteBoundaryData { order: usize },
    #[error("no samples fell inside the level-set window")]
    WindowTooNarrow,
    #[error("projection onto the level set did not converge after {iterations} iterations")]
    ProjectionFailure { iterations: usize },
    #[error("fit design is ill-conditioned (condition number {condition:.3e})")]
    FitUnstable { condition: f64 },
    #[error("GMF series has order {have}, need at least {need}")]
    InsufficientOrder { have: usize, need: usize },
    #[error("field scale {scale} is below twice the grid spacing {spacing}")]
    UnderResolved { scale: f64, spacing: f64 },
    #[error("quadrature did not reach tolerance (estimated error {error:.3e})")]
    Quadrature { error: f64 },
}

pub type Result<T> = std::result::Result<T, GkfError>;
