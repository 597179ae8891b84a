use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },
    #[error("inadmissible multilinear rank {rank:?} for shape {shape:?}: {reason}")]
    InadmissibleRank {
        shape: Vec<usize>,
        rank: Vec<usize>,
        reason: String,
    },
    #[error("degenerate chart: Gram minimum eigenvalue {min_eig:e} below threshold {threshold:e}")]
    DegenerateChart { min_eig: f64, threshold: f64 },
    #[error("ambiguous rank in mode {mode}: singular value gap {gap:e} too small")]
    AmbiguousRank { mode: usize, gap: f64 },
    #[error("zero tensor has no canonical position")]
    ZeroTensor,
    #[error("functional is not normal at the base point (tangent component norm {tangent_norm:e})")]
    NotNormal { tangent_norm: f64 },
    #[error("functional has no component in levels k >= 2")]
    NoWitness,
    #[error("witness search exhausted below u = {floor:e}")]
    NumericalFailure { floor: f64 },
    #[error("slice normal is orthogonal to the point")]
    SliceTangency,
    #[error("functional is proportional to the slice normal")]
    ConstantFunctional,
    #[error("parameters outside the open simplex: {0}")]
    Domain(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed tensor file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;
