use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is supported on a line or a point (affine rank {rank})")]
    DegenerateSupport { rank: usize },

    #[error("non-finite coordinate in row {row}")]
    NonFinite { row: usize },

    #[error("too few points: got {got}, need at least {need}")]
    TooFewPoints { got: usize, need: usize },

    #[error("dimension {got} is not supported here (expected {expected})")]
    DimensionMismatch { got: usize, expected: String },

    #[error("cannot normalize the zero vector")]
    ZeroVector,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("iterate coincides with sample point {index}")]
    AtomHit { q: Vec<f64>, index: usize },

    #[error("solver hit the iteration cap ({iters}) with residual {residual:e}")]
    MaxIters { iters: usize, residual: f64 },

    #[error("depth region at level {tau} is empty (maximal depth {max_depth})")]
    EmptyRegion { tau: f64, max_depth: f64 },

    #[error("no sample mass in the minimizing cap (gamma = {gamma})")]
    ZeroMass { gamma: f64 },

    #[error("threshold k = {k} leaves tail mass {tail} >= (1 - alpha)/2 = {limit}")]
    InvalidThreshold { k: f64, tail: f64, limit: f64 },

    #[error("no norm threshold satisfies the tail target {target}")]
    Infeasible { target: f64 },

    #[error(
        "alpha = {alpha} is not admissible: depth threshold {threshold} >= maximal-depth bound {bound}"
    )]
    NotAdmissible { alpha: f64, threshold: f64, bound: f64 },

    #[error("bad distribution parameters: {0}")]
    BadParams(String),

    #[error("file not found: {0}")]
    FileNotFound(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DegenerateSupport { .. } => "DegenerateSupport",
            Error::NonFinite { .. } => "NonFinite",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ZeroVector => "ZeroVector",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::AtomHit { .. } => "AtomHit",
            Error::MaxIters { .. } => "MaxIters",
            Error::EmptyRegion { .. } => "EmptyRegion",
            Error::ZeroMass { .. } => "ZeroMass",
            Error::InvalidThreshold { .. } => "InvalidThreshold",
            Error::Infeasible { .. } => "Infeasible",
            Error::NotAdmissible { .. } => "NotAdmissible",
            Error::BadParams(_) => "BadParams",
            Error::FileNotFound(_) => "FileNotFound",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
