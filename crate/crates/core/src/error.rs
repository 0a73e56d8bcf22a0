use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point set has affine rank {rank} < dimension {dim}; jitter or drop constant features")]
    RankDeficient { rank: usize, dim: usize },

    #[error("{points} points cannot define a full-dimensional ellipsoid in {dim} dimensions (need more than {dim})")]
    TooFewPoints { points: usize, dim: usize },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("weight cap D = {d} is infeasible for a set of {size} points (need D >= {min})", min = 1.0 / *.size as f64)]
    InfeasibleD { d: f64, size: usize },

    #[error("closest reduced-hull points coincide (|w| = {norm:e}); no separating direction")]
    DegenerateSlab { norm: f64 },

    #[error("ellipsoid shape matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("empty input")]
    EmptyInput,

    #[error("model has no ellipsoids")]
    EmptyModel,

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("class {class} has {size} points, fewer than the {k} folds requested")]
    ClassTooSmall { class: usize, size: usize, k: usize },

    #[error("parse error at row {row}, column {col}: {msg}")]
    ParseError { row: usize, col: usize, msg: String },

    #[error("missing label column {0}")]
    MissingLabel(String),

    #[error("empty file")]
    EmptyFile,

    #[error("model file format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt model: {0}")]
    CorruptModel(String),

    #[error("plotting requires 2-D data, got {0} dimensions")]
    PlotDimension(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
