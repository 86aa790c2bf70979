use thiserror::Error;

/// Errors produced anywhere in the identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("insufficient constraints: stiffness matrix is singular (pivot {pivot} at equation {index})")]
    InsufficientConstraints { index: usize, pivot: f64 },

    #[error("linear solve failed: {0}")]
    Solver(String),

    #[error("sensor at ({x}, {y}) lies outside the mesh")]
    SensorOutsideMesh { x: f64, y: f64 },

    #[error("cannot normalize zero measurements ({0} channel)")]
    ZeroMeasurements(&'static str),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
