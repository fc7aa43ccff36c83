use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("scale factor `{name}` must be finite and positive, got {value}")]
    BadScale { name: &'static str, value: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error("trace scale metadata {trace:?} does not match parameters {params:?}")]
    ScaleMismatch {
        trace: crate::model::Scales,
        params: crate::model::Scales,
    },
    #[error("trace is already dimensional")]
    AlreadyDimensional,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid lattice: {0}")]
    Lattice(String),
    #[error("initial profile is undefined at z = {z} (node {node})")]
    UndefinedInitialData { node: usize, z: f64 },
    #[error("invalid numerics: {0}")]
    Numerics(String),
    #[error("time step rejected under strict mode:\n{0}")]
    StrictTimestep(String),
    #[error("reference solver produced non-finite values at step {step}")]
    BlowUp { step: usize },
}

#[derive(Debug, Error)]
pub enum ObservableError {
    #[error("no snapshot near tau = {query}; available times: {available:?}")]
    NoSnapshot { query: f64, available: Vec<f64> },
    #[error("query time {query} lies outside [0, {final_time}]")]
    OutOfRange { query: f64, final_time: f64 },
    #[error("incompatible traces: {0}")]
    Incompatible(String),
    #[error("empty ensemble")]
    EmptyEnsemble,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: field `{field}`: {message}")]
    Semantic {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Top-level error for command execution.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed output file: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
