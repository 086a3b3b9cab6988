use thiserror::Error;

use crate::geometry::Violation;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid geometry: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown geometry key `{0}`")]
    UnknownKey(String),
    #[error("geometry line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cannot read geometry file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("with-slit section requested but slit_width_um is 0")]
    NoSlit,
    #[error("need at least 2 filaments per strip, got {0}")]
    TooFewFilaments(usize),
    #[error("total current must be finite, got {0}")]
    NonFiniteCurrent(f64),
    #[error("current-distribution system is singular")]
    SingularCurrentSolve,
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum FieldError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("point ({x_um}, {z_um}) um lies within {distance_um:.3e} um of a conductor element")]
    SingularProximity { x_um: f64, z_um: f64, distance_um: f64 },
    #[error("elliptic integral argument {0} outside [0, 1)")]
    EllipticDomain(f64),
    #[error("{0}")]
    Precondition(String),
}

#[derive(Debug, Error)]
pub enum SpinError {
    #[error("{0}")]
    Precondition(String),
    #[error("eigensolver residual {0:.3e} exceeds tolerance")]
    EigenResidual(f64),
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {needed} data points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("initial parameter {index} = {value} outside bounds [{lower}, {upper}]")]
    InitialOutOfBounds { index: usize, value: f64, lower: f64, upper: f64 },
    #[error("normal equations are singular at the initial point")]
    SingularNormalEquations,
    #[error("model produced a non-finite residual")]
    NonFinite,
    #[error("initialization failed: {0}")]
    Initialization(String),
    #[error("{0}")]
    Precondition(String),
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    Precondition(String),
    #[error("normalization reference at x = 0 is zero")]
    ZeroReference,
    #[error("measured position {0} um outside simulated range [{1}, {2}] um")]
    OutOfRange(f64, f64, f64),
}

/// Errors from the CSV/JSON file formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header { path: String, expected: String, found: String },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Content { path: String, message: String },
}
