use std::fmt;

use slitcpw::error::{
    AnalysisError, FieldError, FitError, FormatError, GeometryError, SpinError,
};

/// Failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Domain(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Domain(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::SingularCurrentSolve => CliError::Numerical(e.to_string()),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::Geometry(g) => g.into(),
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<SpinError> for CliError {
    fn from(e: SpinError) -> Self {
        match e {
            SpinError::EigenResidual(_) => CliError::Numerical(e.to_string()),
            SpinError::Precondition(_) => CliError::Domain(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::SingularNormalEquations | FitError::NonFinite => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Domain(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Domain(e.to_string())
    }
}
