use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the estimand toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("arity mismatch: model expects {expected} covariate(s), got {got}")]
    Arity { expected: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid covariate distribution: {0}")]
    InvalidDistribution(String),

    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("degenerate table: {0}")]
    DegenerateTable(String),

    #[error("singular design matrix: {0}")]
    SingularDesign(String),

    #[error("separation detected: coefficient {name} reached {value:.3}")]
    Separation { name: String, value: f64 },

    #[error("infeasible target: moment {index} ({name}) could not be matched, residual {residual:.3e}")]
    InfeasibleTarget {
        index: usize,
        name: String,
        residual: f64,
    },

    #[error("degenerate arm: arm t={arm} has total weight {weight:.3e}")]
    DegenerateArm { arm: u8, weight: f64 },

    #[error("scale mismatch: {left} vs {right}")]
    ScaleMismatch { left: String, right: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("too many failed replicates: {failed} of {total} ({context})")]
    ReplicateFailures {
        failed: usize,
        total: usize,
        context: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable code for diagnostics.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Arity { .. } => "E_ARITY",
            Error::InvalidModel(_) => "E_MODEL",
            Error::InvalidDistribution(_) => "E_DIST",
            Error::NumericDomain(_) => "E_NUMERIC_DOMAIN",
            Error::DegenerateTable(_) => "E_DEGENERATE_TABLE",
            Error::SingularDesign(_) => "E_SINGULAR_DESIGN",
            Error::Separation { .. } => "E_SEPARATION",
            Error::InfeasibleTarget { .. } => "E_INFEASIBLE_TARGET",
            Error::DegenerateArm { .. } => "E_DEGENERATE_ARM",
            Error::ScaleMismatch { .. } => "E_SCALE_MISMATCH",
            Error::InvalidInput(_) => "E_INPUT",
            Error::ReplicateFailures { .. } => "E_REPLICATES",
            Error::Config(_) => "E_CONFIG",
            Error::Parse { .. } => "E_PARSE",
            Error::Io { .. } => "E_IO",
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NumericDomain(_)
                | Error::DegenerateTable(_)
                | Error::SingularDesign(_)
                | Error::Separation { .. }
                | Error::InfeasibleTarget { .. }
                | Error::DegenerateArm { .. }
                | Error::ReplicateFailures { .. }
        )
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
