use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("eigendecomposition did not converge for a {0}x{0} matrix")]
    Convergence(usize),

    #[error("target return {target} outside feasible range [{min}, {max}]")]
    InfeasibleTarget { target: f64, min: f64, max: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("insufficient points: {found} usable, {required} required")]
    InsufficientPoints { found: usize, required: usize },

    #[error("degenerate abscissa: all sigma values are equal")]
    DegenerateAbscissa,

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Variant name, stable across releases.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "ParseError",
            Error::Shape(_) => "ShapeError",
            Error::Domain(_) => "DomainError",
            Error::DegenerateSeries(_) => "DegenerateSeries",
            Error::Convergence(_) => "ConvergenceError",
            Error::InfeasibleTarget { .. } => "InfeasibleTarget",
            Error::NumericalFailure(_) => "NumericalFailure",
            Error::InsufficientPoints { .. } => "InsufficientPoints",
            Error::DegenerateAbscissa => "DegenerateAbscissa",
            Error::Alignment(_) => "AlignmentError",
            Error::Io { .. } => "IoError",
        }
    }

    /// `Kind: message`, as recorded in status columns.
    pub fn status(&self) -> String {
        format!("{}: {self}", self.kind())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
