use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("{file}: missing column `{column}`")]
    MissingColumn { file: String, column: String },

    #[error("{file}:{line}: {message}")]
    Format {
        file: String,
        line: usize,
        message: String,
    },

    #[error("truth references hit_id {hit_id} which is absent from the hits file")]
    DanglingHit { hit_id: u64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error(
        "coefficient {what} = {value} outside [-{limit}, {limit}] (annealing hardware coefficient range)"
    )]
    CoefficientRange {
        what: String,
        value: f64,
        limit: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("instance with {n} variables exceeds the exhaustive-search limit of {max}")]
    SizeLimit { n: usize, max: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the error (possibly wrapped in a stage) is an undefined metric.
    pub fn is_undefined_metric(&self) -> bool {
        match self {
            Error::UndefinedMetric(_) => true,
            Error::Stage { source, .. } => source.is_undefined_metric(),
            _ => false,
        }
    }
}
