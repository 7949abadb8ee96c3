use std::fmt;

use thiserror::Error;

/// Pipeline stage a failure is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Sample,
    Driver,
    Combine,
    Reduce,
    Evaluate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Sample => "sample",
            Stage::Driver => "driver",
            Stage::Combine => "combine",
            Stage::Reduce => "reduce",
            Stage::Evaluate => "evaluate",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum FcmError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("unsupported {name} = {value}; supported values: {supported}")]
    Unsupported {
        name: &'static str,
        value: String,
        supported: String,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<FcmError>,
    },

    #[error("worker for partition {partition} failed: {source}")]
    Worker {
        partition: usize,
        #[source]
        source: Box<FcmError>,
    },

    #[error("run cancelled")]
    Cancelled,

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("model file: {0}")]
    Format(String),
}

impl FcmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FcmError::InvalidInput(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        FcmError::Parameter(msg.into())
    }

    pub(crate) fn at(self, stage: Stage) -> Self {
        match self {
            // Keep the innermost tag.
            FcmError::Stage { .. } | FcmError::Cancelled => self,
            other => FcmError::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        FcmError::Io {
            path: path.into(),
            source,
        }
    }

    /// Stage the error was tagged with, if any.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            FcmError::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, FcmError>;
