use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure category, used by the command-line driver to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Training,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("{file}: {bad} malformed rows exceed the allowance of {allowed} (first at line {first_line})")]
    TooManyBadRows {
        file: String,
        bad: usize,
        allowed: usize,
        first_line: usize,
    },

    #[error("no horizontal-section bounds for well(s): {}", .0.join(", "))]
    MissingBounds(Vec<String>),

    #[error("well {well}: overlapping lithology intervals of different class [{a_top}, {a_bottom}) and [{b_top}, {b_bottom})")]
    OverlappingIntervals {
        well: String,
        a_top: f64,
        a_bottom: f64,
        b_top: f64,
        b_bottom: f64,
    },

    #[error("no labeled bins")]
    NoLabeledBins,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid feature spec: {0}")]
    FeatureSpec(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("invalid model parameters: {0}")]
    Params(String),

    #[error("training data contains a single class")]
    SingleClass,

    #[error("both classes are required")]
    MissingClass,

    #[error("empty input")]
    Empty,

    #[error("feature schema mismatch: missing [{}], extra [{}]", missing.join(", "), extra.join(", "))]
    SchemaMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("training diverged (non-finite loss at epoch {epoch}); try a smaller step size")]
    Diverged { epoch: usize },

    #[error("at least 2 wells are required, found {0}")]
    TooFewWells(usize),

    #[error("could not calibrate class share into [{lo}, {hi}] after {attempts} attempts (last share {achieved:.4})")]
    Calibration {
        lo: f64,
        hi: f64,
        attempts: usize,
        achieved: f64,
    },

    #[error("corrupt file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_)
            | Error::FeatureSpec(_)
            | Error::UnknownFeature(_)
            | Error::Params(_)
            | Error::TooFewWells(_) => ErrorKind::Config,
            Error::SingleClass
            | Error::MissingClass
            | Error::SchemaMismatch { .. }
            | Error::Diverged { .. } => ErrorKind::Training,
            Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Data,
        }
    }
}
