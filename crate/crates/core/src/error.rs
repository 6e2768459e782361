use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} file not found: {}", path.display())]
    MissingFile { what: &'static str, path: PathBuf },

    #[error("{}:{row}: {message}", path.display())]
    Parse {
        path: PathBuf,
        row: usize,
        message: String,
    },

    #[error("{}: empty series for segment {segment}, feature {feature:?}", path.display())]
    EmptySeries {
        path: PathBuf,
        segment: usize,
        feature: String,
    },

    #[error("unknown feature kind {kind:?} for feature {feature:?}")]
    UnknownKind { feature: String, kind: String },

    #[error("segment {segment} has no value for feature {feature:?}")]
    MissingValue { segment: usize, feature: String },

    #[error("segment/label count mismatch: {message}")]
    CountMismatch { message: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("cannot stratify: class {class:?} has {count} member(s)")]
    CannotStratify { class: String, count: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("degenerate label graph: labels contain a single class")]
    DegenerateLabels,

    #[error("isolated vertex {vertex}: row has zero degree")]
    IsolatedVertex { vertex: usize },

    #[error("degenerate coordinate {coordinate}: zero curvature with gradient {gradient}")]
    DegenerateCoordinate { coordinate: usize, gradient: f64 },

    #[error("objective increased at sweep {sweep}: {previous} -> {current}")]
    ObjectiveIncrease {
        sweep: usize,
        previous: f64,
        current: f64,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for failures of the solver's own consistency checks, as opposed to
    /// bad input or parameters.
    pub fn is_internal(&self) -> bool {
        match self {
            Error::ObjectiveIncrease { .. } => true,
            Error::Context { source, .. } => source.is_internal(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context<C: Into<String>>(self, f: impl FnOnce() -> C) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context<C: Into<String>>(self, f: impl FnOnce() -> C) -> Result<T> {
        self.map_err(|source| Error::Context {
            context: f().into(),
            source: Box::new(source),
        })
    }
}
