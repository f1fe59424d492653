use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] bokeh_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing meta.json in {0}")]
    MissingMeta(PathBuf),

    #[error("malformed {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("invariant violation: {0}")]
    InvariantViolation(String),

    #[error("scene {0} is listed more than once across splits")]
    DuplicateScene(String),

    #[error("submission failed validation: {0}")]
    Validation(String),

    #[error("team {team} has no {metric} value")]
    MissingMetric { team: String, metric: &'static str },

    #[error("team {0} has no MOS value")]
    MissingMos(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        HarnessError::Malformed {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, e: csv::Error) -> Self {
        let path = path.into();
        if !e.is_io_error() {
            return HarnessError::malformed(path, e);
        }
        match e.into_kind() {
            csv::ErrorKind::Io(io) => HarnessError::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    }

    /// 1 for validation failures, 2 for I/O and adapter failures.
    pub fn exit_code(&self) -> i32 {
        use bokeh_core::Error as E;
        match self {
            HarnessError::Io { .. } => 2,
            HarnessError::Core(
                E::Io { .. }
                | E::Decode { .. }
                | E::UnsupportedFormat(_)
                | E::AdapterFailure(_)
                | E::MissingScene(_),
            ) => 2,
            _ => 1,
        }
    }
}
