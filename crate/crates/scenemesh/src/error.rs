use std::path::PathBuf;

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("missing input: {}", .0.display())]
    MissingInput(PathBuf),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("cannot parse {}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },
    #[error("{}: schema version {found}, this build reads version {expected}", path.display())]
    Version {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
    #[error("{}: expected a {expected} artifact, found {found}", path.display())]
    Kind {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("invalid artifact {}: {msg}", path.display())]
    Invalid { path: PathBuf, msg: String },
    #[error("inputs come from different configurations: {0}")]
    MixedConfig(String),
    #[error(transparent)]
    Core(#[from] scenemesh_core::Error),
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl PipelineError {
    /// 2 for a missing input, 3 for invalid configuration or artifacts, 4 for
    /// numeric failures, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        use scenemesh_core::Error as E;
        match self {
            PipelineError::MissingInput(_) => 2,
            PipelineError::Config(_)
            | PipelineError::Parse { .. }
            | PipelineError::Version { .. }
            | PipelineError::Kind { .. }
            | PipelineError::Invalid { .. }
            | PipelineError::MixedConfig(_)
            | PipelineError::Core(E::Domain(_)) => 3,
            PipelineError::Core(_) => 4,
            PipelineError::Io { .. } | PipelineError::Csv(_) => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            PipelineError::MissingInput(path)
        } else {
            PipelineError::Io { path, source }
        }
    }

    pub(crate) fn invalid(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        PipelineError::Invalid {
            path: path.into(),
            msg: err.to_string(),
        }
    }
}
