use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A computation produced a non-finite or otherwise unusable number.
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("degenerate scene {scene}: {reason}")]
    DegenerateScene { scene: String, reason: String },
    /// A transformed topic kept no mass inside the grid.
    #[error("transformed topic has no mass inside the grid")]
    EmptyProjection,
    #[error("topic {topic} of scene {scene} projects outside the reference grid")]
    TopicProjection { scene: String, topic: usize },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
