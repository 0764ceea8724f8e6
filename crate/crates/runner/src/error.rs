use strongdamp::Error;
use thiserror::Error as ThisError;

#[derive(Debug, ThisError)]
pub enum RunError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("{stage}: {source}")]
    Numeric {
        stage: &'static str,
        #[source]
        source: Error,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("comparison: {0}")]
    Compare(String),
}

impl RunError {
    /// Process exit status: 1 for usage errors, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Usage(_) | RunError::Compare(_) => 1,
            RunError::Numeric { .. } | RunError::Io(_) => 3,
        }
    }
}

/// Tags a core error with the pipeline stage; scene and resolution problems
/// are usage errors.
pub fn at(stage: &'static str) -> impl FnOnce(Error) -> RunError {
    move |source| match source {
        Error::InvalidScene(_) | Error::UnderResolved(_) | Error::DegenerateDomain | Error::Resolution { .. } => {
            RunError::Usage(format!("{stage}: {source}"))
        }
        _ => RunError::Numeric { stage, source },
    }
}
