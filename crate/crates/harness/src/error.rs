use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] nsac_core::Error),

    #[error("{context}: {source}")]
    Step {
        context: String,
        #[source]
        source: nsac_core::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("check failed: {0}")]
    Assertion(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_step(step: usize, source: nsac_core::Error) -> Self {
        Self::Step {
            context: format!("step {step}"),
            source,
        }
    }

    fn core(&self) -> Option<&nsac_core::Error> {
        match self {
            Self::Core(e) | Self::Step { source: e, .. } => Some(e),
            _ => None,
        }
    }

    /// 2 for bad configuration, 3 for a failed solve, 4 for a failed check.
    pub fn exit_code(&self) -> i32 {
        use nsac_core::Error as E;
        match self {
            Self::Assertion(_) => 4,
            Self::MissingInput(_) | Self::Io { .. } => 1,
            _ => match self.core() {
                Some(E::Solver { .. } | E::Divergence(_)) => 3,
                Some(_) => 2,
                None => 1,
            },
        }
    }
}
