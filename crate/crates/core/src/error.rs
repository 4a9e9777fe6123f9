use chrono::NaiveDateTime;
use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid hyperparameter {name} = {value}")]
    InvalidHyperparameter { name: String, value: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("all {} fit restarts failed: {}", .diagnostics.len(), .diagnostics.join("; "))]
    Fit { diagnostics: Vec<String> },

    #[error("invalid state: {0}")]
    State(String),

    #[error("{} hour(s) with missing data, first at {}", .hours.len(), first_hour(.hours))]
    Gap { hours: Vec<NaiveDateTime> },

    #[error("degenerate statistics: {0}")]
    DegenerateStats(String),

    #[error("{}:{line}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("io error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn first_hour(hours: &[NaiveDateTime]) -> String {
    hours
        .first()
        .map(|h| h.to_string())
        .unwrap_or_else(|| "-".to_string())
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 data, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidHyperparameter { .. } | Error::Config(_) => 2,
            Error::InvalidInput(_)
            | Error::Gap { .. }
            | Error::DegenerateStats(_)
            | Error::Parse { .. }
            | Error::Io { .. } => 3,
            Error::Numerical(_) | Error::Fit { .. } | Error::State(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
