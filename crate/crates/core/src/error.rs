use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("planning error: {0}")]
    Planning(String),

    #[error("scheduling error: {0}")]
    Scheduling(String),

    /// The requested view cannot be used to steer the run; the caller should
    /// pick a view closer to the known frontier.
    #[error("steering error: {0}")]
    Steering(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("contract error: {0}")]
    Contract(String),

    #[error("transport error (retryable: {retryable}): {message}")]
    Transport { message: String, retryable: bool },

    #[error("generator error (status {status}): {body}")]
    Generator { status: u16, body: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("state error: {0}")]
    State(String),

    #[error("run aborted")]
    Aborted,

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 2 config, 3 generator, 4 state.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Dimension(_)
            | Error::Geometry(_)
            | Error::Planning(_)
            | Error::Steering(_)
            | Error::Json(_) => 2,
            Error::Transport { .. }
            | Error::Generator { .. }
            | Error::Protocol(_)
            | Error::Contract(_)
            | Error::Numeric(_) => 3,
            Error::Scheduling(_)
            | Error::State(_)
            | Error::Aborted
            | Error::Io { .. }
            | Error::Image(_) => 4,
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Error::Transport {
                retryable: true,
                ..
            }
        )
    }
}
